#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "meca/attacks.hpp"
#include "meca/errors.hpp"

using namespace meca;
using namespace meca::attacks;
using data::LabeledDataset;
using data::Provenance;

namespace {

std::size_t count(const LabeledDataset& ds, Provenance p) {
    return static_cast<std::size_t>(std::count_if(ds.samples.begin(), ds.samples.end(),
                                                  [p](const auto& s) { return s.provenance == p; }));
}

PoisonPlan plan_for(AttackKind kind, const Shape& shape, double pr, double cover = 0.0) {
    PoisonPlan plan;
    plan.kind = kind;
    plan.poison_ratio = pr;
    plan.cover_rate = cover;
    plan.trigger = kind == AttackKind::sig ? make_sig(shape, kSigDelta, kSigFreq, 1) : make_badnet(shape, 1);
    plan.seed = 17;
    return plan;
}

}  // namespace

TEST(Trigger, ZeroMaskLeavesImage) {
    const Shape shape{1, 5, 5};
    const auto ds = data::gen_synthetic(2, 1, shape, 1);
    TriggerSpec trig{Tensor(shape), Tensor(shape, 1.0), 0, TriggerMode::blend};
    EXPECT_EQ(apply_trigger(ds.samples[0].image, trig), ds.samples[0].image);
}

TEST(Trigger, FullMaskGivesPattern) {
    const Shape shape{1, 5, 5};
    const auto ds = data::gen_synthetic(2, 1, shape, 1);
    const Tensor pattern = procedural_pattern(shape, 3);
    TriggerSpec trig{Tensor(shape, 1.0), pattern, 0, TriggerMode::blend};
    EXPECT_EQ(apply_trigger(ds.samples[0].image, trig), pattern);
}

TEST(BadNet, NineWhitePixelsPerChannel) {
    for (const Shape shape : {Shape{1, 28, 28}, Shape{3, 32, 32}}) {
        const TriggerSpec trig = make_badnet(shape, 0);
        const Tensor out = apply_trigger(Tensor(shape), trig);
        for (std::size_t c = 0; c < shape.channels; ++c) {
            std::size_t ones = 0;
            double mask_sum = 0.0;
            for (std::size_t i = 0; i < shape.height; ++i) {
                for (std::size_t j = 0; j < shape.width; ++j) {
                    mask_sum += trig.mask.at(c, i, j);
                    if (out.at(c, i, j) == 1.0) {
                        ++ones;
                        EXPECT_GE(i, shape.height - 3);
                        EXPECT_GE(j, shape.width - 3);
                    }
                }
            }
            EXPECT_EQ(ones, 9u);
            EXPECT_EQ(mask_sum, 9.0);
        }
    }
}

TEST(Blend, Arithmetic) {
    const Shape shape{1, 4, 4};
    const Tensor white(shape, 1.0);
    const TriggerSpec trig = make_blend(white, shape, 0.2, 0);
    const Tensor from_black = apply_trigger(Tensor(shape), trig);
    const Tensor from_gray = apply_trigger(Tensor(shape, 0.5), trig);
    for (double v : from_black.values()) EXPECT_NEAR(v, 0.2, 1e-15);
    for (double v : from_gray.values()) EXPECT_NEAR(v, 0.6, 1e-15);
    const auto ds = data::gen_synthetic(2, 1, shape, 2);
    EXPECT_EQ(apply_trigger(ds.samples[0].image, make_blend(white, shape, 0.0, 0)), ds.samples[0].image);
}

TEST(Blend, PatternResizedAndBroadcast) {
    Tensor small(Shape{1, 2, 2});
    small[0] = 0.0, small[1] = 1.0, small[2] = 0.5, small[3] = 0.25;
    const TriggerSpec trig = make_blend(small, {3, 4, 4}, 0.5, 0);
    for (std::size_t c = 0; c < 3; ++c) {
        EXPECT_EQ(trig.pattern.at(c, 0, 0), 0.0);
        EXPECT_EQ(trig.pattern.at(c, 1, 3), 1.0);
        EXPECT_EQ(trig.pattern.at(c, 3, 0), 0.5);
        EXPECT_EQ(trig.pattern.at(c, 2, 2), 0.25);
    }
    EXPECT_THROW(make_blend(Tensor(Shape{2, 2, 2}), {3, 4, 4}, 0.5, 0), ConfigError);
    EXPECT_THROW(make_blend(small, {1, 4, 4}, 1.0, 0), ConfigError);
}

TEST(Sig, SignalValues) {
    const double delta = 0.1;
    const TriggerSpec trig = make_sig({1, 2, 8}, delta, 2.0, 0);
    EXPECT_EQ(trig.pattern.at(0, 0, 0), 0.0);
    EXPECT_NEAR(trig.pattern.at(0, 1, 1), delta, 1e-15);
    for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_NEAR(trig.pattern.at(0, 0, j), delta * std::sin(2.0 * std::numbers::pi * j * 2.0 / 8.0), 1e-15);
    }
}

TEST(Sig, ZeroImageClipsNegativeHalfWave) {
    const Shape shape{1, 28, 28};
    const Tensor out = apply_trigger(Tensor(shape), make_sig(shape, kSigDelta, kSigFreq, 0));
    const auto v = out.values();
    // The sampled sinusoid peaks just below delta on a 28-pixel row.
    EXPECT_NEAR(*std::max_element(v.begin(), v.end()), kSigDelta, 0.03 * kSigDelta);
    EXPECT_LE(*std::max_element(v.begin(), v.end()), kSigDelta);
    EXPECT_EQ(*std::min_element(v.begin(), v.end()), 0.0);
}

TEST(Poison, BadNetCounts) {
    const auto ds = data::gen_synthetic(10, 100, {1, 8, 8}, 3);
    const auto out = poison_dataset(ds, plan_for(AttackKind::badnet, ds.shape, 0.05));
    EXPECT_EQ(out.size(), 1000u);
    EXPECT_EQ(count(out, Provenance::poison_payload), 50u);
    EXPECT_EQ(count(out, Provenance::poison_cover), 0u);
    for (const auto& s : out.samples) {
        if (s.provenance != Provenance::poison_payload) continue;
        EXPECT_EQ(s.label, 1u);
        EXPECT_NE(s.original_label, 1u);
    }
    EXPECT_NO_THROW(data::validate(out));
}

TEST(Poison, TactCovers) {
    const auto ds = data::gen_synthetic(10, 100, {1, 8, 8}, 3);
    auto plan = plan_for(AttackKind::tact, ds.shape, 0.05, 0.01);
    plan.source_class = 0;
    const auto out = poison_dataset(ds, plan);
    EXPECT_EQ(count(out, Provenance::poison_cover), 10u);
    for (const auto& s : out.samples) {
        if (s.provenance == Provenance::poison_cover) {
            EXPECT_EQ(s.label, s.original_label);
            EXPECT_NE(s.label, 0u);
            EXPECT_NE(s.label, 1u);
        }
        if (s.provenance == Provenance::poison_payload) EXPECT_EQ(s.original_label, 0u);
    }
}

TEST(Poison, SigIsCleanLabelAndExhausts) {
    const auto ds = data::gen_synthetic(10, 100, {1, 8, 8}, 3);
    const auto out = poison_dataset(ds, plan_for(AttackKind::sig, ds.shape, 0.05));
    for (const auto& s : out.samples) {
        if (s.provenance == Provenance::poison_payload) {
            EXPECT_EQ(s.label, 1u);
            EXPECT_EQ(s.original_label, 1u);
        }
    }
    EXPECT_THROW(poison_dataset(ds, plan_for(AttackKind::sig, ds.shape, 0.11)), ConfigError);
}

TEST(Poison, ZeroRatioHasNothingToPoison) {
    const auto ds = data::gen_synthetic(2, 10, {1, 4, 4}, 3);
    try {
        poison_dataset(ds, plan_for(AttackKind::badnet, ds.shape, 0.0));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_STREQ(e.what(), "no samples to poison");
    }
}

TEST(Poison, Deterministic) {
    const auto ds = data::gen_synthetic(4, 20, {1, 4, 4}, 3);
    const auto plan = plan_for(AttackKind::badnet, ds.shape, 0.1);
    EXPECT_EQ(poison_dataset(ds, plan), poison_dataset(ds, plan));
}

TEST(AsrSet, Counts) {
    auto test = data::gen_synthetic(10, 100, {1, 8, 8}, 4);
    test.split = data::Split::test;
    const TriggerSpec trig = make_badnet(test.shape, 1);
    const auto asr = make_asr_testset(test, trig);
    EXPECT_EQ(asr.size(), 900u);
    for (const auto& s : asr.samples) EXPECT_EQ(s.label, 1u);
    EXPECT_EQ(make_asr_testset(test, trig, 0).size(), 100u);
}

TEST(AsrSet, AllTargetClassGivesEmptySet) {
    auto test = data::gen_synthetic(2, 5, {1, 4, 4}, 4);
    test.split = data::Split::test;
    for (auto& s : test.samples) s.label = s.original_label = 0;
    EXPECT_TRUE(make_asr_testset(test, make_badnet(test.shape, 0)).samples.empty());
}

TEST(AsrSet, RequiresTestSplit) {
    const auto train = data::gen_synthetic(2, 5, {1, 4, 4}, 4);
    EXPECT_THROW(make_asr_testset(train, make_badnet(train.shape, 0)), ConfigError);
}

TEST(AttackKind, NamesRoundTrip) {
    for (auto k : {AttackKind::badnet, AttackKind::blend, AttackKind::sig, AttackKind::tact, AttackKind::adaptive_blend}) {
        EXPECT_EQ(attack_from_string(to_string(k)), k);
    }
    EXPECT_THROW(attack_from_string("wanet"), ConfigError);
}
