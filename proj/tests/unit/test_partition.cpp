#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "meca/errors.hpp"
#include "meca/partition.hpp"
#include "meca/train.hpp"

using namespace meca;
using namespace meca::partition;

namespace {

Tensor random_image(const Shape& shape, Rng& rng) {
    Tensor t(shape);
    for (double& v : t.values()) v = rng.uniform(0.0, 1.0);
    return t;
}

}  // namespace

TEST(PatchMask, FullImageIsDeterministic) {
    const Shape shape{2, 4, 4};
    Rng a(1), b(2);
    const PatchMask m = random_patch_mask(shape, 4, a);
    EXPECT_EQ(m.row, 0u);
    EXPECT_EQ(m.col, 0u);
    EXPECT_EQ(m.mask, Tensor(shape, 1.0));
    EXPECT_EQ(random_patch_mask(shape, 4, b).mask, m.mask);
}

TEST(PatchMask, EveryCornerReachableUniformly) {
    const Shape shape{1, 28, 28};
    Rng rng(3);
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
    const std::size_t draws = 100000;
    for (std::size_t i = 0; i < draws; ++i) {
        const PatchMask m = random_patch_mask(shape, 2, rng);
        ++counts[{m.row, m.col}];
    }
    ASSERT_EQ(counts.size(), 729u);
    const double expected = static_cast<double>(draws) / 729.0;
    double chi2 = 0.0;
    for (const auto& [corner, n] : counts) chi2 += (n - expected) * (n - expected) / expected;
    // 728 degrees of freedom: mean 728, sd about 38.
    EXPECT_LT(chi2, 728.0 + 6.0 * 38.2);
}

TEST(PatchMask, ChannelsShareSquare) {
    const Shape shape{3, 6, 6};
    Rng rng(4);
    const PatchMask m = random_patch_mask(shape, 2, rng);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            EXPECT_EQ(m.mask.at(0, i, j), m.mask.at(1, i, j));
            EXPECT_EQ(m.mask.at(0, i, j), m.mask.at(2, i, j));
        }
    double total = 0.0;
    for (double v : m.mask.values()) total += v;
    EXPECT_EQ(total, 12.0);
}

TEST(PatchMask, OversizedPatchRejected) {
    Rng rng(1);
    EXPECT_THROW(random_patch_mask({1, 3, 3}, 4, rng), ConfigError);
    EXPECT_THROW(random_patch_mask({1, 3, 3}, 0, rng), ConfigError);
}

TEST(Perturbation, ZeroGradientGivesZeroDelta) {
    const nn::ModelSpec spec = nn::default_mlp({1, 4, 4}, 3);
    Rng rng(5);
    const Tensor x = random_image(spec.input, rng);
    const Tensor delta = craft_perturbation(spec, nn::zero_params(spec), x, 0, 0.001);
    // Zero weights still give a bias gradient but no input gradient.
    for (double v : delta.values()) EXPECT_EQ(v, 0.0);
}

TEST(Perturbation, ClampedToEps) {
    const nn::ModelSpec spec = nn::default_cnn({1, 8, 8}, 4);
    Rng rng(6);
    const nn::ParamSet params = nn::init_params(spec, rng);
    for (int t = 0; t < 30; ++t) {
        const Tensor x = random_image(spec.input, rng);
        const double eps = rng.uniform(1e-4, 0.2);
        const Tensor d = craft_perturbation(spec, params, x, rng.index(4), eps);
        for (double v : d.values()) EXPECT_LE(std::abs(v), eps);
    }
}

TEST(Perturbation, LargeNormalizedEntryHitsClamp) {
    // A one-pixel input gradient normalises to a single entry of magnitude 1.
    nn::ModelSpec spec{{1, 1, 2}, {nn::LayerSpec::flatten(), nn::LayerSpec::dense(2, 2)}, 2};
    nn::ParamSet params = nn::zero_params(spec);
    params.values[0].values()[0] = 1.0;  // only pixel 0 feeds logit 0
    const Tensor d = craft_perturbation(spec, params, Tensor(spec.input, 0.5), 1, 0.001);
    EXPECT_DOUBLE_EQ(std::abs(d.values()[0]), 0.001);
    EXPECT_EQ(d.values()[1], 0.0);
}

TEST(PerturbInput, ZeroMaskIsIdentity) {
    const Shape shape{1, 5, 5};
    Rng rng(7);
    const Tensor x = random_image(shape, rng);
    const PatchMask none{Tensor(shape), 0, 0, 0};
    EXPECT_EQ(perturb_input(x, none, Tensor(shape, 0.3)), x);
    EXPECT_EQ(perturb_input(x, none, Tensor(shape, 0.3), PatchMode::additive), x);
}

TEST(PerturbInput, ReplaceErasesBadNetPatch) {
    const Shape shape{1, 6, 6};
    Tensor x(shape, 0.2);
    PatchMask m{Tensor(shape), 3, 3, 3};
    for (std::size_t i = 3; i < 6; ++i)
        for (std::size_t j = 3; j < 6; ++j) {
            x.at(0, i, j) = 1.0;
            m.mask.at(0, i, j) = 1.0;
        }
    const Tensor out = perturb_input(x, m, Tensor(shape));
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(out.at(0, i, j), (i >= 3 && j >= 3) ? 0.0 : 0.2);
}

TEST(PerturbInput, PatchMassBounded) {
    const Shape shape{3, 8, 8};
    Rng rng(8);
    const double eps = 0.01;
    for (int t = 0; t < 20; ++t) {
        const Tensor x = random_image(shape, rng);
        const PatchMask m = random_patch_mask(shape, 2, rng);
        Tensor d(shape);
        for (double& v : d.values()) v = rng.uniform(-eps, eps);
        const Tensor out = perturb_input(x, m, d);
        double mass = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) mass += m.mask.values()[i] * std::abs(out.values()[i]);
        EXPECT_LE(mass, 4 * eps * 3 + 1e-15);
    }
}

TEST(PerturbInput, DimsMismatchRejected) {
    Rng rng(1);
    const PatchMask m = random_patch_mask({1, 4, 4}, 2, rng);
    EXPECT_THROW(perturb_input(Tensor(Shape{1, 5, 5}), m, Tensor(Shape{1, 5, 5})), ConfigError);
}

TEST(KlScore, IdenticalInputsScoreZero) {
    const nn::ModelSpec spec = nn::default_cnn({1, 8, 8}, 3);
    Rng rng(9);
    const nn::ParamSet params = nn::init_params(spec, rng);
    const Tensor x = random_image(spec.input, rng);
    EXPECT_EQ(kl_score(spec, params, x, x), 0.0);
}

TEST(KlScore, UniformModelScoresZero) {
    const nn::ModelSpec spec = nn::default_mlp({1, 4, 4}, 5);
    Rng rng(10);
    SampleSet set{spec.input, 5, {}};
    for (std::size_t i = 0; i < 20; ++i) set.samples.push_back({random_image(spec.input, rng), i % 5});
    const auto scores = score_samples(set, spec, nn::zero_params(spec), {}, rng);
    for (double s : scores) EXPECT_NEAR(s, 0.0, 1e-15);
}

TEST(Split, SizesFollowRate) {
    std::vector<double> s(100);
    for (std::size_t i = 0; i < 100; ++i) s[i] = static_cast<double>(i);
    const auto full = split_by_scores(s, 1.0);
    EXPECT_TRUE(full.clean_indices.empty());
    EXPECT_EQ(full.retained_indices.size(), 100u);
    const auto out = split_by_scores(s, 0.95);
    ASSERT_EQ(out.clean_indices.size(), 5u);
    EXPECT_EQ(out.clean_indices, (std::vector<std::size_t>{99, 98, 97, 96, 95}));
    EXPECT_EQ(out.retained_indices.size(), 95u);
    EXPECT_TRUE(std::is_sorted(out.retained_indices.begin(), out.retained_indices.end()));
}

TEST(Split, TiesBreakByIndex) {
    const auto out = split_by_scores({1.0, 2.0, 2.0, 0.5}, 0.5);
    EXPECT_EQ(out.clean_indices, (std::vector<std::size_t>{1, 2}));
    EXPECT_THROW(split_by_scores({1.0}, 1.5), ConfigError);
}

TEST(Partition, SeedDeterminism) {
    const nn::ModelSpec spec = nn::default_mlp({1, 4, 4}, 2);
    Rng init(11);
    const nn::ParamSet params = nn::init_params(spec, init);
    SampleSet set{spec.input, 2, {}};
    for (std::size_t i = 0; i < 30; ++i) set.samples.push_back({random_image(spec.input, init), i % 2});
    Rng a(12), b(12);
    const auto pa = partition_dataset(set, spec, params, {}, 0.7, a);
    const auto pb = partition_dataset(set, spec, params, {}, 0.7, b);
    EXPECT_EQ(pa.scores, pb.scores);
    EXPECT_EQ(pa.clean_indices.size(), 9u);
}
