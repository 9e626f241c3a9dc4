#include "meca/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "meca/errors.hpp"
#include "meca/rng.hpp"

namespace meca::attacks {

using data::LabeledDataset;
using data::Provenance;

std::string to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::badnet: return "badnet";
        case AttackKind::blend: return "blend";
        case AttackKind::sig: return "sig";
        case AttackKind::tact: return "tact";
        case AttackKind::adaptive_blend: return "adaptive_blend";
    }
    return "?";
}

AttackKind attack_from_string(const std::string& s) {
    if (s == "badnet") return AttackKind::badnet;
    if (s == "blend") return AttackKind::blend;
    if (s == "sig") return AttackKind::sig;
    if (s == "tact") return AttackKind::tact;
    if (s == "adaptive_blend") return AttackKind::adaptive_blend;
    throw ConfigError("unknown attack '" + s + "' (expected badnet, blend, sig, tact, adaptive_blend)");
}

void validate(const TriggerSpec& trig, const Shape& shape) {
    const auto dims = shape.dims();
    if (trig.mask.dims() != dims || trig.pattern.dims() != dims) {
        throw ConfigError("trigger dims " + dims_str(trig.mask.dims()) + " do not match image shape " + shape.str());
    }
    for (double v : trig.mask.values()) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("trigger mask entries must lie in [0, 1]");
    }
    const double lo = trig.mode == TriggerMode::blend ? 0.0 : -1.0;
    for (double v : trig.pattern.values()) {
        if (!(v >= lo && v <= 1.0)) throw ConfigError("trigger pattern entries out of range");
    }
}

Tensor apply_trigger(const Tensor& x, const TriggerSpec& trig) {
    if (x.dims() != trig.mask.dims() || x.dims() != trig.pattern.dims()) {
        throw ConfigError("apply_trigger: image dims " + dims_str(x.dims()) + " vs trigger " +
                          dims_str(trig.mask.dims()));
    }
    Tensor out = x;
    auto o = out.values();
    auto m = trig.mask.values();
    auto t = trig.pattern.values();
    if (trig.mode == TriggerMode::blend) {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = (1.0 - m[i]) * o[i] + m[i] * t[i];
    } else {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] += m[i] * t[i];
    }
    clip(out);
    return out;
}

TriggerSpec make_badnet(const Shape& shape, std::size_t target) {
    if (shape.height < 3 || shape.width < 3) throw ConfigError("badnet trigger needs H, W >= 3");
    TriggerSpec trig{Tensor(shape), Tensor(shape), target, TriggerMode::blend};
    for (std::size_t c = 0; c < shape.channels; ++c) {
        for (std::size_t i = shape.height - 3; i < shape.height; ++i) {
            for (std::size_t j = shape.width - 3; j < shape.width; ++j) {
                trig.mask.at(c, i, j) = 1.0;
                trig.pattern.at(c, i, j) = 1.0;
            }
        }
    }
    return trig;
}

TriggerSpec make_blend(const Tensor& pattern_image, const Shape& shape, double alpha, std::size_t target) {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("blend alpha must lie in [0, 1)");
    if (pattern_image.rank() != 3) throw ConfigError("blend pattern must be a (C, H, W) image");
    const auto& src = pattern_image.dims();
    if (src[0] != 1 && src[0] != shape.channels) {
        throw ConfigError("blend pattern has " + std::to_string(src[0]) + " channels, images have " +
                          std::to_string(shape.channels));
    }
    TriggerSpec trig{Tensor(shape, alpha), Tensor(shape), target, TriggerMode::blend};
    for (std::size_t c = 0; c < shape.channels; ++c) {
        const std::size_t sc = src[0] == 1 ? 0 : c;
        for (std::size_t i = 0; i < shape.height; ++i) {
            const std::size_t si = i * src[1] / shape.height;
            for (std::size_t j = 0; j < shape.width; ++j) {
                trig.pattern.at(c, i, j) = std::clamp(pattern_image.at(sc, si, j * src[2] / shape.width), 0.0, 1.0);
            }
        }
    }
    return trig;
}

TriggerSpec make_sig(const Shape& shape, double delta, double freq, std::size_t target) {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("sig delta must lie in (0, 1)");
    if (!(freq >= 1.0)) throw ConfigError("sig frequency must be >= 1");
    TriggerSpec trig{Tensor(shape, 1.0), Tensor(shape), target, TriggerMode::additive};
    const double w = static_cast<double>(shape.width);
    for (std::size_t c = 0; c < shape.channels; ++c) {
        for (std::size_t i = 0; i < shape.height; ++i) {
            for (std::size_t j = 0; j < shape.width; ++j) {
                trig.pattern.at(c, i, j) = delta * std::sin(2.0 * std::numbers::pi * static_cast<double>(j) * freq / w);
            }
        }
    }
    return trig;
}

Tensor procedural_pattern(const Shape& shape, std::uint64_t seed) {
    Rng rng(seed);
    Tensor t(shape);
    for (double& v : t.values()) v = rng.uniform(0.0, 1.0);
    return t;
}

void validate(const PoisonPlan& plan, const LabeledDataset& ds) {
    if (!(plan.poison_ratio >= 0.0 && plan.poison_ratio <= 0.5)) throw ConfigError("poison ratio must lie in [0, 0.5]");
    if (!(plan.cover_rate >= 0.0 && plan.cover_rate <= 0.1)) throw ConfigError("cover rate must lie in [0, 0.1]");
    if (plan.trigger.target >= ds.num_classes) throw ConfigError("target class out of range");
    if (plan.kind == AttackKind::tact) {
        if (plan.source_class >= ds.num_classes) throw ConfigError("source class out of range");
        if (plan.source_class == plan.trigger.target) throw ConfigError("tact source class equals the target");
    }
    if (plan.kind == AttackKind::sig && plan.cover_rate > 0.0) {
        throw ConfigError("sig is clean-label and takes no cover samples");
    }
    validate(plan.trigger, ds.shape);
}

namespace {

// floor(rate * n), tolerant of representation error in the rate.
std::size_t count_for(double rate, std::size_t n) {
    return static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
}

}  // namespace

LabeledDataset poison_dataset(const LabeledDataset& ds, const PoisonPlan& plan) {
    validate(plan, ds);
    const std::size_t n = ds.size();
    const std::size_t n_payload = count_for(plan.poison_ratio, n);
    const std::size_t n_cover = count_for(plan.cover_rate, n);
    if (n_payload < 1) throw ConfigError("no samples to poison");

    const std::size_t target = plan.trigger.target;
    auto payload_ok = [&](const data::LabeledSample& s) {
        switch (plan.kind) {
            case AttackKind::sig: return s.label == target;
            case AttackKind::tact: return s.label == plan.source_class;
            default: return s.label != target;
        }
    };
    auto cover_ok = [&](const data::LabeledSample& s) {
        return s.label != target && !(plan.kind == AttackKind::tact && s.label == plan.source_class);
    };

    Rng rng(plan.seed);
    std::vector<std::size_t> payload_pool;
    for (std::size_t i = 0; i < n; ++i)
        if (payload_ok(ds.samples[i])) payload_pool.push_back(i);
    if (payload_pool.size() < n_payload) {
        throw ConfigError(to_string(plan.kind) + ": only " + std::to_string(payload_pool.size()) +
                          " eligible samples, " + std::to_string(n_payload) + " needed to poison");
    }
    rng.shuffle(payload_pool);
    payload_pool.resize(n_payload);

    std::vector<bool> taken(n, false);
    for (std::size_t i : payload_pool) taken[i] = true;
    std::vector<std::size_t> cover_pool;
    for (std::size_t i = 0; i < n; ++i)
        if (!taken[i] && cover_ok(ds.samples[i])) cover_pool.push_back(i);
    if (cover_pool.size() < n_cover) {
        throw ConfigError(to_string(plan.kind) + ": not enough samples for " + std::to_string(n_cover) + " covers");
    }
    rng.shuffle(cover_pool);
    cover_pool.resize(n_cover);

    LabeledDataset out = ds;
    for (std::size_t i : payload_pool) {
        auto& s = out.samples[i];
        s.image = apply_trigger(s.image, plan.trigger);
        s.provenance = Provenance::poison_payload;
        if (plan.kind != AttackKind::sig) s.label = target;
    }
    for (std::size_t i : cover_pool) {
        auto& s = out.samples[i];
        s.image = apply_trigger(s.image, plan.trigger);
        s.provenance = Provenance::poison_cover;
    }
    rng.shuffle(out.samples);
    return out;
}

LabeledDataset make_asr_testset(const LabeledDataset& test, const TriggerSpec& trig,
                                std::optional<std::size_t> source_class) {
    if (test.split != data::Split::test) throw ConfigError("make_asr_testset expects a test split");
    validate(trig, test.shape);
    LabeledDataset out{{}, test.num_classes, test.shape, test.split};
    for (const auto& s : test.samples) {
        if (s.label == trig.target) continue;
        if (source_class && s.label != *source_class) continue;
        out.samples.push_back({apply_trigger(s.image, trig), trig.target, Provenance::poison_payload, s.original_label});
    }
    return out;
}

}  // namespace meca::attacks
