#include "meca/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "meca/errors.hpp"

namespace meca::defense {

void validate(const DefenseSchedule& s) {
    if (!(s.gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (s.enhance_epochs > 0 && !(partition_rate(s.enhance_epochs - 1, s.gamma) > 0.0)) {
        throw ConfigError("schedule drives the partition rate to " +
                          std::to_string(partition_rate(s.enhance_epochs - 1, s.gamma)) +
                          " (need enhance_epochs * gamma < 1)");
    }
    if (!(s.lr_train > 0.0)) throw ConfigError("lr_train must be positive");
    if (!(s.lr_unlearn >= 0.0)) throw ConfigError("lr_unlearn must be non-negative");
    if (s.batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(s.unlearn_clip > 0.0)) throw ConfigError("unlearn clip must be positive");
    if (!(s.partition.eps > 0.0)) throw ConfigError("eps must be positive");
    if (s.partition.patch == 0) throw ConfigError("patch size must be positive");
}

double partition_rate(std::size_t epoch, double gamma) { return 1.0 - static_cast<double>(epoch + 1) * gamma; }

EnhanceResult enhance_backdoor(const SampleSet& untrusted, const nn::ModelSpec& spec, const DefenseSchedule& schedule,
                               Rng& rng, const EnhanceHook& hook) {
    validate(schedule);
    if (untrusted.empty()) throw ConfigError("untrusted set is empty");
    Rng init_rng = rng.fork("enhance-init");
    Rng train_rng = rng.fork("enhance-train");
    Rng partition_rng = rng.fork("enhance-partition");
    Rng unlearn_rng = rng.fork("enhance-unlearn");

    EnhanceResult result;
    result.params = nn::init_params(spec, init_rng);
    std::vector<std::size_t> retained(untrusted.size());
    std::iota(retained.begin(), retained.end(), std::size_t{0});

    const nn::EpochOptions train_opts{schedule.lr_train, schedule.batch_size, nn::Direction::descend, 0.0};
    for (std::size_t e = 0; e < schedule.enhance_epochs; ++e) {
        EnhanceEpoch rec;
        rec.epoch = e;
        rec.train_loss = nn::run_epoch(spec, result.params, untrusted, retained, train_opts, train_rng).mean_loss;
        rec.p = partition_rate(e, schedule.gamma);
        result.last_partition =
            partition::partition_dataset(untrusted, spec, result.params, schedule.partition, rec.p, partition_rng);
        retained = result.last_partition.retained_indices;
        rec.n_clean = result.last_partition.clean_indices.size();
        if (rec.n_clean > 0) {
            rec.unlearn_loss = unlearn_epoch(spec, result.params, untrusted, result.last_partition.clean_indices,
                                             schedule.lr_unlearn, schedule.batch_size, schedule.unlearn_clip,
                                             unlearn_rng)
                                   .mean_loss;
        }
        result.trace.push_back(rec);
        if (hook) hook(rec, result.params);
    }
    return result;
}

nn::EpochStats unlearn_epoch(const nn::ModelSpec& spec, nn::ParamSet& params, const SampleSet& set,
                             std::span<const std::size_t> clean, double lr_unlearn, std::size_t batch_size,
                             double clip_norm, Rng& rng) {
    if (clean.empty()) throw ConfigError("unlearn_epoch needs a non-empty clean selection");
    if (lr_unlearn == 0.0) return {};
    const nn::EpochOptions opts{lr_unlearn, batch_size, nn::Direction::ascend, clip_norm};
    try {
        return nn::run_epoch(spec, params, set, clean, opts, rng);
    } catch (const RuntimeFailure& e) {
        throw RuntimeFailure(std::string("unlearning diverged: ") + e.what() + " (lr_unlearn " +
                             std::to_string(lr_unlearn) + ", clip " + std::to_string(clip_norm) + ")");
    }
}

std::vector<std::size_t> extract_clean(const SampleSet& untrusted, const nn::ModelSpec& spec,
                                       const nn::ParamSet& enhanced) {
    const auto pred = nn::predict_all(spec, enhanced, untrusted);
    std::vector<std::size_t> clean;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] != untrusted[i].label) clean.push_back(i);
    if (clean.empty()) throw RuntimeFailure("enhancement failed: the enhanced model misclassifies no sample");
    return clean;
}

nn::ParamSet train_clean(const SampleSet& set, std::span<const std::size_t> indices, const nn::ModelSpec& spec,
                         std::size_t epochs, double lr, std::size_t batch_size, Rng& rng, const EpochHook& hook) {
    if (indices.empty()) throw ConfigError("train_clean needs a non-empty clean set");
    Rng init_rng = rng.fork("clean-init");
    Rng train_rng = rng.fork("clean-train");
    nn::ParamSet params = nn::init_params(spec, init_rng);
    const nn::EpochOptions opts{lr, batch_size, nn::Direction::descend, 0.0};
    for (std::size_t e = 0; e < epochs; ++e) {
        nn::run_epoch(spec, params, set, indices, opts, train_rng);
        if (hook) hook(e, params);
    }
    return params;
}

RelearnResult relabel_relearn(const SampleSet& untrusted, std::span<const std::size_t> clean,
                              const nn::ModelSpec& spec, const nn::ParamSet& clean_model, std::size_t epochs,
                              double lr, std::size_t batch_size, Rng& rng, const EpochHook& hook) {
    std::vector<bool> is_clean(untrusted.size(), false);
    for (std::size_t i : clean) is_clean.at(i) = true;

    RelearnResult out;
    out.combined = untrusted;
    for (std::size_t i = 0; i < untrusted.size(); ++i) {
        if (is_clean[i]) continue;
        out.combined.samples[i].label = nn::predict(spec, clean_model, untrusted[i].image);
        out.relabeled.push_back(i);
    }
    out.params = clean_model;
    Rng train_rng = rng.fork("relearn-train");
    const nn::EpochOptions opts{lr, batch_size, nn::Direction::descend, 0.0};
    for (std::size_t e = 0; e < epochs; ++e) {
        nn::run_epoch(spec, out.params, out.combined, opts, train_rng);
        if (hook) hook(e, out.params);
    }
    return out;
}

}  // namespace meca::defense
