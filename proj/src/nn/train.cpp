#include "meca/train.hpp"

#include <cmath>
#include <numeric>

#include "meca/errors.hpp"

namespace meca::nn {

EpochStats run_epoch(const ModelSpec& spec, ParamSet& params, const SampleSet& set,
                     std::span<const std::size_t> indices, const EpochOptions& options, Rng& rng) {
    if (options.batch_size == 0) throw ConfigError("batch size must be positive");
    EpochStats stats;
    if (indices.empty() || options.lr == 0.0) return stats;
    std::vector<std::size_t> order(indices.begin(), indices.end());
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
        const std::size_t end = std::min(order.size(), start + options.batch_size);
        auto batch = std::span<const std::size_t>(order).subspan(start, end - start);
        LossAndGrads lg = loss_and_grads(spec, params, set, batch);
        if (!std::isfinite(lg.loss)) {
            throw RuntimeFailure("non-finite loss at step " + std::to_string(stats.steps));
        }
        if (options.clip_norm > 0.0) clip_global_norm(lg.grads.params, options.clip_norm);
        sgd_step(params, lg.grads.params, options.lr, options.direction);
        if (!params.all_finite()) {
            throw RuntimeFailure("parameters became non-finite at step " + std::to_string(stats.steps) +
                                 " (batch loss " + std::to_string(lg.loss) + ")");
        }
        loss_sum += lg.loss;
        ++stats.steps;
    }
    stats.mean_loss = loss_sum / static_cast<double>(stats.steps);
    return stats;
}

EpochStats run_epoch(const ModelSpec& spec, ParamSet& params, const SampleSet& set, const EpochOptions& options,
                     Rng& rng) {
    std::vector<std::size_t> all(set.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return run_epoch(spec, params, set, all, options, rng);
}

}  // namespace meca::nn
