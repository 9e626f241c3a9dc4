#include "meca/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "meca/errors.hpp"

namespace meca::partition {

PatchMask random_patch_mask(const Shape& shape, std::size_t r, Rng& rng) {
    if (r == 0 || r > shape.height || r > shape.width) {
        throw ConfigError("patch side " + std::to_string(r) + " does not fit image " + shape.str());
    }
    PatchMask pm{Tensor(shape), r, rng.index(shape.height - r + 1), rng.index(shape.width - r + 1)};
    for (std::size_t c = 0; c < shape.channels; ++c)
        for (std::size_t i = pm.row; i < pm.row + r; ++i)
            for (std::size_t j = pm.col; j < pm.col + r; ++j) pm.mask.at(c, i, j) = 1.0;
    return pm;
}

Tensor craft_perturbation(const nn::ModelSpec& spec, const nn::ParamSet& params, const Tensor& x,
                          std::size_t label, double eps) {
    if (!(eps > 0.0)) throw ConfigError("perturbation radius must be positive");
    Tensor delta = nn::input_gradient(spec, params, x, label);
    double sq = 0.0;
    for (double v : delta.values()) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm == 0.0 || !std::isfinite(norm)) {
        delta.fill(0.0);
        return delta;
    }
    for (double& v : delta.values()) v = std::clamp(v / norm, -eps, eps);
    return delta;
}

Tensor perturb_input(const Tensor& x, const PatchMask& mask, const Tensor& delta, PatchMode mode) {
    if (x.dims() != mask.mask.dims() || x.dims() != delta.dims()) {
        throw ConfigError("perturb_input: dims " + dims_str(x.dims()) + ", mask " + dims_str(mask.mask.dims()) +
                          ", delta " + dims_str(delta.dims()));
    }
    Tensor out = x;
    auto o = out.values();
    auto m = mask.mask.values();
    auto d = delta.values();
    if (mode == PatchMode::replace) {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] = o[i] * (1.0 - m[i]) + m[i] * d[i];
    } else {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] += m[i] * d[i];
    }
    clip(out);
    return out;
}

double kl_score(const nn::ModelSpec& spec, const nn::ParamSet& params, const Tensor& x, const Tensor& x_hat) {
    return nn::kl_divergence(nn::forward(spec, params, x), nn::forward(spec, params, x_hat));
}

std::vector<double> score_samples(const SampleSet& set, const nn::ModelSpec& spec, const nn::ParamSet& params,
                                  const PartitionOptions& options, Rng& rng) {
    std::vector<double> scores;
    scores.reserve(set.size());
    for (const Sample& s : set.samples) {
        const PatchMask mask = random_patch_mask(set.shape, options.patch, rng);
        const Tensor delta = craft_perturbation(spec, params, s.image, s.label, options.eps);
        scores.push_back(kl_score(spec, params, s.image, perturb_input(s.image, mask, delta, options.mode)));
    }
    return scores;
}

PartitionOutcome split_by_scores(std::vector<double> scores, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("partition rate must lie in [0, 1]");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const auto n_clean =
        std::min(n, static_cast<std::size_t>(std::llround((1.0 - p) * static_cast<double>(n))));
    PartitionOutcome out;
    out.scores = std::move(scores);
    out.partition_rate = p;
    out.clean_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_clean));
    out.retained_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_clean), order.end());
    std::sort(out.retained_indices.begin(), out.retained_indices.end());
    return out;
}

PartitionOutcome partition_dataset(const SampleSet& set, const nn::ModelSpec& spec, const nn::ParamSet& params,
                                   const PartitionOptions& options, double p, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("partition rate must lie in [0, 1]");
    return split_by_scores(score_samples(set, spec, params, options, rng), p);
}

}  // namespace meca::partition
