#pragma once

#include <span>
#include <vector>

#include "meca/nn.hpp"
#include "meca/rng.hpp"
#include "meca/sample_set.hpp"

namespace meca::partition {

// r x r square of ones, identical in every channel.
struct PatchMask {
    Tensor mask;
    std::size_t side = 0;
    std::size_t row = 0;  // top-left corner
    std::size_t col = 0;
};

// How the crafted perturbation enters the patch.
//   replace:  x_hat = x * (1 - m) + m * delta   (default)
//   additive: x_hat = x + m * delta
enum class PatchMode { replace, additive };

struct PartitionOptions {
    double eps = 0.001;      // perturbation radius
    std::size_t patch = 2;   // patch side r
    PatchMode mode = PatchMode::replace;
};

struct PartitionOutcome {
    std::vector<double> scores;                 // KL score per sample, by index
    std::vector<std::size_t> clean_indices;     // D_c: highest scores, in descending-score order
    std::vector<std::size_t> retained_indices;  // D_u: the rest, ascending index
    double partition_rate = 1.0;
};

// Uniformly placed r x r mask. Throws ConfigError if r is 0 or exceeds H or W.
PatchMask random_patch_mask(const Shape& shape, std::size_t r, Rng& rng);

// Input gradient of the loss at x, divided by its L2 norm and clamped to
// [-eps, eps]. A zero gradient yields delta = 0.
Tensor craft_perturbation(const nn::ModelSpec& spec, const nn::ParamSet& params, const Tensor& x,
                          std::size_t label, double eps);

// Applies delta inside the mask and clips to [0, 1].
Tensor perturb_input(const Tensor& x, const PatchMask& mask, const Tensor& delta,
                     PatchMode mode = PatchMode::replace);

// KL(f(x) || f(x_hat)).
double kl_score(const nn::ModelSpec& spec, const nn::ParamSet& params, const Tensor& x, const Tensor& x_hat);

// Scores every sample with a fresh mask. Scores are returned in sample order.
std::vector<double> score_samples(const SampleSet& set, const nn::ModelSpec& spec, const nn::ParamSet& params,
                                  const PartitionOptions& options, Rng& rng);

// Sorts by descending score (ties: ascending index) and puts the first
// round((1 - p) * N) samples into D_c.
PartitionOutcome split_by_scores(std::vector<double> scores, double p);

PartitionOutcome partition_dataset(const SampleSet& set, const nn::ModelSpec& spec, const nn::ParamSet& params,
                                   const PartitionOptions& options, double p, Rng& rng);

}  // namespace meca::partition
