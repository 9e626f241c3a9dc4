#pragma once

#include <span>

#include "meca/nn.hpp"

namespace meca::nn {

struct EpochOptions {
    double lr = 0.05;
    std::size_t batch_size = 32;
    Direction direction = Direction::descend;
    // Per-batch global gradient L2 clip; 0 disables.
    double clip_norm = 0.0;
};

struct EpochStats {
    double mean_loss = 0.0;  // mean of per-batch losses, measured before each step
    std::size_t steps = 0;
};

// One shuffled pass of minibatch SGD over set[indices]. Throws RuntimeFailure
// if a batch loss or the updated parameters become non-finite.
EpochStats run_epoch(const ModelSpec& spec, ParamSet& params, const SampleSet& set,
                     std::span<const std::size_t> indices, const EpochOptions& options, Rng& rng);

// Same over the whole set.
EpochStats run_epoch(const ModelSpec& spec, ParamSet& params, const SampleSet& set, const EpochOptions& options,
                     Rng& rng);

}  // namespace meca::nn
