#pragma once

#include <functional>
#include <vector>

#include "meca/nn.hpp"
#include "meca/partition.hpp"
#include "meca/train.hpp"

namespace meca::defense {

struct DefenseSchedule {
    double gamma = 0.05;                // clean-fraction increment per enhancement epoch
    std::size_t enhance_epochs = 10;    // E_b
    std::size_t standard_epochs = 30;   // E_s
    double lr_train = 0.05;
    double lr_unlearn = 1e-4;
    std::size_t batch_size = 32;
    double unlearn_clip = 5.0;          // per-batch gradient L2 clip during unlearning
    partition::PartitionOptions partition;
};

// Throws ConfigError unless E_b * gamma < 1 and every rate is positive.
void validate(const DefenseSchedule& schedule);

// p = 1 - (epoch + 1) * gamma.
double partition_rate(std::size_t epoch, double gamma);

struct EnhanceEpoch {
    std::size_t epoch = 0;
    double p = 1.0;
    std::size_t n_clean = 0;
    double train_loss = 0.0;
    double unlearn_loss = 0.0;
};

// Called after every enhancement epoch with the model at that point.
using EnhanceHook = std::function<void(const EnhanceEpoch&, const nn::ParamSet&)>;

struct EnhanceResult {
    nn::ParamSet params;
    std::vector<EnhanceEpoch> trace;
    partition::PartitionOutcome last_partition;
};

// Iterative backdoor enhancement: each epoch learns the retained pool,
// re-partitions the full untrusted set with the current model and unlearns the
// partition's clean side.
EnhanceResult enhance_backdoor(const SampleSet& untrusted, const nn::ModelSpec& spec, const DefenseSchedule& schedule,
                               Rng& rng, const EnhanceHook& hook = {});

// One pass of gradient ascent on the cross-entropy of set[clean]. Throws
// ConfigError on an empty selection and RuntimeFailure on divergence.
nn::EpochStats unlearn_epoch(const nn::ModelSpec& spec, nn::ParamSet& params, const SampleSet& set,
                             std::span<const std::size_t> clean, double lr_unlearn, std::size_t batch_size,
                             double clip_norm, Rng& rng);

// Indices of samples the enhanced model misclassifies. Throws RuntimeFailure
// ("enhancement failed") when there are none.
std::vector<std::size_t> extract_clean(const SampleSet& untrusted, const nn::ModelSpec& spec,
                                       const nn::ParamSet& enhanced);

using EpochHook = std::function<void(std::size_t epoch, const nn::ParamSet&)>;

// Fresh model trained for `epochs` epochs on set[indices] only.
nn::ParamSet train_clean(const SampleSet& set, std::span<const std::size_t> indices, const nn::ModelSpec& spec,
                         std::size_t epochs, double lr, std::size_t batch_size, Rng& rng, const EpochHook& hook = {});

struct RelearnResult {
    nn::ParamSet params;
    SampleSet combined;                        // D_com, in original sample order
    std::vector<std::size_t> relabeled;        // indices outside D_clean
};

// Relabels every sample outside D_clean with the clean model's prediction,
// merges with D_clean and fine-tunes the clean model on the union.
RelearnResult relabel_relearn(const SampleSet& untrusted, std::span<const std::size_t> clean,
                              const nn::ModelSpec& spec, const nn::ParamSet& clean_model, std::size_t epochs,
                              double lr, std::size_t batch_size, Rng& rng, const EpochHook& hook = {});

}  // namespace meca::defense
