#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "meca/tensor.hpp"

namespace meca {

// An image with the label the training pipeline sees. Carries no poisoning
// ground truth: that lives only in data::LabeledDataset.
struct Sample {
    Tensor image;
    std::size_t label = 0;

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct SampleSet {
    Shape shape;
    std::size_t num_classes = 0;
    std::vector<Sample> samples;

    [[nodiscard]] std::size_t size() const { return samples.size(); }
    [[nodiscard]] bool empty() const { return samples.empty(); }
    const Sample& operator[](std::size_t i) const { return samples[i]; }

    [[nodiscard]] SampleSet subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

}  // namespace meca
