#include "meca/sample_set.hpp"

namespace meca {

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
    SampleSet out{shape, num_classes, {}};
    out.samples.reserve(indices.size());
    for (std::size_t i : indices) out.samples.push_back(samples.at(i));
    return out;
}

}  // namespace meca
