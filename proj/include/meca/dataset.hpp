#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "meca/sample_set.hpp"
#include "meca/tensor.hpp"

namespace meca::data {

// Ground truth about how a sample was produced. Evaluation-only: the defense
// libraries do not link against this module.
enum class Provenance : std::uint8_t { clean, poison_payload, poison_cover };
enum class Split : std::uint8_t { train, test };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);
std::string to_string(Split s);

struct LabeledSample {
    Tensor image;  // values in [0, 1], dims (C, H, W)
    std::size_t label = 0;
    Provenance provenance = Provenance::clean;
    std::size_t original_label = 0;

    friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct LabeledDataset {
    std::vector<LabeledSample> samples;
    std::size_t num_classes = 0;
    Shape shape;
    Split split = Split::train;

    [[nodiscard]] std::size_t size() const { return samples.size(); }
    [[nodiscard]] std::vector<std::size_t> class_counts() const;

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// Checks shapes, label range, pixel range and the clean => label == original
// invariant. Throws ConfigError.
void validate(const LabeledDataset& ds);

// Images and labels only; provenance is dropped.
SampleSet untrusted_view(const LabeledDataset& ds);

// Class-conditional Gaussian blobs on a noisy background, clipped to [0, 1].
// Exactly per_class samples of each class, ordered class by class.
LabeledDataset gen_synthetic(std::size_t num_classes, std::size_t per_class, const Shape& shape, std::uint64_t seed);

// Class-balanced subset of exactly per_class samples per class, drawn with a
// seeded PRNG. Throws ConfigError when a class has fewer samples.
LabeledDataset subsample(const LabeledDataset& ds, std::size_t per_class, std::uint64_t seed);

// Persisted form: JSON manifest + raw little-endian f64 image file written next
// to it (same stem, ".f64" extension).
void save_dataset(const std::filesystem::path& manifest, const LabeledDataset& ds);
LabeledDataset load_dataset(const std::filesystem::path& manifest);

// Raw float image (for trigger patterns): f64 values with dims taken from a
// sidecar-free header "MECAIMG1" | C u32 | H u32 | W u32 | data.
void save_image(const std::filesystem::path& path, const Tensor& image);
Tensor load_image(const std::filesystem::path& path);

}  // namespace meca::data
