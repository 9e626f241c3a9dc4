#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "meca/dataset.hpp"

namespace meca::data {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr std::size_t kCifarRecordBytes = 3073;  // 1 label byte + 3 x 32 x 32 pixels
inline constexpr std::size_t kCifarRecordsPerBatch = 10000;

// MNIST-style IDX pair. Pixels are scaled by 1/255. Errors name the offending file.
LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        Split split = Split::train, std::size_t num_classes = 10);

// CIFAR-10 binary batches: data_batch_1..5.bin for train, test_batch.bin for
// test. `limit` keeps only the first n records in file order.
LabeledDataset load_cifar_bin(const std::filesystem::path& dir, Split split = Split::train,
                              std::optional<std::size_t> limit = std::nullopt);

// Single CIFAR-10 batch file.
LabeledDataset load_cifar_batch(const std::filesystem::path& file, Split split = Split::train,
                                std::optional<std::size_t> limit = std::nullopt);

}  // namespace meca::data
