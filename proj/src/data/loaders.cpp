#include "meca/loaders.hpp"

#include <fstream>
#include <iterator>

#include "meca/binary_io.hpp"
#include "meca/errors.hpp"

namespace meca::data {

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError(path.string() + ": cannot open");
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels, Split split,
                        std::size_t num_classes) {
    const auto img_bytes = read_all(images);
    const auto lbl_bytes = read_all(labels);

    if (img_bytes.size() < 16) throw LoadError(images.string() + ": truncated IDX header");
    if (io::read_be32(img_bytes.data()) != kIdxImageMagic) throw LoadError(images.string() + ": bad IDX image magic");
    if (lbl_bytes.size() < 8) throw LoadError(labels.string() + ": truncated IDX header");
    if (io::read_be32(lbl_bytes.data()) != kIdxLabelMagic) throw LoadError(labels.string() + ": bad IDX label magic");

    const std::size_t n = io::read_be32(img_bytes.data() + 4);
    const std::size_t rows = io::read_be32(img_bytes.data() + 8);
    const std::size_t cols = io::read_be32(img_bytes.data() + 12);
    const std::size_t n_labels = io::read_be32(lbl_bytes.data() + 4);
    if (n != n_labels) {
        throw LoadError(labels.string() + ": holds " + std::to_string(n_labels) + " labels but " + images.string() +
                        " holds " + std::to_string(n) + " images");
    }
    if (img_bytes.size() != 16 + n * rows * cols) throw LoadError(images.string() + ": truncated or oversized data");
    if (lbl_bytes.size() != 8 + n) throw LoadError(labels.string() + ": truncated or oversized data");

    LabeledDataset ds{{}, num_classes, Shape{1, rows, cols}, split};
    ds.samples.reserve(n);
    const unsigned char* px = img_bytes.data() + 16;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = lbl_bytes[8 + i];
        if (label >= num_classes) {
            throw LoadError(labels.string() + ": label " + std::to_string(label) + " at index " + std::to_string(i) +
                            " exceeds class count");
        }
        Tensor img(ds.shape);
        for (std::size_t p = 0; p < rows * cols; ++p) img[p] = px[p] / 255.0;
        px += rows * cols;
        ds.samples.push_back({std::move(img), label, Provenance::clean, label});
    }
    return ds;
}

LabeledDataset load_cifar_batch(const std::filesystem::path& file, Split split, std::optional<std::size_t> limit) {
    const auto bytes = read_all(file);
    if (bytes.size() % kCifarRecordBytes != 0) {
        throw LoadError(file.string() + ": size " + std::to_string(bytes.size()) + " is not a multiple of the " +
                        std::to_string(kCifarRecordBytes) + "-byte record size");
    }
    std::size_t n = bytes.size() / kCifarRecordBytes;
    if (limit) n = std::min(n, *limit);
    const Shape shape{3, 32, 32};
    LabeledDataset ds{{}, 10, shape, split};
    ds.samples.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
        const unsigned char* rec = bytes.data() + r * kCifarRecordBytes;
        const std::size_t label = rec[0];
        if (label >= 10) throw LoadError(file.string() + ": label byte " + std::to_string(label) + " in record " +
                                         std::to_string(r));
        Tensor img(shape);
        for (std::size_t p = 0; p < shape.size(); ++p) img[p] = rec[1 + p] / 255.0;
        ds.samples.push_back({std::move(img), label, Provenance::clean, label});
    }
    return ds;
}

LabeledDataset load_cifar_bin(const std::filesystem::path& dir, Split split, std::optional<std::size_t> limit) {
    std::vector<std::filesystem::path> files;
    if (split == Split::train) {
        for (int b = 1; b <= 5; ++b) files.push_back(dir / ("data_batch_" + std::to_string(b) + ".bin"));
    } else {
        files.push_back(dir / "test_batch.bin");
    }
    LabeledDataset ds{{}, 10, Shape{3, 32, 32}, split};
    for (const auto& f : files) {
        if (limit && ds.size() >= *limit) break;
        if (!std::filesystem::exists(f)) throw LoadError(f.string() + ": missing CIFAR-10 batch");
        std::optional<std::size_t> remaining;
        if (limit) remaining = *limit - ds.size();
        auto part = load_cifar_batch(f, split, remaining);
        std::move(part.samples.begin(), part.samples.end(), std::back_inserter(ds.samples));
    }
    return ds;
}

}  // namespace meca::data
