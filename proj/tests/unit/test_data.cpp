#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "meca/dataset.hpp"
#include "meca/errors.hpp"
#include "meca/loaders.hpp"

using namespace meca;
using namespace meca::data;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("meca_test_data_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void put_be32(std::ofstream& os, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

// Writes an IDX image/label pair of n images, rows x cols, pixel i of image k = (k + i) % 256.
void write_idx(const fs::path& images, const fs::path& labels, std::uint32_t n, std::uint32_t rows,
               std::uint32_t cols, std::uint32_t n_labels, std::uint32_t image_magic = kIdxImageMagic) {
    std::ofstream im(images, std::ios::binary);
    put_be32(im, image_magic);
    put_be32(im, n);
    put_be32(im, rows);
    put_be32(im, cols);
    for (std::uint32_t k = 0; k < n; ++k)
        for (std::uint32_t i = 0; i < rows * cols; ++i) im.put(static_cast<char>((k + i) % 256));
    std::ofstream lb(labels, std::ios::binary);
    put_be32(lb, kIdxLabelMagic);
    put_be32(lb, n_labels);
    for (std::uint32_t k = 0; k < n_labels; ++k) lb.put(static_cast<char>(k % 10));
}

void write_cifar(const fs::path& file, std::size_t records, std::size_t first_label = 0) {
    std::ofstream os(file, std::ios::binary);
    for (std::size_t r = 0; r < records; ++r) {
        os.put(static_cast<char>((first_label + r) % 10));
        for (std::size_t p = 0; p < 3 * 32 * 32; ++p) os.put(static_cast<char>((r + p) % 256));
    }
}

}  // namespace

TEST(Synthetic, CountsAndLabels) {
    const auto ds = gen_synthetic(2, 10, {1, 8, 8}, 1);
    ASSERT_EQ(ds.size(), 20u);
    EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>{10, 10}));
    EXPECT_NO_THROW(validate(ds));
}

TEST(Synthetic, SeedDeterminism) {
    EXPECT_EQ(gen_synthetic(3, 5, {1, 6, 6}, 9), gen_synthetic(3, 5, {1, 6, 6}, 9));
    EXPECT_NE(gen_synthetic(3, 5, {1, 6, 6}, 9), gen_synthetic(3, 5, {1, 6, 6}, 10));
}

TEST(Subsample, FullSizeIsPermutation) {
    const auto ds = gen_synthetic(3, 4, {1, 4, 4}, 2);
    const auto sub = subsample(ds, 4, 5);
    ASSERT_EQ(sub.size(), ds.size());
    for (const auto& s : ds.samples) EXPECT_NE(std::find(sub.samples.begin(), sub.samples.end(), s), sub.samples.end());
}

TEST(Subsample, CountsAndDeterminism) {
    const auto ds = gen_synthetic(10, 250, {1, 4, 4}, 3);
    const auto sub = subsample(ds, 200, 1);
    EXPECT_EQ(sub.size(), 2000u);
    EXPECT_EQ(sub.class_counts(), std::vector<std::size_t>(10, 200));
    EXPECT_EQ(sub, subsample(ds, 200, 1));
    EXPECT_THROW(subsample(ds, 251, 1), ConfigError);
}

TEST(Validate, RejectsOutOfRangePixelsAndLabels) {
    auto ds = gen_synthetic(2, 2, {1, 2, 2}, 1);
    auto bad_px = ds;
    bad_px.samples[0].image[0] = 1.5;
    EXPECT_THROW(validate(bad_px), ConfigError);
    auto bad_label = ds;
    bad_label.samples[0].label = 2;
    bad_label.samples[0].original_label = 2;
    EXPECT_THROW(validate(bad_label), ConfigError);
    auto relabeled_clean = ds;
    relabeled_clean.samples[0].label = 1 - relabeled_clean.samples[0].original_label;
    EXPECT_THROW(validate(relabeled_clean), ConfigError);
}

TEST(UntrustedView, DropsProvenance) {
    const auto ds = gen_synthetic(2, 3, {1, 2, 2}, 1);
    const SampleSet v = untrusted_view(ds);
    ASSERT_EQ(v.size(), ds.size());
    EXPECT_EQ(v.num_classes, 2u);
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_EQ(v[i].image, ds.samples[i].image);
        EXPECT_EQ(v[i].label, ds.samples[i].label);
    }
}

TEST(Manifest, RoundTripIsBitExact) {
    const fs::path dir = scratch_dir("manifest");
    auto ds = gen_synthetic(3, 4, {2, 5, 5}, 4);
    ds.samples[1].provenance = Provenance::poison_payload;
    ds.samples[1].label = 2;
    ds.samples[2].provenance = Provenance::poison_cover;
    ds.samples[0].image[3] = 0.1 + 0.2;  // not representable as a short decimal
    ds.split = Split::test;
    save_dataset(dir / "set.manifest", ds);
    EXPECT_TRUE(fs::exists(dir / "set.f64"));
    EXPECT_EQ(load_dataset(dir / "set.manifest"), ds);
}

TEST(Manifest, TruncatedRawFileRejected) {
    const fs::path dir = scratch_dir("manifest_trunc");
    save_dataset(dir / "set.manifest", gen_synthetic(2, 2, {1, 3, 3}, 1));
    fs::resize_file(dir / "set.f64", fs::file_size(dir / "set.f64") - 8);
    EXPECT_THROW(load_dataset(dir / "set.manifest"), LoadError);
}

TEST(Manifest, MissingFileRejected) { EXPECT_THROW(load_dataset("/nonexistent/set.manifest"), LoadError); }

TEST(Image, RoundTrip) {
    const fs::path dir = scratch_dir("image");
    Tensor t(Shape{3, 4, 5});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) / 59.0;
    save_image(dir / "p.img", t);
    EXPECT_EQ(load_image(dir / "p.img"), t);
}

TEST(Idx, PublishedMagicConstants) {
    EXPECT_EQ(kIdxImageMagic, 2051u);
    EXPECT_EQ(kIdxLabelMagic, 2049u);
}

TEST(Idx, LoadsSyntheticFile) {
    const fs::path dir = scratch_dir("idx");
    write_idx(dir / "img", dir / "lbl", 12, 3, 4, 12);
    const auto ds = load_idx(dir / "img", dir / "lbl", Split::test);
    ASSERT_EQ(ds.size(), 12u);
    EXPECT_EQ(ds.shape, (Shape{1, 3, 4}));
    EXPECT_EQ(ds.split, Split::test);
    EXPECT_EQ(ds.samples[11].label, 1u);
    EXPECT_DOUBLE_EQ(ds.samples[2].image[5], 7.0 / 255.0);
}

TEST(Idx, Pixel255MapsToOne) {
    const fs::path dir = scratch_dir("idx255");
    write_idx(dir / "img", dir / "lbl", 1, 16, 16, 1);
    const auto ds = load_idx(dir / "img", dir / "lbl");
    EXPECT_DOUBLE_EQ(ds.samples[0].image[255], 1.0);
    EXPECT_DOUBLE_EQ(ds.samples[0].image[0], 0.0);
}

TEST(Idx, CountMismatchNamesFiles) {
    const fs::path dir = scratch_dir("idxmismatch");
    write_idx(dir / "img", dir / "lbl", 5, 2, 2, 4);
    try {
        load_idx(dir / "img", dir / "lbl");
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        EXPECT_NE(std::string(e.what()).find("lbl"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("img"), std::string::npos);
    }
}

TEST(Idx, BadMagicRejected) {
    const fs::path dir = scratch_dir("idxmagic");
    write_idx(dir / "img", dir / "lbl", 2, 2, 2, 2, 0x00000801);
    EXPECT_THROW(load_idx(dir / "img", dir / "lbl"), LoadError);
}

TEST(Idx, BundledMnistSubset) {
    const fs::path root = fs::path(MECA_TEST_DATA_DIR) / "mnist-5k";
    if (!fs::exists(root / "train-images-idx3-ubyte")) GTEST_SKIP() << "MNIST subset not present";
    const auto train = load_idx(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte");
    const auto test = load_idx(root / "test-images-idx3-ubyte", root / "test-labels-idx1-ubyte", Split::test);
    EXPECT_EQ(train.shape, (Shape{1, 28, 28}));
    EXPECT_EQ(train.size(), 4000u);
    EXPECT_EQ(test.size(), 1000u);
    EXPECT_EQ(train.class_counts(), std::vector<std::size_t>(10, 400));
    EXPECT_NO_THROW(validate(train));
}

TEST(Cifar, PublishedRecordConstants) {
    EXPECT_EQ(kCifarRecordBytes, 1u + 3u * 32u * 32u);
    EXPECT_EQ(kCifarRecordsPerBatch * 5, 50000u);
}

TEST(Cifar, LabelByteAndPixels) {
    const fs::path dir = scratch_dir("cifar");
    write_cifar(dir / "test_batch.bin", 12);
    const auto ds = load_cifar_bin(dir, Split::test);
    ASSERT_EQ(ds.size(), 12u);
    EXPECT_EQ(ds.shape, (Shape{3, 32, 32}));
    EXPECT_EQ(ds.samples[9].label, 9u);
    EXPECT_DOUBLE_EQ(ds.samples[1].image[1], 2.0 / 255.0);
}

TEST(Cifar, TrainSplitConcatenatesFiveBatches) {
    const fs::path dir = scratch_dir("cifar_train");
    for (int b = 1; b <= 5; ++b) write_cifar(dir / ("data_batch_" + std::to_string(b) + ".bin"), 3, b);
    const auto ds = load_cifar_bin(dir);
    ASSERT_EQ(ds.size(), 15u);
    EXPECT_EQ(ds.samples[0].label, 1u);
    EXPECT_EQ(ds.samples[3].label, 2u);
    EXPECT_EQ(ds.samples[14].label, 7u);
}

TEST(Cifar, LimitKeepsFileOrder) {
    const fs::path dir = scratch_dir("cifar_limit");
    for (int b = 1; b <= 5; ++b) write_cifar(dir / ("data_batch_" + std::to_string(b) + ".bin"), 3, b);
    const auto all = load_cifar_bin(dir);
    const auto some = load_cifar_bin(dir, Split::train, 7);
    ASSERT_EQ(some.size(), 7u);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(some.samples[i], all.samples[i]);
}

TEST(Cifar, RaggedFileRejected) {
    const fs::path dir = scratch_dir("cifar_ragged");
    write_cifar(dir / "test_batch.bin", 2);
    fs::resize_file(dir / "test_batch.bin", kCifarRecordBytes * 2 - 1);
    EXPECT_THROW(load_cifar_bin(dir, Split::test), LoadError);
}

TEST(Cifar, MissingBatchRejected) {
    const fs::path dir = scratch_dir("cifar_missing");
    EXPECT_THROW(load_cifar_bin(dir), LoadError);
}
