#include "meca/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>

#include "meca/binary_io.hpp"
#include "meca/errors.hpp"
#include "meca/rng.hpp"

namespace meca::data {

using nlohmann::json;

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::clean: return "clean";
        case Provenance::poison_payload: return "poison_payload";
        case Provenance::poison_cover: return "poison_cover";
    }
    return "?";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "clean") return Provenance::clean;
    if (s == "poison_payload") return Provenance::poison_payload;
    if (s == "poison_cover") return Provenance::poison_cover;
    throw LoadError("unknown provenance '" + s + "'");
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

std::vector<std::size_t> LabeledDataset::class_counts() const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (const auto& s : samples) counts.at(s.label)++;
    return counts;
}

void validate(const LabeledDataset& ds) {
    if (ds.num_classes < 2) throw ConfigError("dataset needs at least 2 classes");
    const auto dims = ds.shape.dims();
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        const std::string where = "sample " + std::to_string(i) + ": ";
        if (s.image.dims() != dims) throw ConfigError(where + "image dims " + dims_str(s.image.dims()) +
                                                      " differ from dataset shape " + ds.shape.str());
        if (s.label >= ds.num_classes || s.original_label >= ds.num_classes) {
            throw ConfigError(where + "label out of range");
        }
        if (s.provenance == Provenance::clean && s.label != s.original_label) {
            throw ConfigError(where + "clean sample with a changed label");
        }
        for (double v : s.image.values()) {
            if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(where + "pixel outside [0, 1]");
        }
    }
}

SampleSet untrusted_view(const LabeledDataset& ds) {
    SampleSet set{ds.shape, ds.num_classes, {}};
    set.samples.reserve(ds.size());
    for (const auto& s : ds.samples) set.samples.push_back({s.image, s.label});
    return set;
}

LabeledDataset gen_synthetic(std::size_t num_classes, std::size_t per_class, const Shape& shape,
                             std::uint64_t seed) {
    if (num_classes < 2) throw ConfigError("gen_synthetic needs at least 2 classes");
    if (shape.size() == 0) throw ConfigError("gen_synthetic needs a non-empty shape");
    Rng rng(seed);
    LabeledDataset ds{{}, num_classes, shape, Split::train};
    ds.samples.reserve(num_classes * per_class);
    const double side = static_cast<double>(std::min(shape.height, shape.width));
    const double radius = 0.28 * side;
    const double sigma = 0.12 * side;
    const double cy = (static_cast<double>(shape.height) - 1.0) / 2.0;
    const double cx = (static_cast<double>(shape.width) - 1.0) / 2.0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(num_classes);
        const double ky = cy + radius * std::sin(angle);
        const double kx = cx + radius * std::cos(angle);
        for (std::size_t n = 0; n < per_class; ++n) {
            const double by = ky + rng.normal(0.0, 0.3);
            const double bx = kx + rng.normal(0.0, 0.3);
            const double amp = rng.uniform(0.7, 0.9);
            Tensor img(shape);
            for (std::size_t c = 0; c < shape.channels; ++c) {
                for (std::size_t i = 0; i < shape.height; ++i) {
                    for (std::size_t j = 0; j < shape.width; ++j) {
                        const double dy = static_cast<double>(i) - by;
                        const double dx = static_cast<double>(j) - bx;
                        const double blob = amp * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
                        img.at(c, i, j) = std::clamp(0.1 + blob + rng.normal(0.0, 0.05), 0.0, 1.0);
                    }
                }
            }
            ds.samples.push_back({std::move(img), k, Provenance::clean, k});
        }
    }
    return ds;
}

LabeledDataset subsample(const LabeledDataset& ds, std::size_t per_class, std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class.at(ds.samples[i].label).push_back(i);
    Rng rng(seed);
    std::vector<std::size_t> picked;
    picked.reserve(per_class * ds.num_classes);
    for (std::size_t k = 0; k < ds.num_classes; ++k) {
        auto& pool = by_class[k];
        if (pool.size() < per_class) {
            throw ConfigError("subsample: class " + std::to_string(k) + " has " + std::to_string(pool.size()) +
                              " samples, " + std::to_string(per_class) + " requested");
        }
        rng.shuffle(pool);
        picked.insert(picked.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(per_class));
    }
    rng.shuffle(picked);
    LabeledDataset out{{}, ds.num_classes, ds.shape, ds.split};
    out.samples.reserve(picked.size());
    for (std::size_t i : picked) out.samples.push_back(ds.samples[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::filesystem::path raw_path_for(const std::filesystem::path& manifest) {
    auto raw = manifest;
    raw.replace_extension(".f64");
    return raw;
}

}  // namespace

void save_dataset(const std::filesystem::path& manifest, const LabeledDataset& ds) {
    const auto raw = raw_path_for(manifest);
    json j;
    j["format"] = "meca-dataset";
    j["version"] = 1;
    j["shape"] = ds.shape.dims();
    j["num_classes"] = ds.num_classes;
    j["count"] = ds.size();
    j["split"] = to_string(ds.split);
    j["raw"] = raw.filename().string();
    json labels = json::array(), originals = json::array(), provenance = json::array();
    for (const auto& s : ds.samples) {
        labels.push_back(s.label);
        originals.push_back(s.original_label);
        provenance.push_back(to_string(s.provenance));
    }
    j["labels"] = std::move(labels);
    j["original_labels"] = std::move(originals);
    j["provenance"] = std::move(provenance);

    std::ofstream raw_os(raw, std::ios::binary | std::ios::trunc);
    if (!raw_os) throw RuntimeFailure("cannot write " + raw.string());
    for (const auto& s : ds.samples) io::write_f64_array(raw_os, s.image.values());
    if (!raw_os) throw RuntimeFailure("failed writing " + raw.string());

    std::ofstream os(manifest, std::ios::trunc);
    if (!os) throw RuntimeFailure("cannot write " + manifest.string());
    os << j.dump(1) << "\n";
}

LabeledDataset load_dataset(const std::filesystem::path& manifest) {
    std::ifstream is(manifest);
    if (!is) throw LoadError("cannot open dataset manifest " + manifest.string());
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw LoadError(manifest.string() + ": " + e.what());
    }
    try {
        if (j.at("format") != "meca-dataset") throw LoadError(manifest.string() + ": not a dataset manifest");
        const auto dims = j.at("shape").get<std::vector<std::size_t>>();
        if (dims.size() != 3) throw LoadError(manifest.string() + ": shape must have 3 entries");
        LabeledDataset ds;
        ds.shape = {dims[0], dims[1], dims[2]};
        ds.num_classes = j.at("num_classes").get<std::size_t>();
        ds.split = j.at("split") == "test" ? Split::test : Split::train;
        const auto count = j.at("count").get<std::size_t>();
        const auto labels = j.at("labels").get<std::vector<std::size_t>>();
        const auto originals = j.at("original_labels").get<std::vector<std::size_t>>();
        const auto provenance = j.at("provenance").get<std::vector<std::string>>();
        if (labels.size() != count || originals.size() != count || provenance.size() != count) {
            throw LoadError(manifest.string() + ": per-sample arrays disagree with count");
        }
        const auto raw = manifest.parent_path() / j.at("raw").get<std::string>();
        std::ifstream raw_is(raw, std::ios::binary);
        if (!raw_is) throw LoadError("cannot open " + raw.string());
        ds.samples.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            Tensor img(ds.shape);
            if (!io::read_f64_array(raw_is, img.values())) throw LoadError(raw.string() + ": truncated");
            ds.samples.push_back({std::move(img), labels[i], provenance_from_string(provenance[i]), originals[i]});
        }
        if (raw_is.peek() != std::char_traits<char>::eof()) throw LoadError(raw.string() + ": trailing bytes");
        return ds;
    } catch (const json::exception& e) {
        throw LoadError(manifest.string() + ": " + e.what());
    }
}

namespace {
constexpr char kImageMagic[8] = {'M', 'E', 'C', 'A', 'I', 'M', 'G', '1'};
}

void save_image(const std::filesystem::path& path, const Tensor& image) {
    if (image.rank() != 3) throw ConfigError("save_image expects a (C, H, W) tensor");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw RuntimeFailure("cannot write " + path.string());
    os.write(kImageMagic, 8);
    for (std::size_t d : image.dims()) io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    io::write_f64_array(os, image.values());
}

Tensor load_image(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot open image " + path.string());
    char magic[8];
    if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kImageMagic)) {
        throw LoadError(path.string() + ": bad image magic");
    }
    std::vector<std::size_t> dims(3);
    for (auto& d : dims) {
        std::uint32_t v = 0;
        if (!io::read_le(is, v)) throw LoadError(path.string() + ": truncated header");
        d = v;
    }
    Tensor img(dims);
    if (!io::read_f64_array(is, img.values())) throw LoadError(path.string() + ": truncated data");
    return img;
}

}  // namespace meca::data
