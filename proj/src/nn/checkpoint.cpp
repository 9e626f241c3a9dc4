#include "meca/checkpoint.hpp"

#include <fstream>
#include <limits>

#include "meca/binary_io.hpp"
#include "meca/errors.hpp"

namespace meca::nn {

namespace {
constexpr char kMagic[4] = {'M', 'E', 'C', 'A'};
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
    if (params.names.size() != params.values.size()) throw ConfigError("parameter names and values differ in count");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw RuntimeFailure("cannot write checkpoint " + path.string());
    os.write(kMagic, 4);
    io::write_le<std::uint32_t>(os, kCheckpointVersion);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.values.size()));
    for (std::size_t t = 0; t < params.values.size(); ++t) {
        const std::string& name = params.names[t];
        const Tensor& tensor = params.values[t];
        if (name.size() > std::numeric_limits<std::uint16_t>::max()) throw ConfigError("tensor name too long");
        if (tensor.rank() > std::numeric_limits<std::uint8_t>::max()) throw ConfigError("tensor rank too large");
        io::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        io::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(tensor.rank()));
        for (std::size_t d : tensor.dims()) io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
        io::write_f64_array(os, tensor.values());
    }
    if (!os) throw RuntimeFailure("failed writing checkpoint " + path.string());
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw LoadError("cannot open checkpoint " + path.string());
    auto bad = [&](const std::string& why) { return LoadError(path.string() + ": " + why); };
    char magic[4];
    if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw bad("bad magic");
    std::uint32_t version = 0, count = 0;
    if (!io::read_le(is, version) || !io::read_le(is, count)) throw bad("truncated header");
    if (version != kCheckpointVersion) throw bad("unsupported version " + std::to_string(version));
    ParamSet ps;
    for (std::uint32_t t = 0; t < count; ++t) {
        std::uint16_t name_len = 0;
        if (!io::read_le(is, name_len)) throw bad("truncated tensor header");
        std::string name(name_len, '\0');
        std::uint8_t rank = 0;
        if (!is.read(name.data(), name_len) || !io::read_le(is, rank)) throw bad("truncated tensor header");
        std::vector<std::size_t> dims(rank);
        for (auto& d : dims) {
            std::uint32_t v = 0;
            if (!io::read_le(is, v)) throw bad("truncated dims");
            d = v;
        }
        Tensor tensor(dims);
        if (!io::read_f64_array(is, tensor.values())) throw bad("truncated data for " + name);
        ps.names.push_back(std::move(name));
        ps.values.push_back(std::move(tensor));
    }
    if (is.peek() != std::char_traits<char>::eof()) throw bad("trailing bytes");
    return ps;
}

}  // namespace meca::nn
