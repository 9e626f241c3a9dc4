#include "meca/binary_io.hpp"

#include <vector>

namespace meca::io {

void write_f64_array(std::ostream& os, std::span<const double> values) {
    if constexpr (std::endian::native == std::endian::little) {
        os.write(reinterpret_cast<const char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(double)));
    } else {
        for (double v : values) write_le(os, v);
    }
}

bool read_f64_array(std::istream& is, std::span<double> values) {
    if constexpr (std::endian::native == std::endian::little) {
        return static_cast<bool>(is.read(reinterpret_cast<char*>(values.data()),
                                         static_cast<std::streamsize>(values.size() * sizeof(double))));
    } else {
        for (double& v : values)
            if (!read_le(is, v)) return false;
        return true;
    }
}

}  // namespace meca::io
