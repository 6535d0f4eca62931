#include "fblab/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace fblab {

namespace {

void pack_le(double v, unsigned char out[8]) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) out[k] = (unsigned char)((bits >> (8 * k)) & 0xff);
}

double unpack_le(const unsigned char in[8]) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= std::uint64_t(in[k]) << (8 * k);
    return std::bit_cast<double>(bits);
}

}  // namespace

void write_fbf(const ScalarField& u, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("write_fbf: cannot open '" + path + "'");
    const Grid& g = u.grid();
    out << "FBF1 dim=" << g.dim << " n=" << g.n << " hw=" << format_double(g.half_width) << "\n";
    std::vector<unsigned char> buf(u.values().size() * 8);
    for (std::size_t i = 0; i < u.values().size(); ++i) pack_le(u.values()[i], &buf[8 * i]);
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!out) fail("write_fbf: short write to '" + path + "'");
}

ScalarField read_fbf(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("read_fbf: cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header)) fail("read_fbf: missing header in '" + path + "'");
    int dim = 0, n = 0;
    char hwbuf[64] = {0};
    if (std::sscanf(header.c_str(), "FBF1 dim=%d n=%d hw=%63s", &dim, &n, hwbuf) != 3)
        fail("read_fbf: malformed header '" + header + "'");
    double hw = std::strtod(hwbuf, nullptr);
    Grid g(dim, n, hw);
    std::vector<unsigned char> buf(g.total() * 8);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size()));
    if (std::size_t(in.gcount()) != buf.size()) fail("read_fbf: truncated payload in '" + path + "'");
    std::vector<double> values(g.total());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = unpack_le(&buf[8 * i]);
    return ScalarField(g, std::move(values));
}

}  // namespace fblab
