#include "doctest.h"
#include "fblab/field_io.hpp"
#include "fblab/grid.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

using namespace fblab;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& p) : path(p) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

}  // namespace

TEST_CASE("field files round trip bit for bit") {
    Grid g(2, 17, 0.75);
    ScalarField u(g);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (auto& v : u.values()) v = d(rng);
    // values that stress the payload encoding
    u.values()[0] = 0.0;
    u.values()[1] = -0.0;
    u.values()[2] = 1e-300;
    u.values()[3] = 1.7976931348623157e308;
    u.values()[4] = 3.141592653589793;
    u.values()[5] = -4.9406564584124654e-324;

    TempFile f("io_roundtrip.fbf");
    write_fbf(u, f.path);
    ScalarField v = read_fbf(f.path);

    REQUIRE(v.grid().same_geometry(g));
    REQUIRE(v.values().size() == u.values().size());
    for (std::size_t i = 0; i < u.values().size(); ++i) CHECK(bits(v.at(i)) == bits(u.at(i)));
}

TEST_CASE("header carries the grid geometry") {
    Grid g(3, 17, 1.0);
    ScalarField u(g, 0.25);
    TempFile f("io_header.fbf");
    write_fbf(u, f.path);

    std::ifstream in(f.path, std::ios::binary);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("FBF1 dim=3 n=17 hw=1", 0) == 0);
}

TEST_CASE("write then rewrite is byte identical") {
    Grid g(2, 17, 1.0);
    auto u = ScalarField::from_function(g, [](const Vec& x) { return x[0] * x[1] + 0.3; });
    TempFile f1("io_once.fbf"), f2("io_twice.fbf");
    write_fbf(u, f1.path);
    write_fbf(u, f2.path);

    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    std::string a = slurp(f1.path), b = slurp(f2.path);
    CHECK(!a.empty());
    CHECK(a == b);
}

TEST_CASE("reader rejects damaged files") {
    CHECK_THROWS_AS(read_fbf("does_not_exist.fbf"), std::runtime_error);

    TempFile bad("io_bad_magic.fbf");
    {
        std::ofstream out(bad.path, std::ios::binary);
        out << "XYZ1 dim=2 n=17 hw=1\n";
    }
    CHECK_THROWS_AS(read_fbf(bad.path), std::runtime_error);

    Grid g(2, 17, 1.0);
    ScalarField u(g, 1.0);
    TempFile trunc("io_truncated.fbf");
    write_fbf(u, trunc.path);
    {
        std::ifstream in(trunc.path, std::ios::binary);
        std::string all(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>{});
        std::ofstream out(trunc.path, std::ios::binary | std::ios::trunc);
        out.write(all.data(), std::streamsize(all.size() / 2));
    }
    CHECK_THROWS_AS(read_fbf(trunc.path), std::runtime_error);
}
