#pragma once

#include <string>

#include "fblab/grid.hpp"

namespace fblab {

// FBF1 field file: one ASCII header line
//     FBF1 dim=<d> n=<n> hw=<half_width>
// followed by a newline and n^d little-endian IEEE-754 doubles in row-major
// order (last axis fastest). Round-trips are bit-exact.
void write_fbf(const ScalarField& u, const std::string& path);
ScalarField read_fbf(const std::string& path);

}  // namespace fblab
