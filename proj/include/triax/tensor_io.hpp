#pragma once

#include <filesystem>
#include <iosfwd>

#include "triax/tensor.hpp"

namespace triax {

// TNSR layout: "TNSR", u32 rank, rank x u32 extents, row-major f64 values.
// All integers and floats little-endian.

void write_tnsr(std::ostream& os, const Tensor& t);
Tensor read_tnsr(std::istream& is);

void save_tnsr(const std::filesystem::path& path, const Tensor& t);
Tensor load_tnsr(const std::filesystem::path& path);

}  // namespace triax
