#pragma once

#include <string>

#include "feexd/tensor.hpp"

namespace feexd {

/// Writes <prefix>.json (manifest: version "feexd-ckpt-1", tensor names and
/// shapes in order) and <prefix>.bin (the tensors' float64 data, little
/// endian, concatenated in manifest order).
void save_params(const std::string &prefix, const ParamSet &ps);

/// Inverse of save_params; validates version, shapes, and blob length.
ParamSet load_params(const std::string &prefix);

}  // namespace feexd
