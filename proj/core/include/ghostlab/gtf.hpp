// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "ghostlab/tensor.hpp"

namespace ghostlab {

/// GTF tensor file: one UTF-8 JSON header line
/// {"magic":"GTF1","dtype":"f32","dims":[...]}\n followed by raw
/// little-endian IEEE-754 f32 values, row-major, exactly product(dims).
/// In-memory values are f64; the round trip is lossless at f32 precision.
void save_tensor(const TensorF& t, const std::string& path);
TensorF load_tensor(const std::string& path);

}  // namespace ghostlab
