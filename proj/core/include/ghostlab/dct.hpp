// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ghostlab/tensor.hpp"

namespace ghostlab {

/// Orthonormal type-II 2-D DCT and its inverse (type-III), separable.
/// idct2(dct2(x)) == x to machine precision and both preserve the l2 norm.
TensorF dct2(const TensorF& image);
TensorF idct2(const TensorF& coeffs);

}  // namespace ghostlab
