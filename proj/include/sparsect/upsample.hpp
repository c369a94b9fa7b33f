#pragma once

#include "sparsect/filter.hpp"
#include "sparsect/geometry.hpp"

namespace sparsect {

/// y_int = A_K * (Ram-Lak FBP of y_k): reconstruct from the sparse views
/// and reproject onto the dense angle grid. g_K must have C*k angles over
/// the same span and share the detector layout and image grid with g_k.
Sinogram geometry_aware_interpolate(const Sinogram& y_k, const Geometry& g_k,
                                    const Geometry& g_K, const SpectralFilter& w);

/// Overwrite every stride-th interpolated row with the measured one:
/// out row i*stride = y_k row i (bit-exact copy), all other rows untouched.
Sinogram consensus(const Sinogram& y_interp, const Sinogram& y_k, int stride);

/// Full preprocessing: consensus(geometry_aware_interpolate(...), y_k, C)
/// with the fixed Ram-Lak filter.
Sinogram enhance(const Sinogram& y_k, const Geometry& g_k, const Geometry& g_K);

/// Validates the k-to-K relationship and returns the stride C = K/k.
int upsample_stride(const Geometry& g_k, const Geometry& g_K);

}  // namespace sparsect
