#pragma once

#include <string>
#include <vector>

#include "sparsect/geometry.hpp"

namespace sparsect {

enum class FilterKind { ramlak, cosine, shepp_logan, learned };

std::string to_string(FilterKind k);
FilterKind filter_kind_from_string(const std::string& s);

/// Frequency-domain FBP filter stored over the nonnegative bins of a real
/// FFT of length pad_len (pad_len/2 + 1 weights). Storing only the
/// non-redundant half enforces a real, even spectrum by construction.
struct SpectralFilter {
    int pad_len = 0;  // power of two, >= n_detectors of the filtered sinogram
    FilterKind kind = FilterKind::ramlak;
    std::vector<double> weights;  // pad_len/2 + 1

    int n_bins() const { return pad_len / 2 + 1; }
};

/// Classical filters, all sharing the discrete ramp normalization
/// weight[f] = f/pad_len (DC exactly 0, Nyquist bin 0.5):
///   ramlak       ramp
///   cosine       ramp * cos(pi*f / (2*f_nyquist))
///   shepp_logan  ramp * sinc(f / (2*f_nyquist))
SpectralFilter make_filter(FilterKind kind, int pad_len);

/// Per-row frequency-domain filtering: zero-pad each row to pad_len, real
/// FFT, multiply bins by the filter weights, inverse FFT, truncate back to
/// n_detectors. Linear in both the sinogram and the weights.
Sinogram apply_filter(const Sinogram& y, const SpectralFilter& w);

/// Raw-buffer core of apply_filter, reused by the trainable filter layer.
/// rows/out may alias. weights has pad_len/2+1 entries.
void filter_rows(const double* rows, int n_rows, int n_det, const double* weights,
                 int pad_len, double* out);

/// Backprojection-side normalization so that filtered backprojection
/// reproduces the value scale of the object. Derived from the continuous
/// inversion formula discretized on this grid; kFbpGain absorbs the
/// residual discretization factor (calibrated on a constant disk, see
/// fbp.cpp).
double fbp_scale(const Geometry& g);

/// x = scale * back_project(apply_filter(y, w))
Image fbp_reconstruct(const Sinogram& y, const Geometry& g, const SpectralFilter& w);

/// Default padded length for a detector row: smallest power of two >= 2*n.
int default_pad_len(int n_detectors);

}  // namespace sparsect
