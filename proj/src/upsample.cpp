#include "sparsect/upsample.hpp"

#include <stdexcept>
#include <string>

#include "sparsect/projector.hpp"

namespace sparsect {

int upsample_stride(const Geometry& g_k, const Geometry& g_K) {
    if (!g_K.same_grid(g_k))
        throw std::invalid_argument("sparse and dense geometries must share detector layout and image grid");
    if (g_K.angular_span != g_k.angular_span)
        throw std::invalid_argument("sparse and dense geometries must share the angular span");
    if (g_K.n_angles % g_k.n_angles != 0)
        throw std::invalid_argument("dense angle count " + std::to_string(g_K.n_angles) +
                                    " is not a multiple of sparse angle count " +
                                    std::to_string(g_k.n_angles));
    return g_K.n_angles / g_k.n_angles;
}

Sinogram geometry_aware_interpolate(const Sinogram& y_k, const Geometry& g_k,
                                    const Geometry& g_K, const SpectralFilter& w) {
    check_sinogram_matches(y_k, g_k);
    upsample_stride(g_k, g_K);
    return forward_project(fbp_reconstruct(y_k, g_k, w), g_K);
}

Sinogram consensus(const Sinogram& y_interp, const Sinogram& y_k, int stride) {
    if (stride < 1) throw std::invalid_argument("consensus stride must be >= 1");
    if (y_interp.n_detectors != y_k.n_detectors)
        throw std::invalid_argument("detector counts differ between interpolated and measured sinograms");
    if (y_interp.n_angles != stride * y_k.n_angles)
        throw std::invalid_argument("interpolated sinogram must have stride * measured angle count rows");
    Sinogram out = y_interp;
    for (int i = 0; i < y_k.n_angles; ++i)
        std::copy(y_k.row(i), y_k.row(i) + y_k.n_detectors, out.row(i * stride));
    return out;
}

Sinogram enhance(const Sinogram& y_k, const Geometry& g_k, const Geometry& g_K) {
    const int stride = upsample_stride(g_k, g_K);
    SpectralFilter ramlak = make_filter(FilterKind::ramlak, default_pad_len(g_k.n_detectors));
    return consensus(geometry_aware_interpolate(y_k, g_k, g_K, ramlak), y_k, stride);
}

}  // namespace sparsect
