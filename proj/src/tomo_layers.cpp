#include <complex>
#include <cstring>
#include <stdexcept>

#include "sparsect/autodiff.hpp"
#include "sparsect/fft.hpp"
#include "sparsect/filter.hpp"
#include "sparsect/projector.hpp"

namespace sparsect::ad {

namespace detail {
void check_node_values(const Node& n);
Var wrap_node(const char* op, Tensor value, std::vector<Var> parents);
}  // namespace detail

Var filter_layer(const Var& y, const Var& w, int pad_len) {
    const Tensor& yv = y->value;
    if (yv.shape.size() != 2) throw std::invalid_argument("filter_layer: expected y(A,M)");
    const int rows = yv.shape[0], n_det = yv.shape[1];
    if (pad_len < n_det) throw std::invalid_argument("filter_layer: pad_len smaller than row length");
    if (w->value.shape != std::vector<int>{pad_len / 2 + 1})
        throw std::invalid_argument("filter_layer: weight count must be pad_len/2+1");

    Tensor out({rows, n_det});
    filter_rows(yv.values.data(), rows, n_det, w->value.values.data(), pad_len,
                out.values.data());
    Var n = detail::wrap_node("filter_layer", std::move(out), {y, w});
    Node* self = n.get();
    n->backprop = [self, rows, n_det, pad_len] {
        Node& yn = *self->parents[0];
        Node& wn = *self->parents[1];
        if (yn.requires_grad) {
            // symmetric operator: same filtering applied to the upstream grad
            yn.ensure_grad();
            std::vector<double> gy(static_cast<size_t>(rows) * n_det);
            filter_rows(self->grad.data(), rows, n_det, wn.value.values.data(), pad_len,
                        gy.data());
            for (size_t i = 0; i < gy.size(); ++i) yn.grad[i] += gy[i];
        }
        if (wn.requires_grad) {
            wn.ensure_grad();
            const RealFft& fft = RealFft::of_size(pad_len);
            const int n_bins = fft.n_bins();
            std::vector<double> padded(pad_len, 0.0);
            std::vector<std::complex<double>> yspec(n_bins), gspec(n_bins);
            const double inv_p = 1.0 / pad_len;
            for (int r = 0; r < rows; ++r) {
                std::memcpy(padded.data(), yn.value.values.data() + static_cast<size_t>(r) * n_det,
                            sizeof(double) * n_det);
                std::fill(padded.begin() + n_det, padded.end(), 0.0);
                fft.forward(padded.data(), yspec.data());
                std::memcpy(padded.data(), self->grad.data() + static_cast<size_t>(r) * n_det,
                            sizeof(double) * n_det);
                std::fill(padded.begin() + n_det, padded.end(), 0.0);
                fft.forward(padded.data(), gspec.data());
                for (int f = 0; f < n_bins; ++f) {
                    const double mult = (f == 0 || f == pad_len / 2) ? 1.0 : 2.0;
                    wn.grad[f] += mult * inv_p *
                                  (yspec[f].real() * gspec[f].real() + yspec[f].imag() * gspec[f].imag());
                }
            }
        }
    };
    return n;
}

Var backproject_layer(const Var& y, const Geometry& g) {
    const Tensor& yv = y->value;
    if (yv.shape != std::vector<int>{g.n_angles, g.n_detectors})
        throw std::invalid_argument("backproject_layer: sinogram shape does not match geometry");
    Sinogram sino(g.n_angles, g.n_detectors);
    sino.data = yv.values;
    Image img = back_project(sino, g);
    Var n = detail::wrap_node("backproject_layer", Tensor({g.rows, g.cols}, std::move(img.data)), {y});
    Node* self = n.get();
    const Geometry geom = g;
    n->backprop = [self, geom] {
        Node& yn = *self->parents[0];
        if (!yn.requires_grad) return;
        yn.ensure_grad();
        Image up(geom.rows, geom.cols, geom.pixel_spacing);
        up.data = self->grad;
        Sinogram gy = forward_project(up, geom);
        for (size_t i = 0; i < gy.data.size(); ++i) yn.grad[i] += gy.data[i];
    };
    return n;
}

Var consensus_rows(const Var& y, const Sinogram& measured, int stride) {
    const Tensor& yv = y->value;
    if (yv.shape.size() != 2) throw std::invalid_argument("consensus_rows: expected y(A,M)");
    if (yv.shape[1] != measured.n_detectors || yv.shape[0] != stride * measured.n_angles)
        throw std::invalid_argument("consensus_rows: stride mismatch between input and measurements");
    Tensor out = yv;
    for (int i = 0; i < measured.n_angles; ++i)
        std::memcpy(out.values.data() + static_cast<size_t>(i) * stride * measured.n_detectors,
                    measured.row(i), sizeof(double) * measured.n_detectors);
    Var n = detail::wrap_node("consensus_rows", std::move(out), {y});
    Node* self = n.get();
    const int n_det = measured.n_detectors, n_meas = measured.n_angles;
    n->backprop = [self, stride, n_det, n_meas] {
        Node& p = *self->parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        std::vector<char> replaced(self->value.shape[0], 0);
        for (int i = 0; i < n_meas; ++i) replaced[i * stride] = 1;
        for (int r = 0; r < self->value.shape[0]; ++r) {
            if (replaced[r]) continue;  // measured rows are constants
            const double* g = self->grad.data() + static_cast<size_t>(r) * n_det;
            double* pg = p.grad.data() + static_cast<size_t>(r) * n_det;
            for (int d = 0; d < n_det; ++d) pg[d] += g[d];
        }
    };
    return n;
}

}  // namespace sparsect::ad
