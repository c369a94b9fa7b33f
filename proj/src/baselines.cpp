#include "sparsect/baselines.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sparsect/projector.hpp"
#include "sparsect/rng.hpp"

namespace sparsect {

double smoothed_tv(const Image& x, double eps) {
    double tv = 0.0;
    for (int r = 0; r < x.rows; ++r)
        for (int c = 0; c < x.cols; ++c) {
            const double gx = c + 1 < x.cols ? x.at(r, c + 1) - x.at(r, c) : 0.0;
            const double gy = r + 1 < x.rows ? x.at(r + 1, c) - x.at(r, c) : 0.0;
            tv += std::sqrt(gx * gx + gy * gy + eps * eps);
        }
    return tv;
}

namespace {

void add_tv_gradient(const Image& x, double eps, double lambda, Image& grad) {
    const int rows = x.rows, cols = x.cols;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double gx = c + 1 < cols ? x.at(r, c + 1) - x.at(r, c) : 0.0;
            const double gy = r + 1 < rows ? x.at(r + 1, c) - x.at(r, c) : 0.0;
            const double s = std::sqrt(gx * gx + gy * gy + eps * eps);
            grad.at(r, c) += lambda * (-(gx + gy) / s);
            if (c + 1 < cols) grad.at(r, c + 1) += lambda * (gx / s);
            if (r + 1 < rows) grad.at(r + 1, c) += lambda * (gy / s);
        }
}

double data_term(const Sinogram& residual) {
    double s = 0.0;
    for (double v : residual.data) s += v * v;
    return 0.5 * s;
}

}  // namespace

double projector_norm_estimate(const Geometry& g, int iters) {
    Rng rng(20240);
    Image x(g.rows, g.cols, g.pixel_spacing);
    for (double& v : x.data) v = rng.uniform();
    double norm = 0.0;
    for (int it = 0; it < iters; ++it) {
        Image next = back_project(forward_project(x, g), g);
        norm = 0.0;
        for (double v : next.data) norm += v * v;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 1.0;
        for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = next.data[i] / norm;
    }
    return std::sqrt(norm);  // ||A|| = sqrt(largest eigenvalue of A^T A)
}

WlsTvResult wls_tv_reconstruct(const Sinogram& y, const Geometry& g, const WlsTvOptions& opt) {
    check_sinogram_matches(y, g);
    if (opt.iters < 1) throw std::invalid_argument("wls_tv: iters must be >= 1");
    if (opt.lambda < 0.0) throw std::invalid_argument("wls_tv: lambda must be >= 0");
    if (opt.step < 0.0) throw std::invalid_argument("wls_tv: step must be >= 0");

    // explicit step: fixed trial size; otherwise a Barzilai-Borwein trial
    // step (steepest-descent step on the first iteration), kept monotone by
    // the Armijo backtracking below
    const bool adaptive_step = opt.step == 0.0;
    double step = opt.step;
    Image x_prev(g.rows, g.cols, g.pixel_spacing);
    Image g_prev(g.rows, g.cols, g.pixel_spacing);
    bool have_prev = false;

    auto objective_of = [&](const Image& x, const Sinogram& res) {
        return data_term(res) + (opt.lambda > 0.0 ? opt.lambda * smoothed_tv(x, opt.tv_epsilon) : 0.0);
    };

    WlsTvResult result;
    Image x(g.rows, g.cols, g.pixel_spacing);
    Sinogram residual = forward_project(x, g);  // zero
    for (size_t i = 0; i < residual.data.size(); ++i) residual.data[i] -= y.data[i];
    double obj = objective_of(x, residual);
    result.objective.push_back(obj);

    int consecutive_increases = 0;
    for (int it = 0; it < opt.iters; ++it) {
        Image grad = back_project(residual, g);
        if (opt.lambda > 0.0) add_tv_gradient(x, opt.tv_epsilon, opt.lambda, grad);
        double grad_norm_sq = 0.0;
        for (double v : grad.data) grad_norm_sq += v * v;
        if (grad_norm_sq == 0.0) break;  // stationary point

        if (adaptive_step) {
            double bb = 0.0;
            if (have_prev) {
                double ss = 0.0, sq = 0.0;
                for (size_t i = 0; i < x.data.size(); ++i) {
                    const double s = x.data[i] - x_prev.data[i];
                    ss += s * s;
                    sq += s * (grad.data[i] - g_prev.data[i]);
                }
                if (sq > 0.0) bb = ss / sq;
            }
            if (bb <= 0.0) {
                Sinogram a_grad = forward_project(grad, g);
                double denom = 0.0;
                for (double v : a_grad.data) denom += v * v;
                bb = denom > 0.0 ? grad_norm_sq / denom : 1.0;
            }
            step = bb;
        }
        x_prev = x;
        g_prev = grad;
        have_prev = true;
        double alpha = step;
        Image x_next(g.rows, g.cols, g.pixel_spacing);
        Sinogram res_next(g.n_angles, g.n_detectors);
        double obj_next = 0.0;
        const int max_halvings = 60;
        int h = 0;
        for (; h <= max_halvings; ++h) {
            for (size_t i = 0; i < x.data.size(); ++i) x_next.data[i] = x.data[i] - alpha * grad.data[i];
            res_next = forward_project(x_next, g);
            for (size_t i = 0; i < res_next.data.size(); ++i) res_next.data[i] -= y.data[i];
            obj_next = objective_of(x_next, res_next);
            if (!opt.backtracking) break;
            if (obj_next <= obj - 1e-4 * alpha * grad_norm_sq) break;  // Armijo
            alpha *= 0.5;
        }
        if (opt.backtracking && h > max_halvings)
            break;  // cannot make progress at representable step sizes

        if (obj_next > obj) {
            if (++consecutive_increases >= 10)
                throw std::runtime_error(
                    "wls_tv diverged: objective increased over 10 consecutive iterations "
                    "(iteration " + std::to_string(it) + ", objective " + std::to_string(obj_next) +
                    "); reduce the step size or enable backtracking");
        } else {
            consecutive_increases = 0;
        }
        x = std::move(x_next);
        residual = std::move(res_next);
        obj = obj_next;
        result.objective.push_back(obj);
    }
    result.x = std::move(x);
    return result;
}

}  // namespace sparsect
