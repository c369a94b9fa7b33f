#pragma once

#include "sparsect/geometry.hpp"

namespace sparsect {

struct WlsTvOptions {
    double lambda = 0.0;     // total-variation weight
    int iters = 250;
    double step = 0.0;       // 0 -> 1/||A||^2 via power iteration
    bool backtracking = true;
    double tv_epsilon = 1e-6;
};

struct WlsTvResult {
    Image x;
    std::vector<double> objective;  // per accepted iterate
};

/// Gradient descent on 0.5*||Ax - y||^2 + lambda * TV_eps(x) from a zero
/// start. With backtracking the objective is non-increasing; without it,
/// ten consecutive objective increases abort with a diagnostic.
WlsTvResult wls_tv_reconstruct(const Sinogram& y, const Geometry& g, const WlsTvOptions& opt);

/// Isotropic epsilon-smoothed total variation (forward differences,
/// Neumann boundary).
double smoothed_tv(const Image& x, double eps);

/// Largest singular value estimate of the projector via power iteration.
double projector_norm_estimate(const Geometry& g, int iters = 30);

}  // namespace sparsect
