#pragma once

#include <vector>

#include "sparsect/geometry.hpp"

namespace sparsect {

/// One ray-pixel intersection produced by the Siddon walk.
struct RaySegment {
    int pixel;      // row-major pixel index
    double length;  // exact intersection length, >= 0
};

/// Exact intersection lengths of the parallel ray at angle theta and signed
/// detector offset s with every pixel it crosses. Segments are returned in
/// ascending pixel order with duplicates merged, so that every consumer
/// (projection, backprojection, dense matrix) accumulates in the same order.
/// Rays that miss the grid produce an empty list. A ray lying exactly on a
/// pixel edge is assigned to the pixel whose low edge it is (half-open
/// [low, high) cells).
void siddon_trace(const Geometry& g, double theta, double s,
                  std::vector<RaySegment>& out);

Sinogram forward_project(const Image& x, const Geometry& g);
Image back_project(const Sinogram& y, const Geometry& g);

/// Explicit system matrix, one row per ray. Test oracle and small-problem
/// solver backend; guarded against accidental huge materialization.
struct DenseSystemMatrix {
    int n_rays = 0;
    int n_pixels = 0;
    std::vector<double> entries;  // row-major n_rays x n_pixels

    double at(int ray, int pixel) const {
        return entries[static_cast<size_t>(ray) * n_pixels + pixel];
    }
};

DenseSystemMatrix dense_system_matrix(const Geometry& g);

}  // namespace sparsect
