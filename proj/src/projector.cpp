#include "sparsect/projector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sparsect {

namespace {

struct GridBox {
    double x0, y0;  // low corner
    double h;
    int rows, cols;
};

// Walks the ray P(t) = origin + t*dir through the pixel grid and emits raw
// segments in traversal order. dir is unit length so segment lengths are
// parametric differences.
void walk_ray(const GridBox& gb, double ox, double oy, double dx, double dy,
              std::vector<RaySegment>& raw) {
    const double x_lo = gb.x0, x_hi = gb.x0 + gb.cols * gb.h;
    const double y_lo = gb.y0, y_hi = gb.y0 + gb.rows * gb.h;

    double t_min = -std::numeric_limits<double>::infinity();
    double t_max = std::numeric_limits<double>::infinity();

    if (dx != 0.0) {
        double t1 = (x_lo - ox) / dx, t2 = (x_hi - ox) / dx;
        t_min = std::max(t_min, std::min(t1, t2));
        t_max = std::min(t_max, std::max(t1, t2));
    } else if (ox < x_lo || ox >= x_hi) {
        return;  // parallel to x planes and outside (half-open cells)
    }
    if (dy != 0.0) {
        double t1 = (y_lo - oy) / dy, t2 = (y_hi - oy) / dy;
        t_min = std::max(t_min, std::min(t1, t2));
        t_max = std::min(t_max, std::max(t1, t2));
    } else if (oy < y_lo || oy >= y_hi) {
        return;
    }
    if (!(t_min < t_max)) return;

    // next crossing time per axis
    auto next_cross = [&](double o, double d, double lo) {
        if (d == 0.0) return std::numeric_limits<double>::infinity();
        double p = o + t_min * d;
        double cell = std::floor((p - lo) / gb.h);
        double boundary = d > 0.0 ? lo + (cell + 1.0) * gb.h : lo + cell * gb.h;
        return (boundary - o) / d;
    };
    double tx = next_cross(ox, dx, x_lo);
    double ty = next_cross(oy, dy, y_lo);
    const double step_x = dx != 0.0 ? gb.h / std::abs(dx) : std::numeric_limits<double>::infinity();
    const double step_y = dy != 0.0 ? gb.h / std::abs(dy) : std::numeric_limits<double>::infinity();
    if (tx <= t_min) tx += step_x;
    if (ty <= t_min) ty += step_y;

    double t_prev = t_min;
    while (t_prev < t_max) {
        double t_cur = std::min(std::min(tx, ty), t_max);
        double len = t_cur - t_prev;
        if (len > 0.0) {
            double mx = ox + 0.5 * (t_prev + t_cur) * dx;
            double my = oy + 0.5 * (t_prev + t_cur) * dy;
            int c = static_cast<int>(std::floor((mx - x_lo) / gb.h));
            int r_from_bottom = static_cast<int>(std::floor((my - y_lo) / gb.h));
            int r = gb.rows - 1 - r_from_bottom;  // row 0 is the top of the grid
            if (c >= 0 && c < gb.cols && r >= 0 && r < gb.rows)
                raw.push_back({r * gb.cols + c, len});
        }
        t_prev = t_cur;
        if (tx <= ty) tx += step_x; else ty += step_y;
    }
}

GridBox grid_box(const Geometry& g) {
    GridBox gb;
    gb.h = g.pixel_spacing;
    gb.rows = g.rows;
    gb.cols = g.cols;
    gb.x0 = -0.5 * g.cols * gb.h;
    gb.y0 = -0.5 * g.rows * gb.h;
    return gb;
}

// Cached sparse system matrix, stored both per ray (CSR) and per pixel
// (CSC) so forward and adjoint are gathers with fixed accumulation order.
struct SystemMatrix {
    int n_rays, n_pixels;
    std::vector<int64_t> row_ptr;   // n_rays+1
    std::vector<int> col_idx;       // ascending within each row
    std::vector<double> val;
    std::vector<int64_t> pix_ptr;   // n_pixels+1
    std::vector<int> ray_idx;       // ascending within each pixel
    std::vector<double> pix_val;

    explicit SystemMatrix(const Geometry& g)
        : n_rays(g.n_rays()), n_pixels(g.n_pixels()) {
        const GridBox gb = grid_box(g);
        row_ptr.assign(n_rays + 1, 0);
        std::vector<std::vector<RaySegment>> rows(n_rays);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int r = 0; r < n_rays; ++r) {
            int i = r / g.n_detectors, d = r % g.n_detectors;
            double theta = g.angle(i), s = g.detector_coord(d);
            double ox = s * std::cos(theta), oy = s * std::sin(theta);
            double dx = -std::sin(theta), dy = std::cos(theta);
            std::vector<RaySegment> raw;
            walk_ray(gb, ox, oy, dx, dy, raw);
            std::stable_sort(raw.begin(), raw.end(),
                             [](const RaySegment& a, const RaySegment& b) { return a.pixel < b.pixel; });
            auto& merged = rows[r];
            for (const auto& seg : raw) {
                if (!merged.empty() && merged.back().pixel == seg.pixel)
                    merged.back().length += seg.length;
                else
                    merged.push_back(seg);
            }
        }
        for (int r = 0; r < n_rays; ++r) row_ptr[r + 1] = row_ptr[r] + static_cast<int64_t>(rows[r].size());
        col_idx.resize(row_ptr[n_rays]);
        val.resize(row_ptr[n_rays]);
        for (int r = 0; r < n_rays; ++r) {
            int64_t o = row_ptr[r];
            for (size_t j = 0; j < rows[r].size(); ++j) {
                col_idx[o + j] = rows[r][j].pixel;
                val[o + j] = rows[r][j].length;
            }
        }
        // transpose; ray indices come out ascending per pixel because rows
        // are consumed in ascending ray order
        pix_ptr.assign(n_pixels + 1, 0);
        for (int64_t j = 0; j < row_ptr[n_rays]; ++j) pix_ptr[col_idx[j] + 1]++;
        for (int p = 0; p < n_pixels; ++p) pix_ptr[p + 1] += pix_ptr[p];
        ray_idx.resize(row_ptr[n_rays]);
        pix_val.resize(row_ptr[n_rays]);
        std::vector<int64_t> fill(pix_ptr.begin(), pix_ptr.end() - 1);
        for (int r = 0; r < n_rays; ++r) {
            for (int64_t j = row_ptr[r]; j < row_ptr[r + 1]; ++j) {
                int64_t k = fill[col_idx[j]]++;
                ray_idx[k] = r;
                pix_val[k] = val[j];
            }
        }
    }
};

using GeometryKey = std::tuple<int, int, int, int, double, double, double>;

GeometryKey key_of(const Geometry& g) {
    return {g.n_angles, g.n_detectors, g.rows, g.cols,
            g.angular_span, g.detector_spacing, g.pixel_spacing};
}

const SystemMatrix& cached_matrix(const Geometry& g) {
    static std::mutex mu;
    static std::map<GeometryKey, std::unique_ptr<SystemMatrix>> cache;
    std::scoped_lock lock(mu);
    auto& slot = cache[key_of(g)];
    if (!slot) slot = std::make_unique<SystemMatrix>(g);
    return *slot;
}

}  // namespace

void siddon_trace(const Geometry& g, double theta, double s,
                  std::vector<RaySegment>& out) {
    out.clear();
    const GridBox gb = grid_box(g);
    double ox = s * std::cos(theta), oy = s * std::sin(theta);
    double dx = -std::sin(theta), dy = std::cos(theta);
    std::vector<RaySegment> raw;
    walk_ray(gb, ox, oy, dx, dy, raw);
    std::stable_sort(raw.begin(), raw.end(),
                     [](const RaySegment& a, const RaySegment& b) { return a.pixel < b.pixel; });
    for (const auto& seg : raw) {
        if (!out.empty() && out.back().pixel == seg.pixel)
            out.back().length += seg.length;
        else
            out.push_back(seg);
    }
}

Sinogram forward_project(const Image& x, const Geometry& g) {
    check_image_matches(x, g);
    const SystemMatrix& A = cached_matrix(g);
    Sinogram y(g.n_angles, g.n_detectors);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int r = 0; r < A.n_rays; ++r) {
        double acc = 0.0;
        for (int64_t j = A.row_ptr[r]; j < A.row_ptr[r + 1]; ++j)
            acc += A.val[j] * x.data[A.col_idx[j]];
        y.data[r] = acc;
    }
    return y;
}

Image back_project(const Sinogram& y, const Geometry& g) {
    check_sinogram_matches(y, g);
    const SystemMatrix& A = cached_matrix(g);
    Image img(g.rows, g.cols, g.pixel_spacing);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int p = 0; p < A.n_pixels; ++p) {
        double acc = 0.0;
        for (int64_t j = A.pix_ptr[p]; j < A.pix_ptr[p + 1]; ++j)
            acc += A.pix_val[j] * y.data[A.ray_idx[j]];
        img.data[p] = acc;
    }
    return img;
}

DenseSystemMatrix dense_system_matrix(const Geometry& g) {
    const int64_t n_entries = static_cast<int64_t>(g.n_rays()) * g.n_pixels();
    if (n_entries > (int64_t{1} << 24))
        throw std::invalid_argument("dense system matrix would have " + std::to_string(n_entries) +
                                    " entries, over the 2^24 guard");
    const SystemMatrix& A = cached_matrix(g);
    DenseSystemMatrix m;
    m.n_rays = A.n_rays;
    m.n_pixels = A.n_pixels;
    m.entries.assign(static_cast<size_t>(n_entries), 0.0);
    for (int r = 0; r < A.n_rays; ++r)
        for (int64_t j = A.row_ptr[r]; j < A.row_ptr[r + 1]; ++j)
            m.entries[static_cast<size_t>(r) * A.n_pixels + A.col_idx[j]] = A.val[j];
    return m;
}

}  // namespace sparsect
