#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace sparsect {

/// Parallel-beam acquisition description: uniform angle grid over
/// [0, angular_span), a centered linear detector, and the image grid.
struct Geometry {
    int n_angles = 0;
    int n_detectors = 0;
    int rows = 0;
    int cols = 0;
    double angular_span = 0.0;      // radians, endpoint-exclusive
    double detector_spacing = 0.0;  // length units per detector element
    double pixel_spacing = 0.0;     // length units per pixel

    // angle(i) = i * (angular_span / n_angles)
    double angle(int i) const;

    // detector coordinate of element d, centered on the rotation axis
    double detector_coord(int d) const {
        return (d - 0.5 * (n_detectors - 1)) * detector_spacing;
    }

    int n_rays() const { return n_angles * n_detectors; }
    int n_pixels() const { return rows * cols; }

    bool same_grid(const Geometry& o) const {
        return rows == o.rows && cols == o.cols &&
               n_detectors == o.n_detectors &&
               detector_spacing == o.detector_spacing &&
               pixel_spacing == o.pixel_spacing;
    }

    bool operator==(const Geometry& o) const = default;
};

Geometry make_geometry(int n_angles, int n_detectors, int rows, int cols,
                       double pixel_spacing = 1.0, double detector_spacing = 1.0,
                       double angular_span = 0.0 /* 0 -> full arc 2*pi */);

enum class ValueUnit { normalized, attenuation, display };

/// Dense row-major 2D image with physical pixel spacing.
/// Normalized images are expected in [0,1] but intermediate results are
/// never clamped; only display exports are.
struct Image {
    int rows = 0;
    int cols = 0;
    double pixel_spacing = 1.0;
    ValueUnit unit = ValueUnit::normalized;
    std::vector<double> data;  // rows*cols, row-major

    Image() = default;
    Image(int r, int c, double spacing = 1.0, ValueUnit u = ValueUnit::normalized)
        : rows(r), cols(c), pixel_spacing(spacing), unit(u),
          data(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return data.size(); }
};

/// Dense row-major sinogram: one row per projection angle, one column per
/// detector element. Row i corresponds to angle(i) of the owning geometry.
struct Sinogram {
    int n_angles = 0;
    int n_detectors = 0;
    std::vector<double> data;  // n_angles*n_detectors, row-major

    Sinogram() = default;
    Sinogram(int a, int d)
        : n_angles(a), n_detectors(d),
          data(static_cast<size_t>(a) * d, 0.0) {}

    double& at(int a, int d) { return data[static_cast<size_t>(a) * n_detectors + d]; }
    double at(int a, int d) const { return data[static_cast<size_t>(a) * n_detectors + d]; }
    double* row(int a) { return data.data() + static_cast<size_t>(a) * n_detectors; }
    const double* row(int a) const { return data.data() + static_cast<size_t>(a) * n_detectors; }
    size_t size() const { return data.size(); }
};

void check_image_matches(const Image& x, const Geometry& g);
void check_sinogram_matches(const Sinogram& y, const Geometry& g);

}  // namespace sparsect
