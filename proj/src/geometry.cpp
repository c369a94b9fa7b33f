#include "sparsect/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sparsect {

double Geometry::angle(int i) const {
    if (i < 0 || i >= n_angles)
        throw std::out_of_range("angle index " + std::to_string(i) + " out of [0, " +
                                std::to_string(n_angles) + ")");
    // i * (span / n): for power-of-two view ratios the coarse grid angles
    // coincide bit-exactly with the strided fine grid angles.
    return i * (angular_span / n_angles);
}

Geometry make_geometry(int n_angles, int n_detectors, int rows, int cols,
                       double pixel_spacing, double detector_spacing,
                       double angular_span) {
    if (angular_span == 0.0) angular_span = 2.0 * std::numbers::pi;
    if (n_angles < 1) throw std::invalid_argument("n_angles must be >= 1, got " + std::to_string(n_angles));
    if (n_detectors < 1) throw std::invalid_argument("n_detectors must be >= 1, got " + std::to_string(n_detectors));
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("image size must be >= 1x1, got " + std::to_string(rows) + "x" + std::to_string(cols));
    if (!(pixel_spacing > 0.0)) throw std::invalid_argument("pixel_spacing must be > 0");
    if (!(detector_spacing > 0.0)) throw std::invalid_argument("detector_spacing must be > 0");
    if (!(angular_span > 0.0)) throw std::invalid_argument("angular_span must be > 0");

    Geometry g;
    g.n_angles = n_angles;
    g.n_detectors = n_detectors;
    g.rows = rows;
    g.cols = cols;
    g.angular_span = angular_span;
    g.detector_spacing = detector_spacing;
    g.pixel_spacing = pixel_spacing;
    return g;
}

void check_image_matches(const Image& x, const Geometry& g) {
    if (x.rows != g.rows || x.cols != g.cols)
        throw std::invalid_argument("image " + std::to_string(x.rows) + "x" + std::to_string(x.cols) +
                                    " does not match geometry grid " + std::to_string(g.rows) + "x" +
                                    std::to_string(g.cols));
}

void check_sinogram_matches(const Sinogram& y, const Geometry& g) {
    if (y.n_angles != g.n_angles || y.n_detectors != g.n_detectors)
        throw std::invalid_argument("sinogram " + std::to_string(y.n_angles) + "x" +
                                    std::to_string(y.n_detectors) + " does not match geometry " +
                                    std::to_string(g.n_angles) + "x" + std::to_string(g.n_detectors));
}

}  // namespace sparsect
