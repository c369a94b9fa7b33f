#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sparsect/geometry.hpp"
#include "sparsect/wnet.hpp"

namespace sparsect {

/// One additive ellipse of a phantom, on the [-1,1]^2 reference square.
struct PhantomEllipse {
    double intensity;
    double a, b;       // semi-axes
    double x0, y0;     // center
    double phi_deg;    // rotation, counter-clockwise
};

const std::vector<PhantomEllipse>& shepp_logan_ellipses();

Image render_ellipses(const std::vector<PhantomEllipse>& ellipses, int n);

/// Modified Shepp-Logan head phantom, values in [0,1], zero outside the head.
Image shepp_logan(int n);

/// Uniform disk of the given value; radius as a fraction of the half-width.
Image disk_phantom(int n, double radius_frac = 0.8, double value = 1.0);

/// Seed-deterministic random ellipse phantom (3..12 ellipses), clamped to [0,1].
Image random_phantom(uint64_t seed, int n);

/// Exact 90-degree-multiple clockwise rotations: {x, rot90, rot180, rot270}.
std::array<Image, 4> augment_rotations(const Image& x);

struct GeometryTriple {
    Geometry g_k;     // sparse measurement grid
    Geometry g_K;     // dense target grid, C * k angles
    Geometry g_full;  // full-view grid used only for label generation
};

/// Desk-scale default: 64x64 image, 96 detectors, 16 -> 64 views (C = 4),
/// 256-view labels.
GeometryTriple default_geometry_triple();
GeometryTriple scale_geometry_triple(int image_size, int n_detectors, int k_views, int upsample,
                                     int full_views);

struct SampleTensors {
    Sinogram y_k;
    Sinogram y_K;
    Sinogram y_full;  // stored so labels can be regenerated through the CLI
    Image x_full;     // full-view Ram-Lak FBP label
};

SampleTensors synthesize_sample(const Image& x, const GeometryTriple& geo);

struct DatasetSpec {
    int n_train = 200;
    int n_val = 40;
    int n_test = 40;
    GeometryTriple geo = default_geometry_triple();
    uint64_t seed = 1234;
    bool augment = false;  // 4x rotation augmentation of train and val splits
};

/// Writes one tensor file per array plus manifest.csv (id, role, path,
/// crc32) and dataset.cfg describing the geometries. Byte-identical for
/// identical specs.
void generate_dataset(const std::filesystem::path& dir, const DatasetSpec& spec);

struct LoadedDataset {
    GeometryTriple geo;
    TrainDataset train, val, test;  // enhanced sinograms precomputed
};

LoadedDataset load_dataset(const std::filesystem::path& dir, bool precompute_enhanced = true);

}  // namespace sparsect
