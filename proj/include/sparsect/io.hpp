#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sparsect/autodiff.hpp"
#include "sparsect/filter.hpp"
#include "sparsect/geometry.hpp"
#include "sparsect/wnet.hpp"

namespace sparsect::io {

// Shared tensor container: "SCTT" | version u8 | dtype u8 (0=f32, 1=f64) |
// rank u8 | dims u64-le | payload le. Trivial to parse from any language.
struct TensorFile {
    std::vector<uint64_t> dims;
    std::vector<double> values;  // widened to f64 on read
    bool was_f32 = false;
};

void write_tensor(const std::filesystem::path& path, const std::vector<uint64_t>& dims,
                  const double* values, bool as_f32 = false);
TensorFile read_tensor(const std::filesystem::path& path);

void write_image(const std::filesystem::path& path, const Image& img);
Image read_image(const std::filesystem::path& path, double pixel_spacing = 1.0);
void write_sinogram(const std::filesystem::path& path, const Sinogram& y);
Sinogram read_sinogram(const std::filesystem::path& path);

// Filter record: pad_len u64-le | kind u8 | weights f64-le (pad_len/2+1).
void write_filter(const std::filesystem::path& path, const SpectralFilter& w);
SpectralFilter read_filter(const std::filesystem::path& path);
/// CSV rows (kind, bin, frequency in cycles/sample, weight).
void write_filter_csv(const std::filesystem::path& path,
                      const std::vector<SpectralFilter>& filters);

// Versioned checkpoint: geometry + configs + every named parameter tensor +
// Adam moments and step counters. Byte-identical for identical runs.
struct Checkpoint {
    Geometry g_k, g_K;
    WNetConfig cfg;
    uint64_t config_hash = 0;
    WNetParams params;          // reconstructed on read
    AdamState adam_sdm, adam_rem, adam_idm;
    std::vector<EpochLog> log;
};

void write_checkpoint(const std::filesystem::path& path, const Geometry& g_k, const Geometry& g_K,
                      const TrainState& st, uint64_t config_hash);
Checkpoint read_checkpoint(const std::filesystem::path& path);

void write_train_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log);

/// 8-bit grayscale PNG; values are expected in [0,1] (clamped on write).
void write_png(const std::filesystem::path& path, const Image& img);

uint32_t crc32_of(const void* data, size_t n);
uint64_t fnv1a64(const std::string& s);

}  // namespace sparsect::io
