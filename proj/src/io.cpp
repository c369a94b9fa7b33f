#include "sparsect/io.hpp"

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sparsect::io {

namespace {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

constexpr char kTensorMagic[4] = {'S', 'C', 'T', 'T'};
constexpr uint8_t kTensorVersion = 1;
constexpr char kCheckpointMagic[4] = {'S', 'C', 'T', 'W'};
constexpr uint8_t kCheckpointVersion = 1;

void write_exact(std::ofstream& f, const void* p, size_t n) {
    f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!f) throw std::runtime_error("write failed");
}

void read_exact(std::ifstream& f, void* p, size_t n) {
    f.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (f.gcount() != static_cast<std::streamsize>(n)) throw std::runtime_error("truncated file");
}

template <typename T>
void put(std::ofstream& f, T v) {
    write_exact(f, &v, sizeof(T));
}

template <typename T>
T get(std::ifstream& f) {
    T v;
    read_exact(f, &v, sizeof(T));
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return f;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    return f;
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const std::vector<uint64_t>& dims,
                  const double* values, bool as_f32) {
    auto f = open_out(path);
    write_exact(f, kTensorMagic, 4);
    put<uint8_t>(f, kTensorVersion);
    put<uint8_t>(f, as_f32 ? 0 : 1);
    put<uint8_t>(f, static_cast<uint8_t>(dims.size()));
    uint64_t n = 1;
    for (uint64_t d : dims) {
        put<uint64_t>(f, d);
        n *= d;
    }
    if (as_f32) {
        std::vector<float> tmp(n);
        for (uint64_t i = 0; i < n; ++i) tmp[i] = static_cast<float>(values[i]);
        write_exact(f, tmp.data(), sizeof(float) * n);
    } else {
        write_exact(f, values, sizeof(double) * n);
    }
}

TensorFile read_tensor(const std::filesystem::path& path) {
    auto f = open_in(path);
    char magic[4];
    read_exact(f, magic, 4);
    if (std::memcmp(magic, kTensorMagic, 4) != 0)
        throw std::runtime_error("'" + path.string() + "' is not a tensor file");
    const uint8_t version = get<uint8_t>(f);
    if (version != kTensorVersion)
        throw std::runtime_error("unsupported tensor file version " + std::to_string(version));
    const uint8_t dtype = get<uint8_t>(f);
    if (dtype > 1) throw std::runtime_error("unknown tensor dtype tag " + std::to_string(dtype));
    const uint8_t rank = get<uint8_t>(f);
    TensorFile t;
    t.was_f32 = dtype == 0;
    uint64_t n = 1;
    for (int i = 0; i < rank; ++i) {
        t.dims.push_back(get<uint64_t>(f));
        n *= t.dims.back();
    }
    t.values.resize(n);
    if (t.was_f32) {
        std::vector<float> tmp(n);
        read_exact(f, tmp.data(), sizeof(float) * n);
        for (uint64_t i = 0; i < n; ++i) t.values[i] = tmp[i];
    } else {
        read_exact(f, t.values.data(), sizeof(double) * n);
    }
    return t;
}

void write_image(const std::filesystem::path& path, const Image& img) {
    write_tensor(path, {static_cast<uint64_t>(img.rows), static_cast<uint64_t>(img.cols)},
                 img.data.data());
}

Image read_image(const std::filesystem::path& path, double pixel_spacing) {
    TensorFile t = read_tensor(path);
    if (t.dims.size() != 2) throw std::runtime_error("'" + path.string() + "' is not a 2D image tensor");
    Image img(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), pixel_spacing);
    img.data = std::move(t.values);
    return img;
}

void write_sinogram(const std::filesystem::path& path, const Sinogram& y) {
    write_tensor(path, {static_cast<uint64_t>(y.n_angles), static_cast<uint64_t>(y.n_detectors)},
                 y.data.data());
}

Sinogram read_sinogram(const std::filesystem::path& path) {
    TensorFile t = read_tensor(path);
    if (t.dims.size() != 2)
        throw std::runtime_error("'" + path.string() + "' is not a 2D sinogram tensor");
    Sinogram y(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]));
    y.data = std::move(t.values);
    return y;
}

void write_filter(const std::filesystem::path& path, const SpectralFilter& w) {
    auto f = open_out(path);
    put<uint64_t>(f, static_cast<uint64_t>(w.pad_len));
    put<uint8_t>(f, static_cast<uint8_t>(w.kind));
    write_exact(f, w.weights.data(), sizeof(double) * w.weights.size());
}

SpectralFilter read_filter(const std::filesystem::path& path) {
    auto f = open_in(path);
    SpectralFilter w;
    w.pad_len = static_cast<int>(get<uint64_t>(f));
    const uint8_t kind = get<uint8_t>(f);
    if (kind > 3) throw std::runtime_error("unknown filter kind tag " + std::to_string(kind));
    w.kind = static_cast<FilterKind>(kind);
    w.weights.resize(w.pad_len / 2 + 1);
    read_exact(f, w.weights.data(), sizeof(double) * w.weights.size());
    return w;
}

void write_filter_csv(const std::filesystem::path& path,
                      const std::vector<SpectralFilter>& filters) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    f << "kind,bin,frequency,weight\n";
    for (const auto& w : filters) {
        for (int bin = 0; bin < w.n_bins(); ++bin) {
            char line[128];
            std::snprintf(line, sizeof(line), "%s,%d,%.17g,%.17g\n", to_string(w.kind).c_str(), bin,
                          static_cast<double>(bin) / w.pad_len, w.weights[bin]);
            f << line;
        }
    }
}

namespace {

void put_string(std::ofstream& f, const std::string& s) {
    put<uint32_t>(f, static_cast<uint32_t>(s.size()));
    write_exact(f, s.data(), s.size());
}

std::string get_string(std::ifstream& f) {
    const uint32_t n = get<uint32_t>(f);
    std::string s(n, '\0');
    read_exact(f, s.data(), n);
    return s;
}

void put_geometry(std::ofstream& f, const Geometry& g) {
    put<int32_t>(f, g.n_angles);
    put<int32_t>(f, g.n_detectors);
    put<int32_t>(f, g.rows);
    put<int32_t>(f, g.cols);
    put<double>(f, g.angular_span);
    put<double>(f, g.detector_spacing);
    put<double>(f, g.pixel_spacing);
}

Geometry get_geometry(std::ifstream& f) {
    Geometry g;
    g.n_angles = get<int32_t>(f);
    g.n_detectors = get<int32_t>(f);
    g.rows = get<int32_t>(f);
    g.cols = get<int32_t>(f);
    g.angular_span = get<double>(f);
    g.detector_spacing = get<double>(f);
    g.pixel_spacing = get<double>(f);
    return g;
}

void put_unet_config(std::ofstream& f, const UNetConfig& c) {
    put<int32_t>(f, c.depth);
    put<int32_t>(f, c.base_channels);
    put<int32_t>(f, c.in_channels);
    put<int32_t>(f, c.out_channels);
    put<uint8_t>(f, c.strided_downsample ? 1 : 0);
    put<uint8_t>(f, c.transposed_upsample ? 1 : 0);
    put<double>(f, c.leaky_slope);
}

UNetConfig get_unet_config(std::ifstream& f) {
    UNetConfig c;
    c.depth = get<int32_t>(f);
    c.base_channels = get<int32_t>(f);
    c.in_channels = get<int32_t>(f);
    c.out_channels = get<int32_t>(f);
    c.strided_downsample = get<uint8_t>(f) != 0;
    c.transposed_upsample = get<uint8_t>(f) != 0;
    c.leaky_slope = get<double>(f);
    return c;
}

void put_named_tensors(std::ofstream& f, const ParamSet& ps) {
    put<uint32_t>(f, static_cast<uint32_t>(ps.vars.size()));
    for (size_t i = 0; i < ps.vars.size(); ++i) {
        put_string(f, ps.names[i]);
        const ad::Tensor& t = ps.vars[i]->value;
        put<uint8_t>(f, static_cast<uint8_t>(t.shape.size()));
        for (int d : t.shape) put<uint64_t>(f, static_cast<uint64_t>(d));
        write_exact(f, t.values.data(), sizeof(double) * t.numel());
    }
}

ParamSet get_named_tensors(std::ifstream& f) {
    ParamSet ps;
    const uint32_t n = get<uint32_t>(f);
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = get_string(f);
        const uint8_t rank = get<uint8_t>(f);
        std::vector<int> shape;
        for (int r = 0; r < rank; ++r) shape.push_back(static_cast<int>(get<uint64_t>(f)));
        ad::Tensor t(shape);
        read_exact(f, t.values.data(), sizeof(double) * t.numel());
        ps.add(std::move(name), ad::param(std::move(t)));
    }
    return ps;
}

void put_adam(std::ofstream& f, const AdamState& a) {
    put<double>(f, a.lr);
    put<double>(f, a.beta1);
    put<double>(f, a.beta2);
    put<double>(f, a.eps);
    put<int64_t>(f, a.step);
    put<uint32_t>(f, static_cast<uint32_t>(a.m.size()));
    for (size_t i = 0; i < a.m.size(); ++i) {
        put<uint64_t>(f, a.m[i].size());
        write_exact(f, a.m[i].data(), sizeof(double) * a.m[i].size());
        write_exact(f, a.v[i].data(), sizeof(double) * a.v[i].size());
    }
}

AdamState get_adam(std::ifstream& f) {
    AdamState a;
    a.lr = get<double>(f);
    a.beta1 = get<double>(f);
    a.beta2 = get<double>(f);
    a.eps = get<double>(f);
    a.step = get<int64_t>(f);
    const uint32_t n = get<uint32_t>(f);
    a.m.resize(n);
    a.v.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        const uint64_t len = get<uint64_t>(f);
        a.m[i].resize(len);
        a.v[i].resize(len);
        read_exact(f, a.m[i].data(), sizeof(double) * len);
        read_exact(f, a.v[i].data(), sizeof(double) * len);
    }
    return a;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Geometry& g_k, const Geometry& g_K,
                      const TrainState& st, uint64_t config_hash) {
    auto f = open_out(path);
    write_exact(f, kCheckpointMagic, 4);
    put<uint8_t>(f, kCheckpointVersion);
    put<uint64_t>(f, config_hash);
    put_geometry(f, g_k);
    put_geometry(f, g_K);
    put_unet_config(f, st.params.cfg.sdm);
    put_unet_config(f, st.params.cfg.idm);
    put<int32_t>(f, st.params.cfg.pad_len);
    put<double>(f, st.params.cfg.huber_delta);
    put_named_tensors(f, st.params.sdm);
    put_named_tensors(f, st.params.idm);
    const ad::Tensor& w = st.params.rem_filter->value;
    put<uint64_t>(f, w.numel());
    write_exact(f, w.values.data(), sizeof(double) * w.numel());
    put_adam(f, st.adam_sdm);
    put_adam(f, st.adam_rem);
    put_adam(f, st.adam_idm);
    put<uint32_t>(f, static_cast<uint32_t>(st.log.size()));
    for (const auto& e : st.log) {
        put_string(f, e.phase);
        put<int32_t>(f, e.epoch);
        put<double>(f, e.mean_loss);
        put<double>(f, 0.0);  // wall time omitted for byte-stable checkpoints
    }
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    auto f = open_in(path);
    char magic[4];
    read_exact(f, magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw std::runtime_error("'" + path.string() + "' is not a checkpoint file");
    const uint8_t version = get<uint8_t>(f);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.config_hash = get<uint64_t>(f);
    c.g_k = get_geometry(f);
    c.g_K = get_geometry(f);
    c.cfg.sdm = get_unet_config(f);
    c.cfg.idm = get_unet_config(f);
    c.cfg.pad_len = get<int32_t>(f);
    c.cfg.huber_delta = get<double>(f);
    c.params.cfg = c.cfg;
    c.params.sdm = get_named_tensors(f);
    c.params.idm = get_named_tensors(f);
    const uint64_t n_w = get<uint64_t>(f);
    ad::Tensor w({static_cast<int>(n_w)});
    read_exact(f, w.values.data(), sizeof(double) * n_w);
    c.params.rem_filter = ad::param(std::move(w));
    c.adam_sdm = get_adam(f);
    c.adam_rem = get_adam(f);
    c.adam_idm = get_adam(f);
    const uint32_t n_log = get<uint32_t>(f);
    for (uint32_t i = 0; i < n_log; ++i) {
        EpochLog e;
        e.phase = get_string(f);
        e.epoch = get<int32_t>(f);
        e.mean_loss = get<double>(f);
        e.wall_seconds = get<double>(f);
        c.log.push_back(std::move(e));
    }
    return c;
}

void write_train_log_csv(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    f << "phase,epoch,mean_loss,wall_seconds\n";
    for (const auto& e : log) {
        char line[160];
        std::snprintf(line, sizeof(line), "%s,%d,%.17g,%.3f\n", e.phase.c_str(), e.epoch,
                      e.mean_loss, e.wall_seconds);
        f << line;
    }
}

void write_png(const std::filesystem::path& path, const Image& img) {
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        std::fclose(fp);
        throw std::runtime_error("png encoding failed for '" + path.string() + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.cols, img.rows, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(img.cols);
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            double v = std::clamp(img.at(r, c), 0.0, 1.0);
            row[c] = static_cast<png_byte>(std::lround(v * 255.0));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

uint32_t crc32_of(const void* data, size_t n) {
    return static_cast<uint32_t>(
        ::crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace sparsect::io
