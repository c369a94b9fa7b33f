#include "sparsect/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "sparsect/config.hpp"
#include "sparsect/io.hpp"
#include "sparsect/projector.hpp"
#include "sparsect/rng.hpp"
#include "sparsect/upsample.hpp"

namespace sparsect {

const std::vector<PhantomEllipse>& shepp_logan_ellipses() {
    // modified (high-contrast) variant of the classic head phantom table
    static const std::vector<PhantomEllipse> table = {
        {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
        {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
        {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
        {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
        {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
        {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
        {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
        {0.1, 0.0230, 0.0230, 0.0, -0.605, 0.0},
        {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
    };
    return table;
}

Image render_ellipses(const std::vector<PhantomEllipse>& ellipses, int n) {
    if (n < 1) throw std::invalid_argument("phantom size must be >= 1");
    Image img(n, n);
    const double step = 2.0 / n;
    for (int r = 0; r < n; ++r) {
        // pixel centers on [-1,1]^2, row 0 at the top
        const double y = (0.5 * (n - 1) - r) * step;
        for (int c = 0; c < n; ++c) {
            const double x = (c - 0.5 * (n - 1)) * step;
            double v = 0.0;
            for (const auto& e : ellipses) {
                const double phi = e.phi_deg * std::numbers::pi / 180.0;
                const double dx = x - e.x0, dy = y - e.y0;
                const double u = dx * std::cos(phi) + dy * std::sin(phi);
                const double w = -dx * std::sin(phi) + dy * std::cos(phi);
                if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.intensity;
            }
            img.at(r, c) = v;
        }
    }
    return img;
}

Image shepp_logan(int n) {
    Image img = render_ellipses(shepp_logan_ellipses(), n);
    // overlapping intensities cancel to within one ulp of zero; keep the
    // advertised [0,1] range exact
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
    return img;
}

Image disk_phantom(int n, double radius_frac, double value) {
    std::vector<PhantomEllipse> one = {{value, radius_frac, radius_frac, 0.0, 0.0, 0.0}};
    return render_ellipses(one, n);
}

Image random_phantom(uint64_t seed, int n) {
    Rng rng(seed);
    std::vector<PhantomEllipse> ellipses;
    // head-like enclosing ellipse plus a few interior features
    const int count = rng.uniform_int(3, 12);
    PhantomEllipse head;
    head.intensity = rng.uniform(0.3, 0.7);
    head.a = rng.uniform(0.55, 0.9);
    head.b = rng.uniform(0.55, 0.9);
    head.x0 = rng.uniform(-0.05, 0.05);
    head.y0 = rng.uniform(-0.05, 0.05);
    head.phi_deg = rng.uniform(0.0, 180.0);
    ellipses.push_back(head);
    for (int i = 1; i < count; ++i) {
        PhantomEllipse e;
        e.intensity = rng.uniform(-0.4, 0.5);
        e.a = rng.uniform(0.04, 0.45);
        e.b = rng.uniform(0.04, 0.45);
        e.x0 = rng.uniform(-0.55, 0.55);
        e.y0 = rng.uniform(-0.55, 0.55);
        e.phi_deg = rng.uniform(0.0, 180.0);
        ellipses.push_back(e);
    }
    Image img = render_ellipses(ellipses, n);
    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
    return img;
}

std::array<Image, 4> augment_rotations(const Image& x) {
    if (x.rows != x.cols) throw std::invalid_argument("rotation augmentation requires square images");
    const int n = x.rows;
    auto rot90cw = [n](const Image& in) {
        Image out(n, n, in.pixel_spacing, in.unit);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) out.at(r, c) = in.at(n - 1 - c, r);
        return out;
    };
    std::array<Image, 4> out{x, rot90cw(x), Image{}, Image{}};
    out[2] = rot90cw(out[1]);
    out[3] = rot90cw(out[2]);
    return out;
}

GeometryTriple default_geometry_triple() { return scale_geometry_triple(64, 96, 16, 4, 256); }

GeometryTriple scale_geometry_triple(int image_size, int n_detectors, int k_views, int upsample,
                                     int full_views) {
    if (upsample < 1) throw std::invalid_argument("upsample factor must be >= 1");
    GeometryTriple t;
    t.g_k = make_geometry(k_views, n_detectors, image_size, image_size);
    t.g_K = make_geometry(k_views * upsample, n_detectors, image_size, image_size);
    t.g_full = make_geometry(full_views, n_detectors, image_size, image_size);
    return t;
}

SampleTensors synthesize_sample(const Image& x, const GeometryTriple& geo) {
    SampleTensors s;
    s.y_k = forward_project(x, geo.g_k);
    s.y_K = forward_project(x, geo.g_K);
    s.y_full = forward_project(x, geo.g_full);
    SpectralFilter ramlak = make_filter(FilterKind::ramlak, default_pad_len(geo.g_full.n_detectors));
    s.x_full = fbp_reconstruct(s.y_full, geo.g_full, ramlak);
    return s;
}

namespace {

constexpr uint64_t kSplitOffset[3] = {0, 1u << 24, 2u << 24};
const char* kSplitName[3] = {"train", "val", "test"};

struct ManifestRow {
    std::string id, role, path;
    uint32_t crc;
};

void write_split(const std::filesystem::path& dir, const DatasetSpec& spec, int split,
                 int n_samples, std::vector<ManifestRow>& manifest) {
    const bool augmented = spec.augment && split != 2;  // test split is never augmented
    for (int i = 0; i < n_samples; ++i) {
        Image phantom = random_phantom(Rng::derive(spec.seed, kSplitOffset[split] + i),
                                       spec.geo.g_k.rows);
        std::vector<Image> variants;
        if (augmented) {
            auto rots = augment_rotations(phantom);
            variants.assign(rots.begin(), rots.end());
        } else {
            variants.push_back(phantom);
        }
        for (size_t v = 0; v < variants.size(); ++v) {
            SampleTensors s = synthesize_sample(variants[v], spec.geo);
            const std::string id = std::string(kSplitName[split]) + "_" + std::to_string(i) +
                                   (augmented ? "_r" + std::to_string(v) : "");
            auto emit = [&](const std::string& role, const std::vector<uint64_t>& dims,
                            const std::vector<double>& values) {
                const std::string rel = id + "_" + role + ".tensor";
                io::write_tensor(dir / rel, dims, values.data());
                manifest.push_back({id, role, rel,
                                    io::crc32_of(values.data(), values.size() * sizeof(double))});
            };
            emit("yk", {static_cast<uint64_t>(s.y_k.n_angles), static_cast<uint64_t>(s.y_k.n_detectors)},
                 s.y_k.data);
            emit("yK", {static_cast<uint64_t>(s.y_K.n_angles), static_cast<uint64_t>(s.y_K.n_detectors)},
                 s.y_K.data);
            emit("yfull",
                 {static_cast<uint64_t>(s.y_full.n_angles), static_cast<uint64_t>(s.y_full.n_detectors)},
                 s.y_full.data);
            emit("xfull", {static_cast<uint64_t>(s.x_full.rows), static_cast<uint64_t>(s.x_full.cols)},
                 s.x_full.data);
        }
    }
}

}  // namespace

void generate_dataset(const std::filesystem::path& dir, const DatasetSpec& spec) {
    if (spec.n_train < 1) throw std::invalid_argument("dataset needs at least one training sample");
    if (spec.geo.g_full.n_angles % spec.geo.g_K.n_angles != 0)
        throw std::invalid_argument("full-view angle count must be a multiple of the dense view count");
    std::filesystem::create_directories(dir);

    std::vector<ManifestRow> manifest;
    write_split(dir, spec, 0, spec.n_train, manifest);
    write_split(dir, spec, 1, spec.n_val, manifest);
    write_split(dir, spec, 2, spec.n_test, manifest);

    std::ofstream mf(dir / "manifest.csv", std::ios::trunc);
    if (!mf) throw std::runtime_error("cannot write manifest in '" + dir.string() + "'");
    mf << "id,role,path,crc32\n";
    for (const auto& row : manifest) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%08x", row.crc);
        mf << row.id << ',' << row.role << ',' << row.path << ',' << buf << '\n';
    }

    RunConfig cfg;
    cfg.put_geometry("geometry.sparse", spec.geo.g_k);
    cfg.put_geometry("geometry.dense", spec.geo.g_K);
    cfg.put_geometry("geometry.full", spec.geo.g_full);
    cfg.set_int("data.n_train", spec.n_train);
    cfg.set_int("data.n_val", spec.n_val);
    cfg.set_int("data.n_test", spec.n_test);
    cfg.set_int("data.seed", static_cast<int64_t>(spec.seed));
    cfg.set("data.augment", spec.augment ? "true" : "false");
    cfg.write_file(dir / "dataset.cfg");
}

LoadedDataset load_dataset(const std::filesystem::path& dir, bool precompute_enhanced) {
    RunConfig cfg = RunConfig::from_file(dir / "dataset.cfg");
    LoadedDataset ds;
    ds.geo.g_k = cfg.geometry("geometry.sparse");
    ds.geo.g_K = cfg.geometry("geometry.dense");
    ds.geo.g_full = cfg.geometry("geometry.full");
    for (TrainDataset* split : {&ds.train, &ds.val, &ds.test}) {
        split->g_k = ds.geo.g_k;
        split->g_K = ds.geo.g_K;
    }

    std::ifstream mf(dir / "manifest.csv");
    if (!mf) throw std::runtime_error("missing manifest.csv in '" + dir.string() + "'");
    std::string line;
    std::getline(mf, line);  // header
    std::string cur_id;
    TrainSample cur;
    int have = 0;
    auto flush = [&](const std::string& id) {
        if (have == 0) return;
        if (have < 3)
            throw std::runtime_error("dataset sample '" + id + "' has " + std::to_string(have) +
                                     " of 3 required tensors");
        TrainDataset* split = id.rfind("train", 0) == 0 ? &ds.train
                              : id.rfind("val", 0) == 0 ? &ds.val
                                                        : &ds.test;
        if (precompute_enhanced) cur.enhanced = enhance(cur.y_k, ds.geo.g_k, ds.geo.g_K);
        split->samples.push_back(std::move(cur));
        cur = TrainSample{};
        have = 0;
    };
    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        std::string fields[4];
        size_t start = 0;
        for (int f = 0; f < 4; ++f) {
            size_t comma = f < 3 ? line.find(',', start) : line.size();
            if (comma == std::string::npos)
                throw std::runtime_error("malformed manifest line: '" + line + "'");
            fields[f] = line.substr(start, comma - start);
            start = comma + 1;
        }
        if (fields[0] != cur_id) {
            flush(cur_id);
            cur_id = fields[0];
        }
        const auto path = dir / fields[2];
        io::TensorFile t = io::read_tensor(path);
        const uint32_t crc = io::crc32_of(t.values.data(), t.values.size() * sizeof(double));
        if (std::stoul(fields[3], nullptr, 16) != crc)
            throw std::runtime_error("checksum mismatch for '" + path.string() + "'");
        if (fields[1] == "yk") {
            cur.y_k = io::read_sinogram(path);
            ++have;
        } else if (fields[1] == "yK") {
            cur.y_K = io::read_sinogram(path);
            ++have;
        } else if (fields[1] == "xfull") {
            cur.x_label = io::read_image(path, ds.geo.g_K.pixel_spacing);
            ++have;
        } else if (fields[1] == "yfull") {
            // checksum-verified above; training does not consume it
        } else {
            throw std::runtime_error("unknown manifest role '" + fields[1] + "'");
        }
    }
    flush(cur_id);
    return ds;
}

}  // namespace sparsect
