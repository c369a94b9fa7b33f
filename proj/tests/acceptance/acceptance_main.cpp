// Acceptance suite: one stopwatched pass/fail line per criterion, nonzero
// exit if any fails. Criterion 9 shells out to the CLI binary (--cli), the
// rest run in-process at the default desk configuration.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "sparsect/autodiff.hpp"
#include "sparsect/baselines.hpp"
#include "sparsect/filter.hpp"
#include "sparsect/metrics.hpp"
#include "sparsect/phantom.hpp"
#include "sparsect/projector.hpp"
#include "sparsect/rng.hpp"
#include "sparsect/threading.hpp"
#include "sparsect/upsample.hpp"
#include "sparsect/wnet.hpp"

namespace fs = std::filesystem;
using namespace sparsect;
namespace ad = sparsect::ad;

namespace {

double now() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

int g_failures = 0;

void run_criterion(int id, const std::string& name, double time_limit_s,
                   const std::function<void(Outcome&)>& body) {
    Outcome out;
    const double t0 = now();
    try {
        body(out);
    } catch (const std::exception& e) {
        out.pass = false;
        out.note(std::string("exception: ") + e.what());
    }
    const double dt = now() - t0;
    if (time_limit_s > 0 && dt > time_limit_s) {
        out.pass = false;
        out.note("runtime " + std::to_string(dt) + "s over the " +
                 std::to_string(time_limit_s) + "s limit");
    }
    if (!out.pass) ++g_failures;
    std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", out.pass ? "PASS" : "FAIL", id,
                name.c_str(), dt, out.detail.empty() ? "" : " -- ", out.detail.c_str());
    std::fflush(stdout);
}

Image random_image(int rows, int cols, Rng& rng) {
    Image img(rows, cols);
    for (double& v : img.data) v = rng.uniform(-1.0, 1.0);
    return img;
}

Sinogram random_sinogram(int a, int d, Rng& rng) {
    Sinogram y(a, d);
    for (double& v : y.data) v = rng.uniform(-1.0, 1.0);
    return y;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// independent metric recomputations (same definitions, separate code)
double psnr_ref(const Image& x, const Image& r, double range) {
    double mse = 0;
    for (size_t i = 0; i < x.data.size(); ++i)
        mse += (x.data[i] - r.data[i]) * (x.data[i] - r.data[i]);
    mse /= x.data.size();
    return 10.0 * std::log10(range * range / mse);
}

double ssim_ref(const Image& x, const Image& r, double range) {
    const int w = 7, n = 49;
    const double c1 = 1e-4 * range * range, c2 = 9e-4 * range * range;
    double total = 0;
    int count = 0;
    for (int r0 = 0; r0 + w <= x.rows; ++r0)
        for (int c0 = 0; c0 + w <= x.cols; ++c0) {
            double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
            for (int i = 0; i < w; ++i)
                for (int j = 0; j < w; ++j) {
                    double a = x.at(r0 + i, c0 + j), b = r.at(r0 + i, c0 + j);
                    sx += a; sy += b; sxx += a * a; syy += b * b; sxy += a * b;
                }
            double mx = sx / n, my = sy / n;
            double vx = (sxx - n * mx * mx) / (n - 1), vy = (syy - n * my * my) / (n - 1);
            double cov = (sxy - n * mx * my) / (n - 1);
            total += ((2 * mx * my + c1) * (2 * cov + c2)) /
                     ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    return total / count;
}

TrainDataset build_dataset(int n, const GeometryTriple& geo, uint64_t seed_base) {
    SpectralFilter ramlak = make_filter(FilterKind::ramlak, default_pad_len(geo.g_full.n_detectors));
    TrainDataset ds;
    ds.g_k = geo.g_k;
    ds.g_K = geo.g_K;
    for (int i = 0; i < n; ++i) {
        Image ph = random_phantom(Rng::derive(seed_base, i), geo.g_k.rows);
        TrainSample s;
        s.y_k = forward_project(ph, geo.g_k);
        s.y_K = forward_project(ph, geo.g_K);
        s.x_label = fbp_reconstruct(forward_project(ph, geo.g_full), geo.g_full, ramlak);
        s.enhanced = enhance(s.y_k, geo.g_k, geo.g_K);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

bool rows_bit_exact(const Sinogram& dense_rows, const Sinogram& measured, int stride) {
    for (int i = 0; i < measured.n_angles; ++i)
        for (int d = 0; d < measured.n_detectors; ++d)
            if (std::memcmp(&dense_rows.data[(static_cast<size_t>(i) * stride) * measured.n_detectors + d],
                            &measured.data[static_cast<size_t>(i) * measured.n_detectors + d],
                            sizeof(double)) != 0)
                return false;
    return true;
}

bool files_identical(const fs::path& a, const fs::path& b) {
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    if (!fa || !fb) return false;
    std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    return !sa.empty() && sa == sb;
}

// shared state produced by criterion 5 and reused by 4 and 6
struct TrendState {
    TrainDataset train_ds;
    WNetParams params;            // SdM trained, W and IdM untouched
    TrainState train_state;
    Image phantom, label;
    Sinogram y_k, y_enh, y_sdm;
    double psnr_sparse = 0, psnr_enh = 0, psnr_sdm = 0;
};

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap_from_env();
    std::string cli_path, workdir = "acceptance_work";
    for (int i = 1; i + 1 < argc; i += 2) {
        std::string flag = argv[i];
        if (flag == "--cli") cli_path = argv[i + 1];
        else if (flag == "--workdir") workdir = argv[i + 1];
    }
    fs::create_directories(workdir);

    const GeometryTriple desk = default_geometry_triple();
    SpectralFilter desk_ramlak = make_filter(FilterKind::ramlak, default_pad_len(96));

    // 1 -- adjoint identity on three geometries
    run_criterion(1, "adjoint identity <A x, y> = <x, A^T y> at 1e-10", 10.0, [&](Outcome& out) {
        const std::tuple<int, int, int> geoms[] = {{4, 8, 8}, {16, 48, 32}, {64, 96, 64}};
        for (auto [angles, dets, size] : geoms) {
            Geometry g = make_geometry(angles, dets, size, size);
            Rng rng(101);
            double worst = 0;
            for (int t = 0; t < 20; ++t) {
                Image x = random_image(size, size, rng);
                Sinogram y = random_sinogram(angles, dets, rng);
                double lhs = dot(forward_project(x, g).data, y.data);
                double rhs = dot(x.data, back_project(y, g).data);
                worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-12));
            }
            out.require(worst <= 1e-10, "worst rel err " + std::to_string(worst) + " on " +
                                            std::to_string(size) + "x" + std::to_string(size));
        }
    });

    // 2 -- dense oracle equivalence, elementwise exact
    run_criterion(2, "dense-oracle equivalence is elementwise exact", 5.0, [&](Outcome& out) {
        Geometry g = make_geometry(4, 8, 8, 8);
        DenseSystemMatrix dense = dense_system_matrix(g);
        Rng rng(102);
        Image x = random_image(8, 8, rng);
        Sinogram y = forward_project(x, g);
        for (int r = 0; r < dense.n_rays; ++r) {
            double acc = 0;
            for (int p = 0; p < dense.n_pixels; ++p) acc += dense.at(r, p) * x.data[p];
            out.require(y.data[r] == acc, "forward row " + std::to_string(r));
        }
        Sinogram z = random_sinogram(4, 8, rng);
        Image bp = back_project(z, g);
        for (int p = 0; p < dense.n_pixels; ++p) {
            double acc = 0;
            for (int r = 0; r < dense.n_rays; ++r) acc += dense.at(r, p) * z.data[r];
            out.require(bp.data[p] == acc, "adjoint pixel " + std::to_string(p));
        }
    });

    // 3 -- gradient suite against central finite differences
    run_criterion(3, "gradient suite vs central finite differences at 1e-4", 120.0,
                  [&](Outcome& out) {
        Rng rng(103);
        auto rt = [&](std::vector<int> shape) {
            ad::Tensor t(std::move(shape));
            for (double& v : t.values) v = rng.uniform(-1.0, 1.0);
            return t;
        };
        auto check = [&](const char* what, const std::vector<ad::Var>& leaves,
                         const std::function<ad::Var()>& build, int max_probes = -1) {
            for (auto& l : leaves) l->zero_grad();
            ad::backward(build());
            const double eps = 1e-5;
            for (auto& leaf : leaves) {
                const size_t n = leaf->value.numel();
                const int probes = max_probes < 0 ? static_cast<int>(n)
                                                  : std::min<int>(max_probes, static_cast<int>(n));
                for (int k = 0; k < probes; ++k) {
                    const size_t i = max_probes < 0 ? k : rng.bits() % n;
                    double& c = leaf->value.values[i];
                    const double saved = c;
                    c = saved + eps;
                    const double fp = build()->value.values[0];
                    c = saved - eps;
                    const double fm = build()->value.values[0];
                    c = saved;
                    const double want = (fp - fm) / (2 * eps);
                    const double got = leaf->grad[i];
                    if (std::abs(got - want) > 1e-4 * std::max(1.0, std::abs(want))) {
                        out.require(false, std::string(what) + ": grad " + std::to_string(got) +
                                               " vs fd " + std::to_string(want));
                        return;
                    }
                }
            }
        };

        {
            auto x = ad::param(rt({2, 4, 4}));
            auto w = ad::param(rt({2, 2, 3, 3}));
            auto b = ad::param(rt({2}));
            ad::Tensor tgt = rt({2, 4, 4});
            check("conv2d", {x, w, b}, [&] { return ad::huber_loss(ad::conv2d(x, w, b, 1, 1), tgt); });
        }
        {
            auto x = ad::param(rt({1, 6, 6}));
            auto w = ad::param(rt({2, 1, 3, 3}));
            auto b = ad::param(rt({2}));
            ad::Tensor tgt = rt({2, 3, 3});
            check("strided conv2d", {x, w, b},
                  [&] { return ad::huber_loss(ad::conv2d(x, w, b, 2, 1), tgt); });
        }
        {
            auto x = ad::param(rt({2, 3, 3}));
            auto w = ad::param(rt({2, 1, 2, 2}));
            auto b = ad::param(rt({1}));
            ad::Tensor tgt = rt({1, 6, 6});
            check("transpose_conv2d", {x, w, b},
                  [&] { return ad::huber_loss(ad::transpose_conv2d(x, w, b), tgt); });
        }
        {
            auto x = ad::param(rt({2, 4, 4}));
            ad::Tensor tgt = rt({2, 4, 4});
            ad::Tensor tgt2 = rt({2, 2, 2});
            check("max_pool2+nearest_upsample2", {x},
                  [&] { return ad::huber_loss(ad::nearest_upsample2(ad::max_pool2(x)), tgt); });
            check("leaky_relu", {x}, [&] { return ad::huber_loss(ad::leaky_relu(x, 0.01), tgt); });
            check("add+scale", {x},
                  [&] { return ad::huber_loss(ad::add(x, ad::scale(x, -0.3)), tgt); });
            check("max_pool2", {x}, [&] { return ad::huber_loss(ad::max_pool2(x), tgt2); });
        }
        {
            auto a = ad::param(rt({1, 4, 4}));
            auto b = ad::param(rt({2, 4, 4}));
            ad::Tensor tgt = rt({3, 4, 4});
            check("concat", {a, b},
                  [&] { return ad::huber_loss(ad::concat_channels(a, b), tgt); });
        }
        {
            auto x = ad::param(rt({3, 3}));
            ad::Tensor tgt(std::vector<int>{3, 3});
            check("huber_loss", {x}, [&] { return ad::huber_loss(x, tgt); });
        }
        {
            auto y = ad::param(rt({4, 8}));
            auto w = ad::param(rt({9}));
            ad::Tensor tgt = rt({4, 8});
            check("filter_layer", {y, w},
                  [&] { return ad::huber_loss(ad::filter_layer(y, w, 16), tgt); });
        }
        {
            Geometry g = make_geometry(4, 8, 8, 8);
            auto y = ad::param(rt({4, 8}));
            ad::Tensor tgt = rt({8, 8});
            check("backproject_layer", {y},
                  [&] { return ad::huber_loss(ad::backproject_layer(y, g), tgt); });
        }
        {
            // >= 10 sampled parameters per WNet module through the whole net
            GeometryTriple tiny = scale_geometry_triple(8, 12, 4, 2, 16);
            TrainDataset ds = build_dataset(1, tiny, 555);
            WNetConfig cfg;
            cfg.sdm.depth = 1;
            cfg.sdm.base_channels = 2;
            cfg.idm = cfg.sdm;
            WNetParams p = wnet_init(cfg, 12, 11);
            const TrainSample& s = ds.samples[0];
            auto build = [&] {
                auto h = sdm_forward(p, ad::constant(ad::Tensor({8, 12}, s.enhanced.data)), s.y_k, 2);
                h = rem_forward(h, p.rem_filter, tiny.g_K, p.cfg.pad_len);
                h = idm_forward(p, h);
                return ad::huber_loss(h, ad::Tensor({8, 8}, s.x_label.data), 1.0);
            };
            for (const auto& group : {p.sdm.vars, std::vector<ad::Var>{p.rem_filter}, p.idm.vars}) {
                // at least 10 sampled coordinates per module
                const int per_leaf =
                    std::max<int>(2, static_cast<int>((12 + group.size() - 1) / group.size()));
                check("wnet module params", group, build, per_leaf);
            }
        }
    });

    // 5 -- artifact trend with SdM training (shared state for 4 and 6)
    TrendState trend;
    run_criterion(5, "PSNR trend: sparse FBP < enhanced FBP < denoised FBP (first gap >= 1 dB)",
                  300.0, [&](Outcome& out) {
        trend.train_ds = build_dataset(32, desk, 2024);
        WNetConfig cfg;  // default desk networks
        TrainConfig tc;
        tc.epochs_jumpstart = 5;
        tc.epochs_joint = 0;
        tc.seed = 7;
        trend.train_state = train(trend.train_ds, cfg, tc);
        trend.params = trend.train_state.params;

        trend.phantom = shepp_logan(64);
        trend.label = fbp_reconstruct(forward_project(trend.phantom, desk.g_full), desk.g_full,
                                      desk_ramlak);
        trend.y_k = forward_project(trend.phantom, desk.g_k);
        trend.y_enh = enhance(trend.y_k, desk.g_k, desk.g_K);
        trend.y_sdm = sdm_apply(trend.params, trend.y_enh, trend.y_k, 4);

        Image rec_sparse = fbp_reconstruct(trend.y_k, desk.g_k, desk_ramlak);
        Image rec_enh = fbp_reconstruct(trend.y_enh, desk.g_K, desk_ramlak);
        Image rec_sdm = fbp_reconstruct(trend.y_sdm, desk.g_K, desk_ramlak);
        trend.psnr_sparse = psnr(rec_sparse, trend.label);
        trend.psnr_enh = psnr(rec_enh, trend.label);
        trend.psnr_sdm = psnr(rec_sdm, trend.label);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "PSNR %.2f < %.2f < %.2f dB", trend.psnr_sparse,
                      trend.psnr_enh, trend.psnr_sdm);
        out.note(buf);
        out.require(trend.psnr_enh - trend.psnr_sparse >= 1.0, "first gap under 1 dB");
        out.require(trend.psnr_sdm > trend.psnr_enh, "denoised FBP does not improve on enhanced");
    });

    // 4 -- consensus bit-exactness (uses the trained SdM from criterion 5)
    run_criterion(4, "consensus rows are byte-exact after enhance and the trained SdM", 60.0,
                  [&](Outcome& out) {
        out.require(rows_bit_exact(trend.y_enh, trend.y_k, 4), "enhance broke a measured row");
        out.require(rows_bit_exact(trend.y_sdm, trend.y_k, 4), "SdM broke a measured row");
        for (int i = 0; i < 4; ++i) {
            const TrainSample& s = trend.train_ds.samples[i];
            Sinogram o = sdm_apply(trend.params, s.enhanced, s.y_k, 4);
            out.require(rows_bit_exact(o, s.y_k, 4),
                        "SdM broke a measured row on train sample " + std::to_string(i));
        }
    });

    // 6 -- filter learning (uses the trained SdM from criterion 5)
    run_criterion(6, "five filter epochs cut L_r by 20% and keep low bins near Ram-Lak", 300.0,
                  [&](Outcome& out) {
        WNetConfig cfg;
        TrainConfig tc;
        tc.epochs_jumpstart = 5;
        tc.epochs_joint = 0;
        tc.seed = 7;
        // continue from the criterion-5 state: W-only epochs over the cached
        // SdM outputs happen inside train()'s second phase; rerun a fresh
        // two-phase schedule to keep this criterion self-contained
        TrainState st = trend.train_state;  // shared params (SdM trained, W at Ram-Lak)

        const double loss_ramlak = mean_rem_loss_with_filter(st.params, trend.train_ds, desk_ramlak);

        // W-only training: five epochs of the ReM phase
        {
            std::vector<ad::Tensor> denoised;
            for (const auto& s : trend.train_ds.samples) {
                auto o = sdm_forward(st.params, ad::constant(ad::Tensor({64, 96}, s.enhanced.data)),
                                     s.y_k, 4);
                denoised.push_back(o->value);
            }
            AdamState adam;
            adam.lr = 1e-4;
            adam.init({st.params.rem_filter});
            Rng shuffle(42);
            for (int e = 1; e <= 5; ++e) {
                std::vector<size_t> order(trend.train_ds.samples.size());
                for (size_t i = 0; i < order.size(); ++i) order[i] = i;
                for (size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[shuffle.bits() % i]);
                size_t done = 0;
                while (done < order.size()) {
                    const size_t nb = std::min<size_t>(4, order.size() - done);
                    st.params.rem_filter->zero_grad();
                    for (size_t b = 0; b < nb; ++b) {
                        const auto& s = trend.train_ds.samples[order[done + b]];
                        auto rec = rem_forward(ad::constant(denoised[order[done + b]]),
                                               st.params.rem_filter, desk.g_K, st.params.cfg.pad_len);
                        auto loss = ad::huber_loss(rec, ad::Tensor({64, 64}, s.x_label.data), 1.0);
                        ad::backward(ad::scale(loss, 1.0 / nb));
                    }
                    adam.apply({st.params.rem_filter});
                    done += nb;
                }
            }
        }
        const double loss_learned = mean_rem_loss(st.params, trend.train_ds);
        char buf[160];
        std::snprintf(buf, sizeof(buf), "L_r %.5f (Ram-Lak) -> %.5f (learned)", loss_ramlak,
                      loss_learned);
        out.note(buf);
        out.require(loss_learned <= 0.8 * loss_ramlak, "loss reduction under 20%");

        // shape: low-frequency deviation below upper-half deviation
        const auto& learned = st.params.rem_filter->value.values;
        const auto& ramlak = desk_ramlak.weights;
        const int n_bins = static_cast<int>(ramlak.size());
        const int low = std::max(1, n_bins / 10);
        double dev_low = 0, dev_high = 0;
        for (int f = 0; f < low; ++f) dev_low = std::max(dev_low, std::abs(learned[f] - ramlak[f]));
        for (int f = n_bins / 2; f < n_bins; ++f)
            dev_high = std::max(dev_high, std::abs(learned[f] - ramlak[f]));
        std::snprintf(buf, sizeof(buf), "deviation: low bins %.5f, upper half %.5f", dev_low,
                      dev_high);
        out.note(buf);
        out.require(dev_low < dev_high, "low-frequency bins drifted more than the upper half");
    });

    // 7 -- full round-robin run at the default desk configuration
    run_criterion(7, "default end-to-end training beats sparse FBP by 3 dB and WLS+TV", 1800.0,
                  [&](Outcome& out) {
        DatasetSpec spec;  // defaults: 200/40/40, desk geometry
        TrainDataset train_ds = build_dataset(spec.n_train, desk, 91);
        TrainDataset val_ds = build_dataset(8, desk, 92 + (1u << 20));
        TrainDataset test_ds = build_dataset(16, desk, 93 + (1u << 21));

        WNetConfig cfg;
        TrainConfig tc;  // lr 1e-4, batch 4, 5 jump-start, 20 joint
        tc.seed = 2024;
        tc.verbose = std::getenv("SPARSECT_ACCEPT_VERBOSE") != nullptr;
        TrainState st = train(train_ds, cfg, tc);

        // each jump-start phase decreases from its first to its last epoch
        for (const std::string phase : {"sdm", "rem", "idm"}) {
            double first = 0, last = 0;
            for (const auto& e : st.log) {
                if (e.phase != phase) continue;
                if (e.epoch == 1) first = e.mean_loss;
                last = e.mean_loss;
            }
            out.require(last < first, phase + " phase loss did not decrease (" +
                                          std::to_string(first) + " -> " + std::to_string(last) + ")");
        }

        // calibrate the WLS+TV weight on validation phantoms
        double best_lambda = 1e2, best_psnr = -1e9;
        for (double lam : {1e2, 1e3, 1e4, 1e5, 1e6}) {
            double mean = 0;
            for (int i = 0; i < 3; ++i) {
                WlsTvOptions opt;
                opt.lambda = lam;
                Image rec = wls_tv_reconstruct(val_ds.samples[i].y_k, desk.g_k, opt).x;
                mean += psnr(rec, val_ds.samples[i].x_label);
            }
            if (mean > best_psnr) {
                best_psnr = mean;
                best_lambda = lam;
            }
        }

        double wnet_mean = 0, fbp_mean = 0, wls_mean = 0;
        for (const auto& s : test_ds.samples) {
            Image wnet_rec = wnet_infer(st.params, s.y_k, desk.g_k, desk.g_K);
            Image fbp_rec = fbp_reconstruct(s.y_k, desk.g_k, desk_ramlak);
            WlsTvOptions opt;
            opt.lambda = best_lambda;
            Image wls_rec = wls_tv_reconstruct(s.y_k, desk.g_k, opt).x;
            wnet_mean += psnr(wnet_rec, s.x_label);
            fbp_mean += psnr(fbp_rec, s.x_label);
            wls_mean += psnr(wls_rec, s.x_label);
        }
        wnet_mean /= test_ds.samples.size();
        fbp_mean /= test_ds.samples.size();
        wls_mean /= test_ds.samples.size();
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "held-out PSNR: WNet %.2f, sparse FBP %.2f, WLS+TV %.2f (lambda %.0e)",
                      wnet_mean, fbp_mean, wls_mean, best_lambda);
        out.note(buf);
        out.require(wnet_mean >= fbp_mean + 3.0, "WNet under sparse FBP + 3 dB");
        out.require(wnet_mean >= wls_mean, "WNet under WLS+TV");

        // consensus invariant after full training (criterion 4 extension)
        Sinogram o = sdm_apply(st.params, test_ds.samples[0].enhanced, test_ds.samples[0].y_k, 4);
        out.require(rows_bit_exact(o, test_ds.samples[0].y_k, 4),
                    "trained SdM broke a measured row");
    });

    // 8 -- metrics against brute-force recomputation
    run_criterion(8, "metric oracles agree to 1e-9; Huber branches meet at the threshold", 60.0,
                  [&](Outcome& out) {
        Rng rng(108);
        double worst_psnr = 0, worst_ssim = 0;
        for (int t = 0; t < 50; ++t) {
            Image a(16, 20), b(16, 20);
            for (double& v : a.data) v = rng.uniform(0.0, 1.0);
            for (double& v : b.data) v = rng.uniform(0.0, 1.0);
            worst_psnr = std::max(worst_psnr, std::abs(psnr(a, b) - psnr_ref(a, b, 1.0)));
            worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b) - ssim_ref(a, b, 1.0)));
        }
        out.require(worst_psnr <= 1e-9, "psnr worst diff " + std::to_string(worst_psnr));
        out.require(worst_ssim <= 1e-9, "ssim worst diff " + std::to_string(worst_ssim));

        auto huber_at = [](double d) {
            ad::Tensor t({1}, {d});
            return ad::huber_loss(ad::constant(t), ad::Tensor({1}, {0.0}))->value.values[0];
        };
        const double quadratic_branch = 0.5 * 1.0 * 1.0;
        const double linear_branch = 1.0 - 0.5;
        out.require(huber_at(1.0) == quadratic_branch && huber_at(1.0) == linear_branch,
                    "Huber branches disagree at |d| = 1");
    });

    // 9 -- CLI determinism: synth + train + infer twice, byte-identical
    run_criterion(9, "synth + train + infer are byte-deterministic under a fixed seed", 600.0,
                  [&](Outcome& out) {
        if (cli_path.empty()) {
            out.require(false, "no --cli path provided");
            return;
        }
        const fs::path wd = fs::path(workdir) / "determinism";
        fs::remove_all(wd);
        fs::create_directories(wd);
        auto shell = [&](const std::string& cmd) {
            const std::string full = cmd + " >> " + (wd / "cli.log").string() + " 2>&1";
            return std::system(full.c_str()) == 0;
        };
        for (int run : {1, 2}) {
            const std::string tag = std::to_string(run);
            bool ok = shell(cli_path + " synth --out " + (wd / ("ds" + tag)).string() +
                            " --size 16 --detectors 24 --views 4 --upsample-factor 2"
                            " --full-views 16 --n-train 3 --n-val 1 --n-test 1 --seed 5") &&
                      shell(cli_path + " train --data " + (wd / ("ds" + tag)).string() + " --out " +
                            (wd / ("w" + tag + ".ckpt")).string() +
                            " --depth 2 --base-channels 2 --epochs-jumpstart 1 --epochs-joint 2"
                            " --batch-size 2 --seed 5") &&
                      shell(cli_path + " infer --checkpoint " + (wd / ("w" + tag + ".ckpt")).string() +
                            " --input " + (wd / ("ds" + tag) / "test_0_yk.tensor").string() +
                            " --out " + (wd / ("rec" + tag + ".tensor")).string());
            out.require(ok, "CLI run " + tag + " failed (see cli.log)");
        }
        if (!out.pass) return;
        for (const auto& entry : fs::directory_iterator(wd / "ds1"))
            out.require(files_identical(entry.path(), wd / "ds2" / entry.path().filename()),
                        "dataset file differs: " + entry.path().filename().string());
        out.require(files_identical(wd / "w1.ckpt", wd / "w2.ckpt"), "checkpoints differ");
        out.require(files_identical(wd / "rec1.tensor", wd / "rec2.tensor"),
                    "reconstructions differ");
    });

    // 10 -- WLS+TV sanity against the dense least-squares oracle
    run_criterion(10, "WLS+TV: lambda=0 residual within 5% of the dense optimum, monotone", 60.0,
                  [&](Outcome& out) {
        Geometry g = make_geometry(12, 12, 8, 8);
        Rng rng(110);
        Sinogram y = random_sinogram(12, 12, rng);
        for (double& v : y.data) v = std::abs(v);

        DenseSystemMatrix dense = dense_system_matrix(g);
        Eigen::MatrixXd A(dense.n_rays, dense.n_pixels);
        for (int r = 0; r < dense.n_rays; ++r)
            for (int c = 0; c < dense.n_pixels; ++c) A(r, c) = dense.at(r, c);
        Eigen::VectorXd b(dense.n_rays);
        for (int r = 0; r < dense.n_rays; ++r) b(r) = y.data[r];
        Eigen::VectorXd x_star = A.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(b);
        const double oracle = (A * x_star - b).norm();

        WlsTvOptions opt;  // lambda 0, 250 iterations, backtracking
        WlsTvResult res = wls_tv_reconstruct(y, g, opt);
        Eigen::VectorXd xv(dense.n_pixels);
        for (int c = 0; c < dense.n_pixels; ++c) xv(c) = res.x.data[c];
        const double residual = (A * xv - b).norm();
        char buf[120];
        std::snprintf(buf, sizeof(buf), "residual %.6f vs oracle %.6f", residual, oracle);
        out.note(buf);
        out.require(residual <= 1.05 * oracle, "residual over 1.05x the dense optimum");
        for (size_t i = 1; i < res.objective.size(); ++i)
            out.require(res.objective[i] <= res.objective[i - 1] + 1e-12,
                        "objective increased at iteration " + std::to_string(i));
    });

    std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
