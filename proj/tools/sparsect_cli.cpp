// sparsect: desk-scale sparse-view CT reconstruction and denoising toolkit.
// Subcommands cover dataset synthesis, classical and learned reconstruction,
// training, evaluation, and figure-style exports.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sparsect/baselines.hpp"
#include "sparsect/config.hpp"
#include "sparsect/filter.hpp"
#include "sparsect/io.hpp"
#include "sparsect/metrics.hpp"
#include "sparsect/phantom.hpp"
#include "sparsect/projector.hpp"
#include "sparsect/threading.hpp"
#include "sparsect/upsample.hpp"
#include "sparsect/wnet.hpp"

namespace fs = std::filesystem;
using namespace sparsect;

namespace {

struct CommonOpts {
    std::string config_path;
    RunConfig cfg;

    void load() {
        if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
    }
};

// flags win over config values: only read the config when the flag was not
// passed on the command line
template <typename T>
T pick(const CLI::Option* opt, T flag_value, const RunConfig& cfg, const std::string& key,
       T fallback) {
    if (opt && opt->count() > 0) return flag_value;
    if constexpr (std::is_same_v<T, int>)
        return static_cast<int>(cfg.get_int(key, fallback));
    else if constexpr (std::is_same_v<T, double>)
        return cfg.get_double(key, fallback);
    else if constexpr (std::is_same_v<T, bool>)
        return cfg.get_bool(key, fallback);
    else
        return static_cast<T>(cfg.get(key, fallback));
}

std::pair<double, double> parse_window(const std::string& s) {
    auto colon = s.find(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("--window", "expected lo:hi, got '" + s + "'");
    try {
        return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
    } catch (...) {
        throw CLI::ValidationError("--window", "expected numeric lo:hi, got '" + s + "'");
    }
}

SpectralFilter resolve_filter(const std::string& kind, int pad_len,
                              const std::string& checkpoint) {
    if (kind == "learned") {
        if (checkpoint.empty())
            throw CLI::ValidationError("--filter", "learned filter needs --checkpoint");
        io::Checkpoint c = io::read_checkpoint(checkpoint);
        SpectralFilter w;
        w.pad_len = c.cfg.pad_len;
        w.kind = FilterKind::learned;
        w.weights = c.params.rem_filter->value.values;
        return w;
    }
    return make_filter(filter_kind_from_string(kind), pad_len);
}

uint64_t config_hash_of(const TrainConfig& tc, const WNetConfig& wc, const GeometryTriple& geo) {
    RunConfig c;
    c.put_geometry("geometry.sparse", geo.g_k);
    c.put_geometry("geometry.dense", geo.g_K);
    c.set_double("train.lr", tc.lr);
    c.set_int("train.batch_size", tc.batch_size);
    c.set_int("train.epochs_jumpstart", tc.epochs_jumpstart);
    c.set_int("train.epochs_joint", tc.epochs_joint);
    c.set_int("train.seed", static_cast<int64_t>(tc.seed));
    c.set_int("unet.depth", wc.sdm.depth);
    c.set_int("unet.base_channels", wc.sdm.base_channels);
    c.set_int("filter.pad_len", wc.pad_len);
    c.set_double("train.huber_delta", wc.huber_delta);
    return c.hash();
}

int run_synth(const CommonOpts& common, const DatasetSpec& spec, const std::string& out) {
    generate_dataset(out, spec);
    std::printf("dataset written to %s (%d train / %d val / %d test%s)\n", out.c_str(),
                spec.n_train, spec.n_val, spec.n_test, spec.augment ? ", 4x augmented" : "");
    (void)common;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    apply_thread_cap_from_env();
    CLI::App app{"sparse-view CT reconstruction and dual-domain denoising toolkit"};
    app.require_subcommand(1);

    CommonOpts common;
    app.add_option("--config", common.config_path, "key = value run configuration file")
        ->envname("SPARSECT_CONFIG");

    // geometry flags shared by most subcommands (config keys geometry.*)
    int size = 64, detectors = 96, views = 16, upsample = 4, full_views = 256;
    auto add_geometry_flags = [&](CLI::App* cmd, bool with_full = false) {
        cmd->add_option("--size", size, "image side length in pixels")->capture_default_str();
        cmd->add_option("--detectors", detectors, "detector element count")->capture_default_str();
        cmd->add_option("--views", views, "sparse view count k")->capture_default_str();
        cmd->add_option("--upsample-factor", upsample, "angular upsampling factor C")
            ->capture_default_str();
        if (with_full)
            cmd->add_option("--full-views", full_views, "full-view count for labels")
                ->capture_default_str();
    };
    auto geometry_from_cfg = [&](CLI::App* cmd) {
        auto of = [&](const char* flag, int v, const char* key, int fb) {
            return pick<int>(cmd->get_option(flag), v, common.cfg, key, fb);
        };
        GeometryTriple geo = scale_geometry_triple(
            of("--size", size, "geometry.size", 64),
            of("--detectors", detectors, "geometry.detectors", 96),
            of("--views", views, "geometry.views", 16),
            of("--upsample-factor", upsample, "geometry.upsample_factor", 4),
            cmd->get_option_no_throw("--full-views")
                ? of("--full-views", full_views, "geometry.full_views", 256)
                : 256);
        return geo;
    };

    uint64_t seed = 1234;

    // ---- synth -------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate a synthetic phantom dataset");
    std::string synth_out;
    int n_train = 200, n_val = 40, n_test = 40;
    bool augment = false;
    synth->add_option("--out", synth_out, "output dataset directory")->required();
    synth->add_option("--n-train", n_train, "training sample count")->capture_default_str();
    synth->add_option("--n-val", n_val, "validation sample count")->capture_default_str();
    synth->add_option("--n-test", n_test, "test sample count")->capture_default_str();
    synth->add_flag("--augment", augment, "expand train/val splits by 90-degree rotations");
    synth->add_option("--seed", seed, "master generation seed")->capture_default_str();
    add_geometry_flags(synth, /*with_full=*/true);

    // ---- fbp ---------------------------------------------------------------
    auto* fbp = app.add_subcommand("fbp", "filtered backprojection of a sinogram file");
    std::string fbp_in, fbp_out, fbp_filter = "ramlak", fbp_ckpt;
    int pad_len = 0;
    fbp->add_option("--input", fbp_in, "input sinogram tensor")->required();
    fbp->add_option("--out", fbp_out, "output image tensor")->required();
    fbp->add_option("--filter", fbp_filter, "ramlak|cosine|shepp-logan|learned")
        ->capture_default_str();
    fbp->add_option("--checkpoint", fbp_ckpt, "checkpoint providing the learned filter");
    fbp->add_option("--pad", pad_len, "FFT pad length (0 = smallest power of two >= 2*detectors)")
        ->capture_default_str();
    add_geometry_flags(fbp);

    // ---- enhance -----------------------------------------------------------
    auto* enh = app.add_subcommand("enhance",
                                   "geometry-aware upsampling with measurement consensus");
    std::string enh_in, enh_out;
    enh->add_option("--input", enh_in, "sparse sinogram tensor")->required();
    enh->add_option("--out", enh_out, "enhanced sinogram tensor")->required();
    add_geometry_flags(enh);

    // ---- train -------------------------------------------------------------
    auto* tr = app.add_subcommand("train", "round-robin training on a synthesized dataset");
    std::string tr_data, tr_out, tr_log;
    TrainConfig tc;
    int depth = 3, base_channels = 16;
    double huber_delta = 1.0;
    bool verbose = false;
    tr->add_option("--data", tr_data, "dataset directory from synth")->required();
    tr->add_option("--out", tr_out, "output checkpoint path")->required();
    tr->add_option("--log", tr_log, "training log CSV path");
    tr->add_option("--seed", seed, "initialization and shuffling seed")->capture_default_str();
    tr->add_option("--lr", tc.lr, "Adam learning rate")->capture_default_str();
    tr->add_option("--batch-size", tc.batch_size, "samples per update")->capture_default_str();
    tr->add_option("--epochs-jumpstart", tc.epochs_jumpstart, "per-module warmup epochs")
        ->capture_default_str();
    tr->add_option("--epochs-joint", tc.epochs_joint, "joint fine-tuning epochs")
        ->capture_default_str();
    tr->add_option("--depth", depth, "UNet depth")->capture_default_str();
    tr->add_option("--base-channels", base_channels, "UNet first-level channels")
        ->capture_default_str();
    tr->add_option("--huber-delta", huber_delta, "Huber loss threshold")->capture_default_str();
    tr->add_flag("--verbose", verbose, "print per-epoch losses to stderr");

    // ---- infer -------------------------------------------------------------
    auto* inf = app.add_subcommand("infer", "reconstruct a sparse sinogram with a checkpoint");
    std::string inf_ckpt, inf_in, inf_out;
    inf->add_option("--checkpoint", inf_ckpt, "trained checkpoint")->required();
    inf->add_option("--input", inf_in, "sparse sinogram tensor")->required();
    inf->add_option("--out", inf_out, "output image tensor")->required();

    // ---- wls-tv ------------------------------------------------------------
    auto* wls = app.add_subcommand("wls-tv", "iterative least-squares + TV baseline");
    std::string wls_in, wls_out;
    WlsTvOptions wopt;
    bool no_backtracking = false;
    wls->add_option("--input", wls_in, "input sinogram tensor")->required();
    wls->add_option("--out", wls_out, "output image tensor")->required();
    wls->add_option("--lambda", wopt.lambda, "total-variation weight")->capture_default_str();
    wls->add_option("--iters", wopt.iters, "iteration count")->capture_default_str();
    wls->add_option("--step", wopt.step, "fixed trial step (0 = adaptive)")->capture_default_str();
    wls->add_flag("--no-backtracking", no_backtracking, "disable the Armijo safeguard");
    add_geometry_flags(wls);

    // ---- eval --------------------------------------------------------------
    auto* ev = app.add_subcommand("eval", "PSNR/SSIM of reconstructions against a reference");
    std::string ev_ref, ev_out;
    std::vector<std::string> ev_recons, ev_methods;
    double data_range = 1.0;
    ev->add_option("--ref", ev_ref, "reference image tensor")->required();
    ev->add_option("--recon", ev_recons, "reconstruction tensor (repeatable)")->required();
    ev->add_option("--method", ev_methods, "method label per --recon (defaults to file stem)");
    ev->add_option("--out", ev_out, "metrics CSV path (stdout if omitted)");
    ev->add_option("--data-range", data_range, "PSNR/SSIM data range")->capture_default_str();

    // ---- plot-filter -------------------------------------------------------
    auto* pf = app.add_subcommand("plot-filter", "export filter curves as CSV");
    std::string pf_ckpt, pf_out;
    int pf_pad = 256;
    pf->add_option("--checkpoint", pf_ckpt, "checkpoint with a learned filter (optional)");
    pf->add_option("--out", pf_out, "output CSV path")->required();
    pf->add_option("--pad", pf_pad, "pad length for the classical curves")->capture_default_str();

    // ---- export-png --------------------------------------------------------
    auto* ex = app.add_subcommand("export-png", "8-bit grayscale export with a display window");
    std::string ex_in, ex_out, ex_window = "0:1";
    ex->add_option("--input", ex_in, "input image tensor")->required();
    ex->add_option("--out", ex_out, "output PNG path")->required();
    ex->add_option("--window", ex_window, "display window lo:hi mapped to [0,1]")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        common.load();

        if (*synth) {
            DatasetSpec spec;
            spec.n_train = pick(synth->get_option("--n-train"), n_train, common.cfg, "data.n_train", 200);
            spec.n_val = pick(synth->get_option("--n-val"), n_val, common.cfg, "data.n_val", 40);
            spec.n_test = pick(synth->get_option("--n-test"), n_test, common.cfg, "data.n_test", 40);
            spec.augment = pick(synth->get_option("--augment"), augment, common.cfg, "data.augment", false);
            spec.seed = pick<double>(synth->get_option("--seed"), static_cast<double>(seed),
                                     common.cfg, "data.seed", 1234.0);
            spec.geo = geometry_from_cfg(synth);
            return run_synth(common, spec, synth_out);
        }

        if (*fbp) {
            Sinogram y = io::read_sinogram(fbp_in);
            GeometryTriple geo = geometry_from_cfg(fbp);
            Geometry g = make_geometry(y.n_angles, y.n_detectors, geo.g_k.rows, geo.g_k.cols,
                                       geo.g_k.pixel_spacing, geo.g_k.detector_spacing);
            int pad = pad_len > 0 ? pad_len : default_pad_len(y.n_detectors);
            SpectralFilter w = resolve_filter(fbp_filter, pad, fbp_ckpt);
            io::write_image(fbp_out, fbp_reconstruct(y, g, w));
            return 0;
        }

        if (*enh) {
            Sinogram y = io::read_sinogram(enh_in);
            GeometryTriple geo = geometry_from_cfg(enh);
            Geometry g_k = make_geometry(y.n_angles, y.n_detectors, geo.g_k.rows, geo.g_k.cols);
            Geometry g_K = make_geometry(y.n_angles * (geo.g_K.n_angles / geo.g_k.n_angles),
                                         y.n_detectors, geo.g_k.rows, geo.g_k.cols);
            io::write_sinogram(enh_out, enhance(y, g_k, g_K));
            return 0;
        }

        if (*tr) {
            LoadedDataset ds = load_dataset(tr_data);
            WNetConfig wc;
            wc.sdm.depth = pick(tr->get_option("--depth"), depth, common.cfg, "unet.depth", 3);
            wc.sdm.base_channels = pick(tr->get_option("--base-channels"), base_channels,
                                        common.cfg, "unet.base_channels", 16);
            wc.idm = wc.sdm;
            wc.huber_delta = pick(tr->get_option("--huber-delta"), huber_delta, common.cfg,
                                  "train.huber_delta", 1.0);
            tc.lr = pick(tr->get_option("--lr"), tc.lr, common.cfg, "train.lr", 1e-4);
            tc.batch_size = pick(tr->get_option("--batch-size"), tc.batch_size, common.cfg,
                                 "train.batch_size", 4);
            tc.epochs_jumpstart = pick(tr->get_option("--epochs-jumpstart"), tc.epochs_jumpstart,
                                       common.cfg, "train.epochs_jumpstart", 5);
            tc.epochs_joint = pick(tr->get_option("--epochs-joint"), tc.epochs_joint, common.cfg,
                                   "train.epochs_joint", 20);
            tc.seed = static_cast<uint64_t>(pick<double>(tr->get_option("--seed"),
                                                         static_cast<double>(seed), common.cfg,
                                                         "train.seed", 1234.0));
            tc.verbose = verbose;
            TrainState st = train(ds.train, wc, tc);
            io::write_checkpoint(tr_out, ds.geo.g_k, ds.geo.g_K, st,
                                 config_hash_of(tc, st.params.cfg, ds.geo));
            if (!tr_log.empty()) io::write_train_log_csv(tr_log, st.log);
            std::printf("checkpoint written to %s (%zu epochs logged)\n", tr_out.c_str(),
                        st.log.size());
            return 0;
        }

        if (*inf) {
            io::Checkpoint c = io::read_checkpoint(inf_ckpt);
            Sinogram y = io::read_sinogram(inf_in);
            if (y.n_angles != c.g_k.n_angles || y.n_detectors != c.g_k.n_detectors)
                throw std::runtime_error("input sinogram does not match the checkpoint geometry");
            io::write_image(inf_out, wnet_infer(c.params, y, c.g_k, c.g_K));
            return 0;
        }

        if (*wls) {
            Sinogram y = io::read_sinogram(wls_in);
            GeometryTriple geo = geometry_from_cfg(wls);
            Geometry g = make_geometry(y.n_angles, y.n_detectors, geo.g_k.rows, geo.g_k.cols);
            wopt.backtracking = !no_backtracking;
            io::write_image(wls_out, wls_tv_reconstruct(y, g, wopt).x);
            return 0;
        }

        if (*ev) {
            Image ref = io::read_image(ev_ref);
            std::string csv = "method,slice,psnr,ssim\n";
            for (size_t i = 0; i < ev_recons.size(); ++i) {
                Image rec = io::read_image(ev_recons[i]);
                std::string method = i < ev_methods.size()
                                         ? ev_methods[i]
                                         : fs::path(ev_recons[i]).stem().string();
                char line[256];
                std::snprintf(line, sizeof(line), "%s,%s,%.6f,%.6f\n", method.c_str(),
                              fs::path(ev_recons[i]).stem().string().c_str(),
                              psnr(rec, ref, data_range), ssim(rec, ref, data_range));
                csv += line;
            }
            if (ev_out.empty()) {
                std::fputs(csv.c_str(), stdout);
            } else {
                std::ofstream f(ev_out, std::ios::trunc);
                if (!f) throw std::runtime_error("cannot open '" + ev_out + "' for writing");
                f << csv;
            }
            return 0;
        }

        if (*pf) {
            std::vector<SpectralFilter> filters;
            int pad = pf_pad;
            if (!pf_ckpt.empty()) {
                io::Checkpoint c = io::read_checkpoint(pf_ckpt);
                SpectralFilter learned;
                learned.pad_len = c.cfg.pad_len;
                learned.kind = FilterKind::learned;
                learned.weights = c.params.rem_filter->value.values;
                filters.push_back(learned);
                pad = c.cfg.pad_len;
            }
            filters.push_back(make_filter(FilterKind::ramlak, pad));
            filters.push_back(make_filter(FilterKind::cosine, pad));
            filters.push_back(make_filter(FilterKind::shepp_logan, pad));
            io::write_filter_csv(pf_out, filters);
            return 0;
        }

        if (*ex) {
            Image img = io::read_image(ex_in);
            auto [lo, hi] = parse_window(ex_window);
            io::write_png(ex_out, hu_window(img, lo, hi));
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
