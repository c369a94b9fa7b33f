#include "sparsect/wnet.hpp"

#include <chrono>
#include <functional>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "sparsect/projector.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif
#include "sparsect/upsample.hpp"

namespace sparsect {

namespace {

ad::Tensor tensor_of(const Sinogram& y) {
    return ad::Tensor({y.n_angles, y.n_detectors}, y.data);
}

ad::Tensor tensor_of(const Image& x) {
    return ad::Tensor({x.rows, x.cols}, x.data);
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

std::vector<ad::Var> WNetParams::all_vars() const {
    std::vector<ad::Var> out = sdm.vars;
    out.push_back(rem_filter);
    out.insert(out.end(), idm.vars.begin(), idm.vars.end());
    return out;
}

WNetParams wnet_init(const WNetConfig& cfg, int n_detectors, uint64_t seed) {
    WNetParams p;
    p.cfg = cfg;
    if (p.cfg.pad_len == 0) p.cfg.pad_len = default_pad_len(n_detectors);
    Rng rng_sdm(Rng::derive(seed, 1));
    Rng rng_idm(Rng::derive(seed, 2));
    p.sdm = unet_init(cfg.sdm, rng_sdm);
    p.idm = unet_init(cfg.idm, rng_idm);
    SpectralFilter ramlak = make_filter(FilterKind::ramlak, p.cfg.pad_len);
    p.rem_filter = ad::param(ad::Tensor({p.cfg.pad_len / 2 + 1}, ramlak.weights));
    return p;
}

double adam_update(double& m, double& v, double g, int64_t t, double lr, double beta1,
                   double beta2, double eps) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double m_hat = m / (1.0 - std::pow(beta1, static_cast<double>(t)));
    const double v_hat = v / (1.0 - std::pow(beta2, static_cast<double>(t)));
    return -lr * m_hat / (std::sqrt(v_hat) + eps);
}

void AdamState::init(const std::vector<ad::Var>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
        m.emplace_back(p->value.numel(), 0.0);
        v.emplace_back(p->value.numel(), 0.0);
    }
    step = 0;
}

void AdamState::apply(const std::vector<ad::Var>& params) {
    if (m.size() != params.size()) throw std::logic_error("adam state does not match param list");
    ++step;
    for (size_t i = 0; i < params.size(); ++i) {
        ad::Node& p = *params[i];
        p.ensure_grad();
        for (size_t j = 0; j < p.value.numel(); ++j)
            p.value.values[j] += adam_update(m[i][j], v[i][j], p.grad[j], step, lr, beta1, beta2, eps);
    }
}

ad::Var sdm_forward(const WNetParams& p, const ad::Var& y_enh, const Sinogram& y_k, int stride) {
    const auto& sh = y_enh->value.shape;
    if (sh.size() != 2) throw std::invalid_argument("sdm_forward: expected (K,M) sinogram tensor");
    auto h = ad::reshape(y_enh, {1, sh[0], sh[1]});
    h = unet_forward(p.cfg.sdm, p.sdm, h);
    h = ad::reshape(h, {sh[0], sh[1]});
    return ad::consensus_rows(h, y_k, stride);
}

ad::Var rem_forward(const ad::Var& y, const ad::Var& rem_filter, const Geometry& g_K, int pad_len) {
    auto filtered = ad::filter_layer(y, rem_filter, pad_len);
    auto img = ad::backproject_layer(filtered, g_K);
    return ad::scale(img, fbp_scale(g_K));
}

ad::Var idm_forward(const WNetParams& p, const ad::Var& x) {
    const auto& sh = x->value.shape;
    if (sh.size() != 2) throw std::invalid_argument("idm_forward: expected (rows,cols) image tensor");
    auto h = ad::reshape(x, {1, sh[0], sh[1]});
    h = unet_forward(p.cfg.idm, p.idm, h);
    return ad::reshape(h, {sh[0], sh[1]});
}

ad::Var wnet_forward(const WNetParams& p, const Sinogram& y_k, const Geometry& g_k,
                     const Geometry& g_K) {
    const int stride = upsample_stride(g_k, g_K);
    Sinogram y_enh = enhance(y_k, g_k, g_K);
    auto h = sdm_forward(p, ad::constant(tensor_of(y_enh)), y_k, stride);
    h = rem_forward(h, p.rem_filter, g_K, p.cfg.pad_len);
    return idm_forward(p, h);
}

Sinogram sdm_apply(const WNetParams& p, const Sinogram& y_enh, const Sinogram& y_k, int stride) {
    auto out = sdm_forward(p, ad::constant(tensor_of(y_enh)), y_k, stride);
    Sinogram s(y_enh.n_angles, y_enh.n_detectors);
    s.data = out->value.values;
    return s;
}

Image wnet_infer(const WNetParams& p, const Sinogram& y_k, const Geometry& g_k,
                 const Geometry& g_K) {
    auto out = wnet_forward(p, y_k, g_k, g_K);
    Image img(g_K.rows, g_K.cols, g_K.pixel_spacing);
    img.data = out->value.values;
    return img;
}

namespace {

void zero_grads(const std::vector<ad::Var>& params) {
    for (const auto& p : params) p->zero_grad();
}

ParamSet clone_param_set(const ParamSet& src) {
    ParamSet out;
    for (size_t i = 0; i < src.vars.size(); ++i) out.add(src.names[i], ad::param(src.vars[i]->value));
    return out;
}

WNetParams clone_params(const WNetParams& src) {
    WNetParams c;
    c.cfg = src.cfg;
    c.sdm = clone_param_set(src.sdm);
    c.rem_filter = ad::param(src.rem_filter->value);
    c.idm = clone_param_set(src.idm);
    return c;
}

void copy_values(const WNetParams& from, WNetParams& to) {
    for (size_t i = 0; i < from.sdm.vars.size(); ++i)
        to.sdm.vars[i]->value.values = from.sdm.vars[i]->value.values;
    to.rem_filter->value.values = from.rem_filter->value.values;
    for (size_t i = 0; i < from.idm.vars.size(); ++i)
        to.idm.vars[i]->value.values = from.idm.vars[i]->value.values;
}

// Selects the leaves a phase trains, in a fixed order shared between the
// master params and every worker clone.
std::vector<ad::Var> phase_leaves(const WNetParams& p, int phase) {
    switch (phase) {
        case 0: return p.sdm.vars;
        case 1: return {p.rem_filter};
        case 2: return p.idm.vars;
        default: return p.all_vars();
    }
}

// One pass over the dataset in seeded order. Within a batch, samples run
// concurrently on cloned parameters; their gradients are summed into the
// master leaves in sample order, so results do not depend on the number of
// workers. Returns the epoch mean of per-sample losses.
double run_epoch(const TrainDataset& ds, WNetParams& master, int phase, int batch_size,
                 uint64_t shuffle_seed,
                 const std::function<ad::Var(const WNetParams&, size_t)>& build_loss,
                 const std::function<void()>& apply_update, const char* phase_name, int epoch) {
    std::vector<size_t> order(ds.samples.size());
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(shuffle_seed);
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.bits() % i]);

    int n_workers = 1;
#ifdef _OPENMP
    n_workers = std::min<int>(batch_size, omp_get_max_threads());
#endif
    std::vector<WNetParams> workers;
    for (int w = 0; w < n_workers; ++w) workers.push_back(clone_params(master));

    const std::vector<ad::Var> master_leaves = phase_leaves(master, phase);
    double loss_sum = 0.0;
    size_t done = 0;
    while (done < order.size()) {
        const int n_batch = static_cast<int>(std::min<size_t>(batch_size, order.size() - done));
        std::vector<double> losses(n_batch);
        std::vector<std::vector<std::vector<double>>> grads(n_batch);
#ifdef _OPENMP
#pragma omp parallel for schedule(static, 1) num_threads(n_workers)
#endif
        for (int b = 0; b < n_batch; ++b) {
            int w = 0;
#ifdef _OPENMP
            w = omp_get_thread_num();
#endif
            WNetParams& wp = workers[w];
            std::vector<ad::Var> leaves = phase_leaves(wp, phase);
            zero_grads(leaves);
            auto loss = build_loss(wp, order[done + b]);
            losses[b] = loss->value.values[0];
            ad::backward(ad::scale(loss, 1.0 / n_batch));
            grads[b].reserve(leaves.size());
            for (const auto& leaf : leaves) grads[b].push_back(leaf->grad);
        }
        zero_grads(master_leaves);
        for (int b = 0; b < n_batch; ++b) {
            if (!std::isfinite(losses[b]))
                throw std::runtime_error(std::string("training aborted: non-finite loss in phase ") +
                                         phase_name + ", epoch " + std::to_string(epoch));
            loss_sum += losses[b];
            for (size_t l = 0; l < master_leaves.size(); ++l) {
                double* dst = master_leaves[l]->grad.data();
                const std::vector<double>& src = grads[b][l];
                for (size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
            }
        }
        apply_update();
        for (auto& wp : workers) copy_values(master, wp);
        done += n_batch;
    }
    return loss_sum / static_cast<double>(order.size());
}

}  // namespace

TrainState train(const TrainDataset& ds, const WNetConfig& wcfg, const TrainConfig& tcfg) {
    if (ds.samples.empty()) throw std::invalid_argument("train: empty dataset");
    const int stride = upsample_stride(ds.g_k, ds.g_K);

    TrainState st;
    st.params = wnet_init(wcfg, ds.g_K.n_detectors, tcfg.seed);
    WNetParams& p = st.params;
    auto set_hyper = [&](AdamState& a) {
        a.lr = tcfg.lr;
        a.beta1 = tcfg.beta1;
        a.beta2 = tcfg.beta2;
        a.eps = tcfg.eps;
    };
    set_hyper(st.adam_sdm);
    set_hyper(st.adam_rem);
    set_hyper(st.adam_idm);
    st.adam_sdm.init(p.sdm.vars);
    st.adam_rem.init({p.rem_filter});
    st.adam_idm.init(p.idm.vars);

    auto log_epoch = [&](const char* phase, int epoch, double mean_loss, double t0) {
        st.log.push_back({phase, epoch, mean_loss, now_seconds() - t0});
        if (tcfg.verbose)
            std::fprintf(stderr, "[train] %-5s epoch %2d  mean loss %.6g  (%.1fs)\n", phase, epoch,
                         mean_loss, st.log.back().wall_seconds);
    };

    // Phase 1: sinogram denoiser alone, sinogram-domain loss.
    for (int e = 1; e <= tcfg.epochs_jumpstart; ++e) {
        const double t0 = now_seconds();
        double mean = run_epoch(
            ds, p, 0, tcfg.batch_size, Rng::derive(tcfg.seed, 1000 + e),
            [&](const WNetParams& wp, size_t idx) {
                const TrainSample& s = ds.samples[idx];
                auto out = sdm_forward(wp, ad::constant(tensor_of(s.enhanced)), s.y_k, stride);
                return ad::huber_loss(out, tensor_of(s.y_K), wcfg.huber_delta);
            },
            [&] { st.adam_sdm.apply(p.sdm.vars); }, "sdm", e);
        log_epoch("sdm", e, mean, t0);
    }

    // Phase 2: spectral filter alone; the frozen denoised sinograms are
    // cached once since the SdM no longer changes.
    {
        std::vector<ad::Tensor> denoised;
        denoised.reserve(ds.samples.size());
        for (const auto& s : ds.samples) {
            auto out = sdm_forward(p, ad::constant(tensor_of(s.enhanced)), s.y_k, stride);
            denoised.push_back(out->value);
        }
        for (int e = 1; e <= tcfg.epochs_jumpstart; ++e) {
            const double t0 = now_seconds();
            double mean = run_epoch(
                ds, p, 1, tcfg.batch_size, Rng::derive(tcfg.seed, 2000 + e),
                [&](const WNetParams& wp, size_t idx) {
                    auto recon = rem_forward(ad::constant(denoised[idx]), wp.rem_filter, ds.g_K,
                                             wp.cfg.pad_len);
                    return ad::huber_loss(recon, tensor_of(ds.samples[idx].x_label),
                                          wcfg.huber_delta);
                },
                [&] { st.adam_rem.apply({p.rem_filter}); }, "rem", e);
            log_epoch("rem", e, mean, t0);
        }
    }

    // Phase 3: image denoiser alone on cached reconstructions.
    {
        std::vector<ad::Tensor> recons;
        recons.reserve(ds.samples.size());
        for (const auto& s : ds.samples) {
            auto out = sdm_forward(p, ad::constant(tensor_of(s.enhanced)), s.y_k, stride);
            auto recon = rem_forward(out, p.rem_filter, ds.g_K, p.cfg.pad_len);
            recons.push_back(recon->value);
        }
        for (int e = 1; e <= tcfg.epochs_jumpstart; ++e) {
            const double t0 = now_seconds();
            double mean = run_epoch(
                ds, p, 2, tcfg.batch_size, Rng::derive(tcfg.seed, 3000 + e),
                [&](const WNetParams& wp, size_t idx) {
                    auto out = idm_forward(wp, ad::constant(recons[idx]));
                    return ad::huber_loss(out, tensor_of(ds.samples[idx].x_label),
                                          wcfg.huber_delta);
                },
                [&] { st.adam_idm.apply(p.idm.vars); }, "idm", e);
            log_epoch("idm", e, mean, t0);
        }
    }

    // Joint fine-tuning: all modules updated by the image-domain loss only.
    for (int e = 1; e <= tcfg.epochs_joint; ++e) {
        const double t0 = now_seconds();
        double mean = run_epoch(
            ds, p, 3, tcfg.batch_size, Rng::derive(tcfg.seed, 4000 + e),
            [&](const WNetParams& wp, size_t idx) {
                const TrainSample& s = ds.samples[idx];
                auto out = sdm_forward(wp, ad::constant(tensor_of(s.enhanced)), s.y_k, stride);
                out = rem_forward(out, wp.rem_filter, ds.g_K, wp.cfg.pad_len);
                out = idm_forward(wp, out);
                return ad::huber_loss(out, tensor_of(s.x_label), wcfg.huber_delta);
            },
            [&] {
                st.adam_sdm.apply(p.sdm.vars);
                st.adam_rem.apply({p.rem_filter});
                st.adam_idm.apply(p.idm.vars);
            },
            "joint", e);
        log_epoch("joint", e, mean, t0);
    }
    return st;
}

double mean_sdm_loss(const WNetParams& p, const TrainDataset& ds) {
    const int stride = upsample_stride(ds.g_k, ds.g_K);
    double sum = 0.0;
    for (const auto& s : ds.samples) {
        auto out = sdm_forward(p, ad::constant(tensor_of(s.enhanced)), s.y_k, stride);
        sum += ad::huber_loss(out, tensor_of(s.y_K), p.cfg.huber_delta)->value.values[0];
    }
    return sum / static_cast<double>(ds.samples.size());
}

double mean_rem_loss(const WNetParams& p, const TrainDataset& ds) {
    const int stride = upsample_stride(ds.g_k, ds.g_K);
    double sum = 0.0;
    for (const auto& s : ds.samples) {
        auto out = sdm_forward(p, ad::constant(tensor_of(s.enhanced)), s.y_k, stride);
        auto recon = rem_forward(out, p.rem_filter, ds.g_K, p.cfg.pad_len);
        sum += ad::huber_loss(recon, tensor_of(s.x_label), p.cfg.huber_delta)->value.values[0];
    }
    return sum / static_cast<double>(ds.samples.size());
}

double mean_rem_loss_with_filter(const WNetParams& p, const TrainDataset& ds,
                                 const SpectralFilter& w) {
    const int stride = upsample_stride(ds.g_k, ds.g_K);
    if (w.pad_len != p.cfg.pad_len) throw std::invalid_argument("filter pad_len mismatch");
    auto filter_var = ad::constant(ad::Tensor({w.n_bins()}, w.weights));
    double sum = 0.0;
    for (const auto& s : ds.samples) {
        auto out = sdm_forward(p, ad::constant(tensor_of(s.enhanced)), s.y_k, stride);
        auto recon = rem_forward(out, filter_var, ds.g_K, p.cfg.pad_len);
        sum += ad::huber_loss(recon, tensor_of(s.x_label), p.cfg.huber_delta)->value.values[0];
    }
    return sum / static_cast<double>(ds.samples.size());
}

double mean_idm_loss(const WNetParams& p, const TrainDataset& ds) {
    const int stride = upsample_stride(ds.g_k, ds.g_K);
    double sum = 0.0;
    for (const auto& s : ds.samples) {
        auto out = sdm_forward(p, ad::constant(tensor_of(s.enhanced)), s.y_k, stride);
        auto recon = rem_forward(out, p.rem_filter, ds.g_K, p.cfg.pad_len);
        auto img = idm_forward(p, recon);
        sum += ad::huber_loss(img, tensor_of(s.x_label), p.cfg.huber_delta)->value.values[0];
    }
    return sum / static_cast<double>(ds.samples.size());
}

}  // namespace sparsect
