#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsect/autodiff.hpp"
#include "sparsect/filter.hpp"
#include "sparsect/geometry.hpp"
#include "sparsect/unet.hpp"

namespace sparsect {

struct WNetConfig {
    UNetConfig sdm;
    UNetConfig idm;
    int pad_len = 0;  // 0 -> default_pad_len(n_detectors) at init
    double huber_delta = 1.0;
};

/// Trainable state of the three modules: sinogram denoiser, spectral
/// filter of the reconstruction layer, image denoiser.
struct WNetParams {
    WNetConfig cfg;
    ParamSet sdm;
    ad::Var rem_filter;  // shape {pad_len/2+1}, Ram-Lak initialized
    ParamSet idm;

    std::vector<ad::Var> all_vars() const;
};

WNetParams wnet_init(const WNetConfig& cfg, int n_detectors, uint64_t seed);

/// First-moment/second-moment optimizer with bias correction, one instance
/// per module.
struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step = 0;
    std::vector<std::vector<double>> m, v;  // parallel to the param list

    void init(const std::vector<ad::Var>& params);
    /// One update from the gradients currently on the params.
    void apply(const std::vector<ad::Var>& params);
};

/// Single-scalar Adam update rule, shared by AdamState and tests.
double adam_update(double& m, double& v, double g, int64_t t, double lr, double beta1,
                   double beta2, double eps);

// ---- module forwards ------------------------------------------------------

/// UNet denoising + measurement consensus; rows i*stride carry y_k
/// bit-exactly and receive zero gradient.
ad::Var sdm_forward(const WNetParams& p, const ad::Var& y_enh, const Sinogram& y_k, int stride);

/// Trainable-filter FBP: filter_layer + backprojection + the fixed
/// reconstruction scale of g_K.
ad::Var rem_forward(const ad::Var& y, const ad::Var& rem_filter, const Geometry& g_K, int pad_len);

ad::Var idm_forward(const WNetParams& p, const ad::Var& x);

/// Full pipeline on a measured sparse sinogram: enhance -> SdM -> ReM -> IdM.
ad::Var wnet_forward(const WNetParams& p, const Sinogram& y_k, const Geometry& g_k,
                     const Geometry& g_K);

/// No-grad convenience wrappers.
Sinogram sdm_apply(const WNetParams& p, const Sinogram& y_enh, const Sinogram& y_k, int stride);
Image wnet_infer(const WNetParams& p, const Sinogram& y_k, const Geometry& g_k, const Geometry& g_K);

// ---- training -------------------------------------------------------------

struct TrainSample {
    Sinogram y_k;
    Sinogram y_K;    // dense-view ground-truth sinogram
    Image x_label;   // full-view FBP reconstruction used as image target
    Sinogram enhanced;  // cached enhance(y_k)
};

struct TrainDataset {
    Geometry g_k, g_K;
    std::vector<TrainSample> samples;
};

struct TrainConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 4;
    int epochs_jumpstart = 5;
    int epochs_joint = 20;
    uint64_t seed = 1234;
    bool verbose = false;
};

struct EpochLog {
    std::string phase;  // "sdm" | "rem" | "idm" | "joint"
    int epoch = 0;
    double mean_loss = 0.0;
    double wall_seconds = 0.0;
};

struct TrainState {
    WNetParams params;
    AdamState adam_sdm, adam_rem, adam_idm;
    std::vector<EpochLog> log;
};

/// Round-robin schedule: each module trained alone for epochs_jumpstart
/// epochs against its own objective, then joint fine-tuning of all three
/// with the image-domain loss only.
TrainState train(const TrainDataset& ds, const WNetConfig& wcfg, const TrainConfig& tcfg);

/// Mean per-sample losses, used for evaluation and regression tests.
double mean_sdm_loss(const WNetParams& p, const TrainDataset& ds);
double mean_rem_loss(const WNetParams& p, const TrainDataset& ds);
double mean_rem_loss_with_filter(const WNetParams& p, const TrainDataset& ds,
                                 const SpectralFilter& w);
double mean_idm_loss(const WNetParams& p, const TrainDataset& ds);

}  // namespace sparsect
