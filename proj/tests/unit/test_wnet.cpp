#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "sparsect/metrics.hpp"
#include "sparsect/phantom.hpp"
#include "sparsect/projector.hpp"
#include "sparsect/upsample.hpp"
#include "sparsect/wnet.hpp"
#include "test_helpers.hpp"

using namespace sparsect;
namespace ad = sparsect::ad;

namespace {

WNetConfig tiny_config() {
    WNetConfig cfg;
    cfg.sdm.depth = 1;
    cfg.sdm.base_channels = 2;
    cfg.idm.depth = 1;
    cfg.idm.base_channels = 2;
    return cfg;
}

TrainDataset tiny_dataset(int n_samples, int image_size = 16, int k = 4, int C = 2,
                          int dets = 24) {
    TrainDataset ds;
    ds.g_k = make_geometry(k, dets, image_size, image_size);
    ds.g_K = make_geometry(k * C, dets, image_size, image_size);
    Geometry g_full = make_geometry(8 * k, dets, image_size, image_size);
    SpectralFilter ramlak = make_filter(FilterKind::ramlak, default_pad_len(dets));
    for (int i = 0; i < n_samples; ++i) {
        Image phantom = random_phantom(1000 + i, image_size);
        TrainSample s;
        s.y_k = forward_project(phantom, ds.g_k);
        s.y_K = forward_project(phantom, ds.g_K);
        s.x_label = fbp_reconstruct(forward_project(phantom, g_full), g_full, ramlak);
        s.enhanced = enhance(s.y_k, ds.g_k, ds.g_K);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

}  // namespace

TEST_CASE("adam leaves parameters untouched under zero gradients") {
    auto p = ad::param(ad::Tensor({3}, {1.0, -2.0, 0.5}));
    AdamState adam;
    adam.init({p});
    p->zero_grad();
    adam.apply({p});
    CHECK(p->value.values == std::vector<double>{1.0, -2.0, 0.5});
    CHECK(adam.step == 1);
}

TEST_CASE("the first adam step from zero moments is the scaled sign") {
    const double g = 0.37, lr = 1e-4, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double m = 0.0, v = 0.0;
    const double update = adam_update(m, v, g, 1, lr, b1, b2, eps);
    // hand expansion: m_hat = g, v_hat = g^2
    CHECK(update == doctest::Approx(-lr * g / (std::abs(g) + eps)).epsilon(1e-12));
    CHECK(m == doctest::Approx((1 - b1) * g).epsilon(1e-15));
    CHECK(v == doctest::Approx((1 - b2) * g * g).epsilon(1e-15));
}

TEST_CASE("constant gradients drive updates toward lr * sign(g)") {
    const double g = -1.7, lr = 1e-4;
    double m = 0.0, v = 0.0;
    double update = 0.0;
    for (int t = 1; t <= 5000; ++t) update = adam_update(m, v, g, t, lr, 0.9, 0.999, 1e-8);
    CHECK(std::abs(update - lr) < 0.01 * lr);  // sign(g) = -1, so the step is +lr
}

TEST_CASE("rem_forward with the Ram-Lak initialization reproduces fbp_reconstruct") {
    Geometry g = make_geometry(8, 24, 16, 16);
    WNetConfig cfg = tiny_config();
    WNetParams p = wnet_init(cfg, 24, 7);
    Image phantom = random_phantom(5, 16);
    Sinogram y = forward_project(phantom, g);

    auto out = rem_forward(ad::constant(ad::Tensor({8, 24}, y.data)), p.rem_filter, g,
                           p.cfg.pad_len);
    SpectralFilter ramlak = make_filter(FilterKind::ramlak, p.cfg.pad_len);
    Image want = fbp_reconstruct(y, g, ramlak);
    for (size_t i = 0; i < want.data.size(); ++i) CHECK(out->value.values[i] == want.data[i]);
}

TEST_CASE("zero sinogram passes through the reconstruction module as zero") {
    Geometry g = make_geometry(8, 24, 16, 16);
    WNetParams p = wnet_init(tiny_config(), 24, 8);
    auto out = rem_forward(ad::constant(ad::Tensor({8, 24})), p.rem_filter, g, p.cfg.pad_len);
    for (double v : out->value.values) CHECK(v == 0.0);
}

TEST_CASE("sdm output keeps the measurements bit-exactly") {
    TrainDataset ds = tiny_dataset(1);
    WNetParams p = wnet_init(tiny_config(), 24, 9);
    Sinogram out = sdm_apply(p, ds.samples[0].enhanced, ds.samples[0].y_k, 2);
    for (int i = 0; i < ds.g_k.n_angles; ++i)
        for (int d = 0; d < ds.g_k.n_detectors; ++d)
            CHECK(out.at(2 * i, d) == ds.samples[0].y_k.at(i, d));
}

TEST_CASE("wnet_forward produces an image-shaped, finite result") {
    TrainDataset ds = tiny_dataset(1);
    WNetParams p = wnet_init(tiny_config(), 24, 10);
    auto out = wnet_forward(p, ds.samples[0].y_k, ds.g_k, ds.g_K);
    CHECK(out->value.shape == std::vector<int>{16, 16});
    for (double v : out->value.values) {
        CHECK(std::isfinite(v));
        // untrained smoke bound, fixed after the first verified run
        CHECK(std::abs(v) <= 2.0);
    }
}

TEST_CASE("end-to-end gradients reach every module (sampled finite differences)") {
    TrainDataset ds = tiny_dataset(1, 8, 4, 2, 12);
    WNetConfig cfg = tiny_config();
    WNetParams p = wnet_init(cfg, 12, 11);
    const TrainSample& s = ds.samples[0];

    auto eval = [&] {
        auto out = sdm_forward(p, ad::constant(ad::Tensor({8, 12}, s.enhanced.data)), s.y_k, 2);
        out = rem_forward(out, p.rem_filter, ds.g_K, p.cfg.pad_len);
        out = idm_forward(p, out);
        return ad::huber_loss(out, ad::Tensor({8, 8}, s.x_label.data), cfg.huber_delta);
    };
    std::vector<ad::Var> all = p.all_vars();
    for (auto& leaf : all) leaf->zero_grad();
    ad::backward(eval());

    Rng rng(12);
    const double eps = 1e-5;
    for (const auto& leaf : all) {
        for (int probe = 0; probe < 10; ++probe) {
            const size_t i = rng.bits() % leaf->value.numel();
            double& c = leaf->value.values[i];
            const double saved = c;
            c = saved + eps;
            const double fp = eval()->value.values[0];
            c = saved - eps;
            const double fm = eval()->value.values[0];
            c = saved;
            const double want = (fp - fm) / (2 * eps);
            CHECK(std::abs(leaf->grad[i] - want) <= 1e-4 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("training rejects an empty dataset") {
    TrainDataset empty;
    empty.g_k = make_geometry(4, 24, 16, 16);
    empty.g_K = make_geometry(8, 24, 16, 16);
    CHECK_THROWS_AS(train(empty, tiny_config(), TrainConfig{}), std::invalid_argument);
}

TEST_SUITE("slow") {

TEST_CASE("a short training run is seed-deterministic and loss-sane") {
    TrainDataset ds = tiny_dataset(6);
    WNetConfig cfg = tiny_config();
    TrainConfig tc;
    tc.batch_size = 2;
    tc.epochs_jumpstart = 1;
    tc.epochs_joint = 2;
    tc.seed = 77;

    TrainState a = train(ds, cfg, tc);
    TrainState b = train(ds, cfg, tc);
    CHECK(a.log.size() == b.log.size());
    for (size_t i = 0; i < a.log.size(); ++i) {
        CHECK(a.log[i].phase == b.log[i].phase);
        CHECK(a.log[i].mean_loss == b.log[i].mean_loss);
        CHECK(std::isfinite(a.log[i].mean_loss));
    }
    auto va = a.params.all_vars(), vb = b.params.all_vars();
    for (size_t i = 0; i < va.size(); ++i)
        for (size_t j = 0; j < va[i]->value.numel(); ++j)
            CHECK(va[i]->value.values[j] == vb[i]->value.values[j]);

    // measurement consensus survives training
    Sinogram out = sdm_apply(a.params, ds.samples[0].enhanced, ds.samples[0].y_k, 2);
    for (int i = 0; i < ds.g_k.n_angles; ++i)
        for (int d = 0; d < ds.g_k.n_detectors; ++d)
            CHECK(out.at(2 * i, d) == ds.samples[0].y_k.at(i, d));
}

TEST_CASE("five sinogram-denoiser epochs halve the sinogram loss at desk scale") {
    // the desk-scale loss halves within the jump-start budget; tiny-net
    // configs need far more steps, so this regression runs at full shape
    // with a reduced sample count
    TrainDataset train_ds = tiny_dataset(24, 64, 16, 4, 96);
    TrainDataset val_ds;
    val_ds.g_k = train_ds.g_k;
    val_ds.g_K = train_ds.g_K;
    {
        TrainDataset more = tiny_dataset(30, 64, 16, 4, 96);
        for (int i = 24; i < 30; ++i) val_ds.samples.push_back(more.samples[i]);
    }
    WNetConfig cfg;  // default desk networks
    TrainConfig tc;
    tc.epochs_jumpstart = 5;
    tc.epochs_joint = 0;
    tc.seed = 3;

    WNetParams untrained = wnet_init(cfg, 96, tc.seed);
    const double before = mean_sdm_loss(untrained, val_ds);
    TrainState st = train(train_ds, cfg, tc);
    const double after = mean_sdm_loss(st.params, val_ds);
    CHECK(after <= 0.5 * before);

    // the jump-start losses decrease from the first to the last epoch
    double first_sdm = 0, last_sdm = 0;
    for (const auto& e : st.log) {
        if (e.phase == "sdm" && e.epoch == 1) first_sdm = e.mean_loss;
        if (e.phase == "sdm" && e.epoch == 5) last_sdm = e.mean_loss;
    }
    CHECK(last_sdm < first_sdm);
}

}  // TEST_SUITE("slow")
