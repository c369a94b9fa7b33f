#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "sparsect/unet.hpp"
#include "test_helpers.hpp"

using namespace sparsect;
namespace ad = sparsect::ad;

namespace {
ad::Tensor random_tensor(std::vector<int> shape, Rng& rng) {
    ad::Tensor t(std::move(shape));
    for (double& v : t.values) v = rng.uniform(-1.0, 1.0);
    return t;
}
}  // namespace

TEST_CASE("output shape equals input shape for valid inputs") {
    UNetConfig cfg;  // depth 3, base 16
    Rng rng(1);
    ParamSet ps = unet_init(cfg, rng);
    Rng rng2(2);
    auto out = unet_forward(cfg, ps, ad::constant(random_tensor({1, 16, 24}, rng2)));
    CHECK(out->value.shape == std::vector<int>{1, 16, 24});
}

TEST_CASE("a freshly initialized net maps zero input to finite values") {
    UNetConfig cfg;
    cfg.depth = 2;
    cfg.base_channels = 4;
    Rng rng(3);
    ParamSet ps = unet_init(cfg, rng);
    auto out = unet_forward(cfg, ps, ad::constant(ad::Tensor({1, 8, 8})));
    bool nonzero = false;
    for (double v : out->value.values) {
        CHECK(std::isfinite(v));
        nonzero |= v != 0.0;
    }
    CHECK(nonzero);  // biases make the zero image non-fixed
}

TEST_CASE("indivisible spatial dims are rejected") {
    UNetConfig cfg;  // depth 3 needs multiples of 8
    Rng rng(4);
    ParamSet ps = unet_init(cfg, rng);
    Rng rng2(5);
    CHECK_THROWS_AS(unet_forward(cfg, ps, ad::constant(random_tensor({1, 12, 16}, rng2))),
                    std::invalid_argument);
}

TEST_CASE("parameter gradients pass finite differences at a tiny config") {
    for (bool strided : {false, true}) {
        for (bool transposed : {false, true}) {
            UNetConfig cfg;
            cfg.depth = 1;
            cfg.base_channels = 2;
            cfg.strided_downsample = strided;
            cfg.transposed_upsample = transposed;
            Rng rng(6);
            ParamSet ps = unet_init(cfg, rng);
            Rng rng2(7);
            ad::Tensor input = random_tensor({1, 8, 8}, rng2);
            auto eval = [&] {
                auto out = unet_forward(cfg, ps, ad::constant(input));
                return ad::scale(ad::sum(out), 1.0 / out->value.numel());
            };
            for (auto& leaf : ps.vars) leaf->zero_grad();
            ad::backward(eval());
            const double eps = 1e-5;
            for (auto& leaf : ps.vars) {
                for (size_t i = 0; i < leaf->value.numel(); ++i) {
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
    }
}

TEST_CASE("initialization is deterministic in the seed") {
    UNetConfig cfg;
    cfg.depth = 2;
    cfg.base_channels = 4;
    Rng a(99), b(99);
    ParamSet pa = unet_init(cfg, a), pb = unet_init(cfg, b);
    REQUIRE(pa.vars.size() == pb.vars.size());
    for (size_t i = 0; i < pa.vars.size(); ++i) {
        CHECK(pa.names[i] == pb.names[i]);
        for (size_t j = 0; j < pa.vars[i]->value.numel(); ++j)
            CHECK(pa.vars[i]->value.values[j] == pb.vars[i]->value.values[j]);
    }
}
