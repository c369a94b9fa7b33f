#include "sparsect/unet.hpp"

#include <cmath>
#include <stdexcept>

namespace sparsect {

namespace {

ad::Var make_conv_params(ParamSet& ps, const std::string& name, int c_in, int c_out, int k,
                         Rng& rng, bool transposed = false) {
    // Xavier normal: std = sqrt(2 / (fan_in + fan_out))
    const int fan_in = c_in * k * k;
    const int fan_out = c_out * k * k;
    const double std = std::sqrt(2.0 / (fan_in + fan_out));
    ad::Tensor w(transposed ? std::vector<int>{c_in, c_out, k, k}
                            : std::vector<int>{c_out, c_in, k, k});
    for (double& v : w.values) v = rng.normal(0.0, std);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    ad::Tensor b({c_out});
    for (double& v : b.values) v = rng.uniform(-bound, bound);
    ps.add(name + ".w", ad::param(std::move(w)));
    ps.add(name + ".b", ad::param(std::move(b)));
    return ps.vars[ps.vars.size() - 2];
}

struct ParamCursor {
    const ParamSet& ps;
    size_t i = 0;
    std::pair<ad::Var, ad::Var> next_pair() {
        if (i + 2 > ps.vars.size()) throw std::logic_error("unet: parameter cursor overrun");
        auto w = ps.vars[i];
        auto b = ps.vars[i + 1];
        i += 2;
        return {w, b};
    }
};

ad::Var conv_block(ParamCursor& cur, const ad::Var& x, double slope) {
    auto [w1, b1] = cur.next_pair();
    auto h = ad::leaky_relu(ad::conv2d(x, w1, b1, 1, 1), slope);
    auto [w2, b2] = cur.next_pair();
    return ad::leaky_relu(ad::conv2d(h, w2, b2, 1, 1), slope);
}

}  // namespace

void check_unet_input(const UNetConfig& cfg, const std::vector<int>& shape) {
    if (shape.size() != 3 || shape[0] != cfg.in_channels)
        throw std::invalid_argument("unet: expected input (in_channels,H,W)");
    const int div = 1 << cfg.depth;
    if (shape[1] % div || shape[2] % div)
        throw std::invalid_argument("unet: spatial dims " + std::to_string(shape[1]) + "x" +
                                    std::to_string(shape[2]) + " not divisible by 2^depth = " +
                                    std::to_string(div));
}

ParamSet unet_init(const UNetConfig& cfg, Rng& rng) {
    if (cfg.depth < 1) throw std::invalid_argument("unet: depth must be >= 1");
    ParamSet ps;
    int ch_in = cfg.in_channels;
    for (int level = 0; level < cfg.depth; ++level) {
        const int ch = cfg.base_channels << level;
        make_conv_params(ps, "enc" + std::to_string(level) + ".conv1", ch_in, ch, 3, rng);
        make_conv_params(ps, "enc" + std::to_string(level) + ".conv2", ch, ch, 3, rng);
        if (cfg.strided_downsample)
            make_conv_params(ps, "enc" + std::to_string(level) + ".down", ch, ch, 3, rng);
        ch_in = ch;
    }
    const int ch_bottom = cfg.base_channels << cfg.depth;
    make_conv_params(ps, "bottom.conv1", ch_in, ch_bottom, 3, rng);
    make_conv_params(ps, "bottom.conv2", ch_bottom, ch_bottom, 3, rng);
    int ch_up_in = ch_bottom;
    for (int level = cfg.depth - 1; level >= 0; --level) {
        const int ch = cfg.base_channels << level;
        if (cfg.transposed_upsample)
            make_conv_params(ps, "dec" + std::to_string(level) + ".up", ch_up_in, ch, 2, rng,
                             /*transposed=*/true);
        else
            make_conv_params(ps, "dec" + std::to_string(level) + ".up", ch_up_in, ch, 3, rng);
        make_conv_params(ps, "dec" + std::to_string(level) + ".conv1", 2 * ch, ch, 3, rng);
        make_conv_params(ps, "dec" + std::to_string(level) + ".conv2", ch, ch, 3, rng);
        ch_up_in = ch;
    }
    make_conv_params(ps, "head", cfg.base_channels, cfg.out_channels, 1, rng);
    return ps;
}

ad::Var unet_forward(const UNetConfig& cfg, const ParamSet& params, const ad::Var& input) {
    check_unet_input(cfg, input->value.shape);
    ParamCursor cur{params};
    std::vector<ad::Var> skips;
    ad::Var h = input;
    for (int level = 0; level < cfg.depth; ++level) {
        h = conv_block(cur, h, cfg.leaky_slope);
        skips.push_back(h);
        if (cfg.strided_downsample) {
            auto [w, b] = cur.next_pair();
            h = ad::leaky_relu(ad::conv2d(h, w, b, 2, 1), cfg.leaky_slope);
        } else {
            h = ad::max_pool2(h);
        }
    }
    h = conv_block(cur, h, cfg.leaky_slope);
    for (int level = cfg.depth - 1; level >= 0; --level) {
        auto [w, b] = cur.next_pair();
        if (cfg.transposed_upsample)
            h = ad::leaky_relu(ad::transpose_conv2d(h, w, b), cfg.leaky_slope);
        else
            h = ad::leaky_relu(ad::conv2d(ad::nearest_upsample2(h), w, b, 1, 1), cfg.leaky_slope);
        h = ad::concat_channels(skips[level], h);
        h = conv_block(cur, h, cfg.leaky_slope);
    }
    auto [w, b] = cur.next_pair();
    return ad::conv2d(h, w, b, 1, 0);  // linear head
}

}  // namespace sparsect
