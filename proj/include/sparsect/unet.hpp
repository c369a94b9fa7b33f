#pragma once

#include <string>
#include <vector>

#include "sparsect/autodiff.hpp"
#include "sparsect/rng.hpp"

namespace sparsect {

/// Encoder-decoder with channel doubling per level and skip concatenations.
/// depth = number of downsamplings; spatial dims must be divisible by 2^depth.
struct UNetConfig {
    int depth = 3;
    int base_channels = 16;
    int in_channels = 1;
    int out_channels = 1;
    bool strided_downsample = false;   // default: 2x2 max pooling
    bool transposed_upsample = false;  // default: nearest-neighbor + conv
    double leaky_slope = 0.01;

    bool operator==(const UNetConfig&) const = default;
};

/// Named trainable leaves of one network, in a fixed order so optimizer
/// state and checkpoints line up.
struct ParamSet {
    std::vector<std::string> names;
    std::vector<ad::Var> vars;

    void add(std::string name, ad::Var v) {
        names.push_back(std::move(name));
        vars.push_back(std::move(v));
    }
    size_t total_scalars() const {
        size_t n = 0;
        for (const auto& v : vars) n += v->value.numel();
        return n;
    }
};

/// Xavier-normal conv weights, uniform biases in +-1/sqrt(fan_in).
ParamSet unet_init(const UNetConfig& cfg, Rng& rng);

ad::Var unet_forward(const UNetConfig& cfg, const ParamSet& params, const ad::Var& input);

void check_unet_input(const UNetConfig& cfg, const std::vector<int>& shape);

}  // namespace sparsect
