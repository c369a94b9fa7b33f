#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sparsect/geometry.hpp"

namespace sparsect::ad {

struct Tensor {
    std::vector<int> shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        values.assign(numel_of(shape), 0.0);
    }
    Tensor(std::vector<int> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {}

    static size_t numel_of(const std::vector<int>& s) {
        size_t n = 1;
        for (int d : s) n *= static_cast<size_t>(d);
        return n;
    }
    size_t numel() const { return values.size(); }
    int dim(int i) const { return shape[i]; }
};

/// Node of the define-by-run reverse-mode graph. Gradients accumulate
/// additively across fan-out; leaves created with param() keep their grad
/// buffer across steps so a trainer can batch before updating.
class Node {
public:
    Tensor value;
    bool requires_grad = false;
    std::vector<double> grad;            // same numel as value when present
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backprop;      // consumes this->grad, accumulates into parents
    const char* op = "leaf";
    std::vector<int> aux;                // per-op scratch (pool argmax indices)

    void ensure_grad() {
        if (grad.size() != value.numel()) grad.assign(value.numel(), 0.0);
    }
    void zero_grad() { grad.assign(value.numel(), 0.0); }
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor t);
Var param(Tensor t);

/// Abort the forward pass with a diagnostic if any produced value is not
/// finite. Off by default; tests and the trainer enable it.
void set_check_finite(bool on);
bool check_finite_enabled();

// ---- primitives ----------------------------------------------------------

Var add(const Var& a, const Var& b);
Var scale(const Var& a, double k);
Var sum(const Var& a);  // scalar, shape {1}
Var weighted_sum(const Var& a, const Tensor& weights);  // <a, w>, scalar
Var reshape(const Var& a, std::vector<int> shape);
Var leaky_relu(const Var& a, double slope = 0.01);

/// x: (Ci,H,W), w: (Co,Ci,kh,kw), b: (Co); zero padding
Var conv2d(const Var& x, const Var& w, const Var& b, int stride = 1, int pad = 0);

/// x: (Ci,H,W), w: (Ci,Co,2,2), b: (Co); stride 2, output (Co,2H,2W)
Var transpose_conv2d(const Var& x, const Var& w, const Var& b);

Var nearest_upsample2(const Var& x);
Var max_pool2(const Var& x);  // 2x2, stride 2; ties go to the first maximal element in scan order
Var concat_channels(const Var& a, const Var& b);

/// Mean-reduced Huber loss against a fixed target, quadratic below delta:
/// mean of 0.5*d^2 if |d| < delta else delta*|d| - 0.5*delta^2.
Var huber_loss(const Var& pred, const Tensor& target, double delta = 1.0);

/// Frequency-domain row filtering as a differentiable layer.
/// y: (A,M), w: (pad_len/2+1). The operator is symmetric in y, so the
/// input gradient is the same filtering applied to the upstream gradient;
/// the weight gradient is the per-bin correlation of input and upstream
/// spectra with half-spectrum bin multiplicity.
Var filter_layer(const Var& y, const Var& w, int pad_len);

/// Fixed tomographic backprojection; input gradient is the matched
/// forward projection of the upstream image gradient.
Var backproject_layer(const Var& y, const Geometry& g);

/// Row replacement at stride C with the measured sinogram; replaced rows
/// pass zero gradient.
Var consensus_rows(const Var& y, const Sinogram& measured, int stride);

/// Reverse topological sweep from a scalar loss; fills grad on every
/// requires_grad node reachable from it.
void backward(const Var& loss);

}  // namespace sparsect::ad
