#include "sparsect/autodiff.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace sparsect::ad {

namespace {
std::atomic<bool> g_check_finite{false};
}  // namespace

namespace detail {

void check_node_values(const Node& n) {
    if (!g_check_finite.load(std::memory_order_relaxed)) return;
    for (double v : n.value.values)
        if (!std::isfinite(v))
            throw std::runtime_error(std::string("non-finite value produced by op '") + n.op + "'");
}

Var wrap_node(const char* op, Tensor value, std::vector<Var> parents) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    check_node_values(*n);
    return n;
}

}  // namespace detail

namespace {
using detail::wrap_node;

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a->value.shape != b->value.shape)
        throw std::invalid_argument(std::string(op) + ": operand shapes differ");
}
}  // namespace

void set_check_finite(bool on) { g_check_finite.store(on); }
bool check_finite_enabled() { return g_check_finite.load(); }

Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->op = "constant";
    n->value = std::move(t);
    return n;
}

Var param(Tensor t) {
    auto n = std::make_shared<Node>();
    n->op = "param";
    n->value = std::move(t);
    n->requires_grad = true;
    n->ensure_grad();
    return n;
}

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out(a->value.shape);
    for (size_t i = 0; i < out.numel(); ++i)
        out.values[i] = a->value.values[i] + b->value.values[i];
    Var n = wrap_node("add", std::move(out), {a, b});
    Node* self = n.get();
    n->backprop = [self] {
        for (int side = 0; side < 2; ++side) {
            Node& p = *self->parents[side];
            if (!p.requires_grad) continue;
            p.ensure_grad();
            for (size_t i = 0; i < self->grad.size(); ++i) p.grad[i] += self->grad[i];
        }
    };
    return n;
}

Var scale(const Var& a, double k) {
    Tensor out(a->value.shape);
    for (size_t i = 0; i < out.numel(); ++i) out.values[i] = k * a->value.values[i];
    Var n = wrap_node("scale", std::move(out), {a});
    Node* self = n.get();
    n->backprop = [self, k] {
        Node& p = *self->parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < self->grad.size(); ++i) p.grad[i] += k * self->grad[i];
    };
    return n;
}

Var sum(const Var& a) {
    double s = 0.0;
    for (double v : a->value.values) s += v;
    Var n = wrap_node("sum", Tensor({1}, {s}), {a});
    Node* self = n.get();
    n->backprop = [self] {
        Node& p = *self->parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self->grad[0];
        for (double& pg : p.grad) pg += g;
    };
    return n;
}

Var weighted_sum(const Var& a, const Tensor& weights) {
    if (a->value.shape != weights.shape)
        throw std::invalid_argument("weighted_sum: weight shape differs from operand");
    double s = 0.0;
    for (size_t i = 0; i < weights.numel(); ++i) s += a->value.values[i] * weights.values[i];
    Var n = wrap_node("weighted_sum", Tensor({1}, {s}), {a});
    Node* self = n.get();
    auto w = std::make_shared<Tensor>(weights);
    n->backprop = [self, w] {
        Node& p = *self->parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self->grad[0];
        for (size_t i = 0; i < w->numel(); ++i) p.grad[i] += g * w->values[i];
    };
    return n;
}

Var reshape(const Var& a, std::vector<int> shape) {
    if (Tensor::numel_of(shape) != a->value.numel())
        throw std::invalid_argument("reshape: element count mismatch");
    Var n = wrap_node("reshape", Tensor(std::move(shape), a->value.values), {a});
    Node* self = n.get();
    n->backprop = [self] {
        Node& p = *self->parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < self->grad.size(); ++i) p.grad[i] += self->grad[i];
    };
    return n;
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out(a->value.shape);
    for (size_t i = 0; i < out.numel(); ++i) {
        double v = a->value.values[i];
        out.values[i] = v > 0.0 ? v : slope * v;
    }
    Var n = wrap_node("leaky_relu", std::move(out), {a});
    Node* self = n.get();
    n->backprop = [self, slope] {
        Node& p = *self->parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < self->grad.size(); ++i)
            p.grad[i] += self->grad[i] * (p.value.values[i] > 0.0 ? 1.0 : slope);
    };
    return n;
}

Var huber_loss(const Var& pred, const Tensor& target, double delta) {
    if (pred->value.shape != target.shape)
        throw std::invalid_argument("huber_loss: prediction and target shapes differ");
    if (!(delta > 0.0)) throw std::invalid_argument("huber_loss: delta must be > 0");
    const size_t n_el = pred->value.numel();
    double total = 0.0;
    for (size_t i = 0; i < n_el; ++i) {
        double d = pred->value.values[i] - target.values[i];
        double a = std::abs(d);
        total += a < delta ? 0.5 * d * d : delta * a - 0.5 * delta * delta;
    }
    Var n = wrap_node("huber_loss", Tensor({1}, {total / n_el}), {pred});
    Node* self = n.get();
    auto tgt = std::make_shared<Tensor>(target);
    n->backprop = [self, tgt, delta, n_el] {
        Node& p = *self->parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self->grad[0] / static_cast<double>(n_el);
        for (size_t i = 0; i < n_el; ++i) {
            double d = p.value.values[i] - tgt->values[i];
            double dphi = std::abs(d) < delta ? d : (d > 0.0 ? delta : -delta);
            p.grad[i] += g * dphi;
        }
    };
    return n;
}

void backward(const Var& loss) {
    if (loss->value.numel() != 1)
        throw std::invalid_argument("backward requires a scalar loss node");
    // iterative post-order DFS, parents visited in stored order
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({loss.get(), 0});
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* parent = node->parents[idx++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.push_back({parent, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->ensure_grad();
    loss->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->requires_grad && n->backprop) n->backprop();
    }
}

}  // namespace sparsect::ad
