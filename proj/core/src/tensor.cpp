#include "unirec/tensor/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

UNIREC_NAMESPACE_BEGIN

namespace {

std::atomic<std::uint64_t> g_next_seq{1};
std::atomic<bool> g_finite_checks{false};
thread_local bool t_grad_enabled = true;

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<Real> value, bool requires_grad) {
    if (shape_numel(shape) != value.size()) {
        throw ShapeError("tensor data length " + std::to_string(value.size()) +
                         " does not match shape " + shape_string(shape));
    }
    for (std::size_t extent : shape) {
        if (extent == 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
    return node;
}

}  // namespace

std::string shape_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << "x";
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t extent : shape) n *= extent;
    return shape.empty() ? 1 : n;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), Real(0), requires_grad);
}

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
    std::vector<Real> data(shape_numel(shape), value);
    return Tensor(new_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<Real> data, bool requires_grad) {
    return Tensor(new_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(Real value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, std::mt19937_64& rng, Real stddev, bool requires_grad) {
    std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
    std::vector<Real> data(shape_numel(shape));
    for (Real& v : data) v = static_cast<Real>(dist(rng));
    return from_data(std::move(shape), std::move(data), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= node_->shape.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_string(node_->shape));
    }
    return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
    const Shape& s = node_->shape;
    return s.size() <= 1 ? 1 : numel() / s.back();
}

std::size_t Tensor::cols() const {
    const Shape& s = node_->shape;
    return s.empty() ? 1 : s.back();
}

std::span<const Real> Tensor::data() const { return node_->value; }

std::span<Real> Tensor::mutable_data() {
    if (!node_->leaf) throw NumericError("only leaf tensors may be written in place");
    return node_->value;
}

Real Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
    return node_->value[0];
}

Real Tensor::at(std::size_t row, std::size_t col) const { return node_->value[row * cols() + col]; }

bool Tensor::requires_grad() const { return node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
    if (!node_->leaf) throw NumericError("requires_grad can only be set on leaves");
    node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return node_->leaf; }

const char* Tensor::op_name() const { return node_->op; }

std::span<const Real> Tensor::grad() const { return node_->grad; }

std::span<Real> Tensor::mutable_grad() { return node_->ensure_grad(); }

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const { return from_data(shape(), node_->value, false); }

void Tensor::backward() {
    if (numel() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " + shape_string(shape()));
    }
    if (!node_->requires_grad) throw NumericError("backward on a tensor detached from any parameter");
    if (node_->consumed) throw NumericError("graph already consumed by a previous backward call");

    // Collect every node reachable through requires_grad edges. Shared
    // ownership keeps nodes alive while the graph is torn down below.
    std::vector<std::shared_ptr<detail::Node>> order;
    std::unordered_set<detail::Node*> seen;
    std::vector<std::shared_ptr<detail::Node>> stack{node_};
    seen.insert(node_.get());
    while (!stack.empty()) {
        std::shared_ptr<detail::Node> n = std::move(stack.back());
        stack.pop_back();
        if (!n->leaf && n->consumed) {
            throw NumericError("graph already consumed by a previous backward call");
        }
        for (const auto& p : n->parents) {
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
        }
        order.push_back(std::move(n));
    }
    // Sequence numbers increase with construction, so descending order is a
    // valid reverse topological order.
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a->seq > b->seq; });

    node_->ensure_grad()[0] += Real(1);
    for (const auto& n : order) {
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
    for (const auto& n : order) {
        if (n->leaf) continue;
        n->backward_fn = nullptr;
        n->parents.clear();
        n->grad.clear();
        n->grad.shrink_to_fit();
        n->consumed = true;
    }
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

void set_finite_checks(bool enabled) { g_finite_checks.store(enabled); }
bool finite_checks() { return g_finite_checks.load(); }

namespace detail {

Tensor make_result(const char* op, Shape shape, std::vector<Real> value, std::vector<Tensor> parents,
                   BackwardFn backward) {
    if (g_finite_checks.load(std::memory_order_relaxed)) {
        for (Real v : value) {
            if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
        }
    }
    bool needs_grad = false;
    if (t_grad_enabled) {
        for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad();
    }
    auto node = new_node(std::move(shape), std::move(value), needs_grad);
    node->op = op;
    node->leaf = false;
    if (needs_grad) {
        node->parents.reserve(parents.size());
        for (const Tensor& p : parents) node->parents.push_back(p.node_ptr());
        node->backward_fn = std::move(backward);
    }
    return Tensor(std::move(node));
}

}  // namespace detail

UNIREC_NAMESPACE_END
