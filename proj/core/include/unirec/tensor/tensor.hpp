#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "unirec/base.hpp"

UNIREC_NAMESPACE_BEGIN

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

// One record of the computation graph. Interior nodes hold their parents and
// a backward rule; leaves hold accumulated gradients.
struct Node {
    Shape shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
    const char* op = "leaf";
    std::uint64_t seq = 0;
    bool requires_grad = false;
    bool leaf = true;
    bool consumed = false;

    std::vector<Real>& ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), Real(0));
        return grad;
    }
};

}  // namespace detail

/// Dense row-major tensor with reverse-mode differentiation.
///
/// A Tensor is a cheap handle; copies share the underlying node. Values of
/// non-leaf tensors are immutable once the producing op returns, so finished
/// tensors may be read from several threads.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, Real value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<Real> data, bool requires_grad = false);
    static Tensor scalar(Real value, bool requires_grad = false);
    static Tensor randn(Shape shape, std::mt19937_64& rng, Real stddev, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t ndim() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;
    /// Product of all extents but the last.
    std::size_t rows() const;
    /// Last extent.
    std::size_t cols() const;

    std::span<const Real> data() const;
    /// Writable storage; only leaves may be written (parameter updates).
    std::span<Real> mutable_data();
    Real item() const;
    Real at(std::size_t row, std::size_t col) const;

    bool requires_grad() const;
    void set_requires_grad(bool value);
    bool is_leaf() const;
    const char* op_name() const;

    /// Accumulated gradient; empty when none has been produced.
    std::span<const Real> grad() const;
    std::span<Real> mutable_grad();
    void zero_grad();

    /// Runs reverse-mode differentiation from this scalar. The graph is
    /// consumed: interior nodes drop their backward rules afterwards and a
    /// second call is rejected.
    void backward();

    /// New leaf holding a copy of the values, cut from the graph.
    Tensor detach() const;

    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  private:
    std::shared_ptr<detail::Node> node_;
};

/// Disables graph construction on the current thread while alive.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

bool grad_enabled();

/// When set, every op output is scanned for NaN/Inf and a NumericError is
/// raised naming the op.
void set_finite_checks(bool enabled);
bool finite_checks();

namespace detail {

using BackwardFn = std::function<void(Node&)>;

/// Creates the output node of an op. Parents and the backward rule are only
/// retained when gradients are enabled and some parent requires them.
Tensor make_result(const char* op, Shape shape, std::vector<Real> value,
                   std::vector<Tensor> parents, BackwardFn backward);

}  // namespace detail

UNIREC_NAMESPACE_END
