#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "ivct/rng.hpp"

namespace ivct {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

// Toggle for the per-op non-finite scan. On by default; training loops may
// keep it on (arrays are small at desk scale).
bool& finite_checks();

template <typename T> class Tensor;

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad; // allocated lazily, same size as values
    bool requires_grad = false;
    std::vector<Tensor<T>> parents;
    // Accumulates into parents' grads given this node's grad.
    std::function<void(TensorNode<T>&)> backprop;

    int64_t numel() const { return static_cast<int64_t>(values.size()); }

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), T(0));
    }
};

// Shared handle to a node in the define-by-run tape.
template <typename T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode<T>> n) : node_(std::move(n)) {}

    static Tensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false) {
        auto n = std::make_shared<TensorNode<T>>();
        if (shape_numel(shape) != static_cast<int64_t>(data.size()))
            throw std::invalid_argument("tensor: data size does not match shape " + shape_str(shape));
        n->shape = std::move(shape);
        n->values = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto n = std::make_shared<TensorNode<T>>();
        n->values.assign(static_cast<size_t>(shape_numel(shape)), T(0));
        n->shape = std::move(shape);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor full(Shape shape, T v, bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (auto& x : t.values()) x = v;
        return t;
    }

    static Tensor randn(Shape shape, RngState& rng, T stddev = T(1), bool requires_grad = false) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (auto& x : t.values()) x = static_cast<T>(rng.normal()) * stddev;
        return t;
    }

    static Tensor trunc_normal(Shape shape, RngState& rng, T stddev, bool requires_grad = true) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (auto& x : t.values()) x = static_cast<T>(rng.trunc_normal()) * stddev;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t dim(int i) const { return node_->shape.at(static_cast<size_t>(i)); }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    int64_t numel() const { return node_->numel(); }

    std::vector<T>& values() { return node_->values; }
    const std::vector<T>& values() const { return node_->values; }
    T* data() { return node_->values.data(); }
    const T* data() const { return node_->values.data(); }

    std::vector<T>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::vector<T>& grad() const {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool rg) { node_->requires_grad = rg; }

    T item() const {
        if (numel() != 1) throw std::invalid_argument("item(): tensor is not scalar");
        return node_->values[0];
    }

    TensorNode<T>* raw() const { return node_.get(); }
    const std::shared_ptr<TensorNode<T>>& handle() const { return node_; }

    // Value copy detached from the tape.
    Tensor detached() const { return from_data(node_->shape, node_->values, false); }

private:
    std::shared_ptr<TensorNode<T>> node_;
};

template <typename T>
void check_finite(const std::vector<T>& v, const char* op) {
    if (!finite_checks()) return;
    for (const T x : v)
        if (!std::isfinite(x)) throw std::runtime_error(std::string("non-finite value produced by op '") + op + "'");
}

// Builds the output node of an op. `backprop` may be empty for ops that are
// constant w.r.t. their differentiable inputs.
template <typename T>
Tensor<T> make_op_node(const char* name, Shape shape, std::vector<T> values,
                       std::vector<Tensor<T>> parents,
                       std::function<void(TensorNode<T>&)> backprop) {
    check_finite(values, name);
    auto n = std::make_shared<TensorNode<T>>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    bool rg = false;
    for (const auto& p : parents) rg = rg || p.requires_grad();
    n->requires_grad = rg;
    if (rg) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return Tensor<T>(std::move(n));
}

// Reverse-mode sweep from a scalar loss. Gradients accumulate (+=) into every
// node reachable from `loss`; untouched leaves read as zero via grad().
template <typename T>
void backward(Tensor<T> loss) {
    if (loss.numel() != 1) throw std::invalid_argument("backward(): loss must be scalar");
    if (!loss.requires_grad()) return;

    std::vector<TensorNode<T>*> order;
    std::unordered_set<TensorNode<T>*> seen;
    std::vector<std::pair<TensorNode<T>*, size_t>> stack;
    stack.emplace_back(loss.raw(), 0);
    seen.insert(loss.raw());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode<T>* p = node->parents[idx++].raw();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.raw()->ensure_grad();
    loss.raw()->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode<T>* n = *it;
        if (n->backprop) {
            n->ensure_grad();
            n->backprop(*n);
            if (finite_checks())
                for (const T g : n->grad)
                    if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient during backward()");
        }
    }
}

} // namespace ivct
