#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "bmgf/error.hpp"

namespace bmgf {

class Tensor;

namespace detail {

struct TensorNode {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // persistent, accumulated; sized iff requires_grad
    std::vector<double> adj;   // scratch adjoint of the backward pass in flight
    bool requires_grad = false;
    std::string op;  // primitive that produced this node; empty for leaves
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;  // reads adj, adds into parents' adj

    int numel() const {
        int n = 1;
        for (int e : shape) n *= e;
        return n;
    }
};

inline std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << " x ";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

}  // namespace detail

// Dense multi-dimensional array of 64-bit floats with optional gradient.
// Copies are shallow handles to a shared node; values of a node produced
// by an op are never mutated afterwards, so backward may be replayed.
class Tensor {
public:
    Tensor() : node_(std::make_shared<detail::TensorNode>()) {}

    Tensor(std::vector<int> shape, std::vector<double> values, bool requires_grad = false)
        : node_(std::make_shared<detail::TensorNode>()) {
        node_->shape = std::move(shape);
        node_->value = std::move(values);
        for (int e : node_->shape) {
            if (e <= 0) throw ShapeError("tensor: non-positive extent in " + detail::shape_str(node_->shape));
        }
        if (node_->numel() != static_cast<int>(node_->value.size())) {
            throw ShapeError("tensor: " + std::to_string(node_->value.size()) +
                             " values do not fill shape " + detail::shape_str(node_->shape));
        }
        if (requires_grad) set_requires_grad(true);
    }

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        int n = 1;
        for (int e : shape) n *= e;
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor full(std::vector<int> shape, double v, bool requires_grad = false) {
        int n = 1;
        for (int e : shape) n *= e;
        return Tensor(std::move(shape), std::vector<double>(n, v), requires_grad);
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return Tensor({1}, {v}, requires_grad);
    }

    static Tensor vec(std::vector<double> values, bool requires_grad = false) {
        int n = static_cast<int>(values.size());
        return Tensor({n}, std::move(values), requires_grad);
    }

    static Tensor matrix(int rows, int cols, std::vector<double> values, bool requires_grad = false) {
        return Tensor({rows, cols}, std::move(values), requires_grad);
    }

    const std::vector<int>& shape() const { return node_->shape; }
    int dim() const { return static_cast<int>(node_->shape.size()); }
    int extent(int axis) const { return node_->shape[axis]; }
    int numel() const { return node_->numel(); }
    int rows() const { return node_->shape.at(0); }
    int cols() const { return node_->shape.at(1); }
    bool is_scalar() const { return numel() == 1; }
    bool is_matrix() const { return dim() == 2; }

    const std::vector<double>& values() const { return node_->value; }
    // Direct mutation is reserved for leaves (init, optimizer steps, finite
    // differences); mutating an op output would desynchronize its backward.
    std::vector<double>& mutable_values() { return node_->value; }

    double value_at(int i) const { return node_->value[i]; }
    double at(int r, int c) const { return node_->value[static_cast<size_t>(r) * cols() + c]; }
    double scalar_value() const {
        if (!is_scalar()) throw ContractError("scalar_value: tensor has " + std::to_string(numel()) + " elements");
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }

    void set_requires_grad(bool on) {
        node_->requires_grad = on;
        if (on) {
            node_->grad.assign(node_->value.size(), 0.0);
        } else {
            node_->grad.clear();
        }
    }

    const std::vector<double>& grad() const {
        if (!node_->requires_grad) throw ContractError("grad: tensor does not require grad");
        return node_->grad;
    }
    std::vector<double>& mutable_grad() {
        if (!node_->requires_grad) throw ContractError("grad: tensor does not require grad");
        return node_->grad;
    }

    void zero_grad() {
        if (node_->requires_grad) node_->grad.assign(node_->value.size(), 0.0);
    }

    const std::string& op() const { return node_->op; }
    detail::TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    std::shared_ptr<detail::TensorNode> node_;
};

namespace detail {

#ifndef NDEBUG
inline void debug_check_finite(const TensorNode& n) {
    for (double v : n.value) assert(std::isfinite(v) && "non-finite value out of a forward op");
}
#endif

// Registers the result of a primitive. The node keeps its parents and
// backward closure only when some input requires grad.
inline Tensor make_op(const char* op, std::vector<int> shape, std::vector<double> values,
                      std::vector<Tensor> parents,
                      std::function<void(TensorNode&)> backward_fn) {
    bool needs = false;
    for (const Tensor& p : parents) needs |= p.requires_grad();
    Tensor out(std::move(shape), std::move(values));
    TensorNode* n = out.node();
    n->op = op;
#ifndef NDEBUG
    debug_check_finite(*n);
#endif
    if (needs) {
        out.set_requires_grad(true);
        n->parents.reserve(parents.size());
        for (const Tensor& p : parents) n->parents.push_back(p.node_ptr());
        n->backward_fn = std::move(backward_fn);
    }
    return out;
}

}  // namespace detail

// Topologically ordered view of every node reachable from a root, leaves
// first. Acyclic by construction; each node appears exactly once.
struct Graph {
    std::vector<detail::TensorNode*> nodes;

    static Graph from(const Tensor& root) {
        Graph g;
        std::unordered_set<detail::TensorNode*> seen;
        // Iterative post-order DFS.
        struct Frame {
            detail::TensorNode* node;
            size_t next_parent;
        };
        std::vector<Frame> stack;
        if (seen.insert(root.node()).second) stack.push_back({root.node(), 0});
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next_parent < f.node->parents.size()) {
                detail::TensorNode* p = f.node->parents[f.next_parent++].get();
                if (seen.insert(p).second) stack.push_back({p, 0});
            } else {
                g.nodes.push_back(f.node);
                stack.pop_back();
            }
        }
        return g;
    }
};

// Reverse-mode sweep. Populates grad of every reachable requires_grad
// tensor with d(loss)/d(tensor); gradients accumulate across calls until
// cleared, so calling twice doubles them exactly.
inline void backward(const Tensor& loss) {
    if (!loss.is_scalar()) {
        throw ContractError("backward: loss must be scalar, got shape " + detail::shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) return;  // nothing reachable requires grad

    Graph g = Graph::from(loss);
    for (detail::TensorNode* n : g.nodes) n->adj.assign(n->value.size(), 0.0);
    loss.node()->adj[0] = 1.0;
    for (auto it = g.nodes.rbegin(); it != g.nodes.rend(); ++it) {
        detail::TensorNode* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
    for (detail::TensorNode* n : g.nodes) {
        if (n->requires_grad) {
            for (size_t i = 0; i < n->adj.size(); ++i) n->grad[i] += n->adj[i];
        }
        n->adj = {};
    }
}

}  // namespace bmgf
