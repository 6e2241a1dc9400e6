#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Rows are batch entries, columns are features.
//
// Gradients are never stored on graph nodes: backward() returns a Gradients
// map owned by the caller, so a graph whose leaves are shared model weights
// can be differentiated concurrently from several threads.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

namespace ldmt::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Receives the gradient flowing into the node and writes (accumulates) into
// the gradient slots of its parents. A null slot means the parent does not
// need a gradient.
using BackwardFn = std::function<void(const Mat& grad_out, std::span<Mat*> parent_grads)>;

struct Node {
    Mat value;
    std::vector<NodePtr> parents;
    BackwardFn backward;
};

class Var {
public:
    Var() = default;
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    const Mat& value() const { return node_->value; }
    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double scalar() const { return node_->value(0, 0); }
    const NodePtr& node() const { return node_; }
    bool defined() const { return static_cast<bool>(node_); }

private:
    NodePtr node_;
};

// Leaf holding a copy of `value`.
Var leaf(Mat value);
// Leaf sharing an existing node, e.g. a persistent parameter.
inline Var leaf(const NodePtr& node) { return Var(node); }
NodePtr make_param(Mat value);

class Gradients {
public:
    // Gradient of the differentiated scalar with respect to `v`. Returns a
    // zero matrix of the right shape if `v` was not reached.
    Mat of(const Var& v) const;
    Mat of(const NodePtr& n) const;
    bool has(const NodePtr& n) const { return grads_.count(n.get()) > 0; }

private:
    friend Gradients backward(const Var&, std::span<const NodePtr>);
    std::unordered_map<const Node*, Mat> grads_;
};

// Differentiates the 1x1 `loss` with respect to every node in `wrt`. Only
// the subgraph connecting `loss` to `wrt` is traversed.
Gradients backward(const Var& loss, std::span<const NodePtr> wrt);
Gradients backward(const Var& loss, std::initializer_list<NodePtr> wrt);

// Linear algebra.
Var matmul(const Var& a, const Var& b);
// x * w + b with bias broadcast over rows.
Var affine(const Var& x, const Var& w, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// Elementwise product with a constant matrix of the same shape.
Var mul_const(const Var& a, const Mat& m);
Var add_const(const Var& a, const Mat& m);
// Adds a 1xC row to every row.
Var add_row(const Var& a, const Var& row);

// Nonlinearities.
Var silu(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);

// Shape manipulation.
Var concat_cols(const std::vector<Var>& parts);
Var gather_cols(const Var& a, std::span<const Eigen::Index> index);
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
Var repeat_rows(const Var& row, Eigen::Index n);
Var slice_rows(const Var& a, Eigen::Index begin, Eigen::Index count);
// Row gather; repeated indices accumulate gradient.
Var gather_rows(const Var& a, std::span<const Eigen::Index> index);
// Stops gradient flow; the result is a leaf with the same value.
Var detach(const Var& a);

// Reductions to 1x1.
Var sum(const Var& a);
Var sum_squares(const Var& a);
// Euclidean norm of all entries; gradient at the origin is defined as 0.
Var l2_norm(const Var& a);

// Row-wise reductions: (B x C) -> (B x 1).
Var row_sum_squares(const Var& a);
// Per-row Euclidean norm with zero gradient for all-zero rows.
Var row_l2_norm(const Var& a);

// Mean softmax cross-entropy of B x K logits against integer labels.
Var softmax_cross_entropy(const Var& logits, std::span<const int> labels);
Mat softmax(const Mat& logits);

}  // namespace ldmt::ad
