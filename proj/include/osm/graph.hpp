#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "osm/matrix.hpp"

namespace osm {

class Graph;

// One value in a differentiable computation. Values are computed eagerly when
// the op is built; gradients are filled in by Graph::backward. grad persists
// and accumulates across backward calls until zero_grad.
struct Node {
    int id = -1;
    Matrix value;
    Matrix grad;
    std::vector<Node*> parents;
    // Reads this node's pass-local gradient from gbuf[id] and accumulates
    // contributions into gbuf[parent->id].
    std::function<void(std::vector<Matrix>& gbuf)> backprop;

    int rows() const { return value.rows; }
    int cols() const { return value.cols; }
};

// Arena-owned acyclic graph over dense 2-D matrices. Nodes are created in
// topological order by construction; backward walks creation order in reverse
// and visits each reachable node exactly once.
//
// Single-threaded by contract: one graph belongs to one training step.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Leaves. Both are inputs with no parents; "param" only signals intent —
    // callers keep the Node* to read the gradient back out.
    Node& constant(Matrix v);
    Node& param(Matrix v) { return constant(std::move(v)); }

    Node& matmul(Node& a, Node& b);
    Node& add(Node& a, Node& b);
    Node& sub(Node& a, Node& b);
    Node& mul(Node& a, Node& b);
    Node& div(Node& a, Node& b);

    // Broadcast a 1 x n row vector across the m rows of x.
    Node& add_rowvec(Node& x, Node& r);
    Node& sub_rowvec(Node& x, Node& r);

    // alpha * x + beta, elementwise with scalar constants.
    Node& affine(Node& x, double alpha, double beta);
    Node& scale(Node& x, double c) { return affine(x, c, 0.0); }

    // log(max(x, 1e-12)); clamped inputs get zero gradient below the clamp.
    Node& log_clamped(Node& x);
    Node& expn(Node& x);
    Node& square(Node& x);
    // sqrt(max(x, 0)) with the derivative clamped near zero.
    Node& sqrt_clamped(Node& x);
    Node& relu_leaky(Node& x, double alpha);

    Node& sum(Node& x);       // 1x1
    Node& mean(Node& x);      // 1x1
    Node& row_sum(Node& x);   // m x 1
    Node& col_mean(Node& x);  // 1 x n

    // Numerically stable row-wise softmax (max subtraction).
    Node& softmax_rows(Node& x);
    Node& log_softmax_rows(Node& x);

    // out[i] = x(i, idx[i]); idx is data, not differentiated.
    Node& pick_cols(Node& x, std::vector<int> idx);
    // Concatenate blocks with equal row counts along columns.
    Node& hstack(const std::vector<Node*>& blocks);
    // Gather rows; backward scatter-adds.
    Node& select_rows(Node& x, std::vector<int> rows);

    // Identity forward; backward multiplies the incoming gradient by -lambda.
    Node& grad_reverse(Node& x, double lambda);

    // Per-feature batch normalization with learned scale/shift. Train mode
    // normalizes with batch statistics and updates the running state in
    // place; eval mode uses the running state as constants.
    Node& batch_norm(Node& x, Node& gamma, Node& beta, Matrix& running_mean,
                     Matrix& running_var, bool train, double momentum, double eps);

    // root must be 1x1. Accumulates into grad of every ancestor.
    void backward(Node& root);
    void zero_grad();

    size_t node_count() const { return nodes_.size(); }

private:
    Node& make(Matrix value, std::vector<Node*> parents,
               std::function<void(std::vector<Matrix>&)> fn);

    std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace osm
