#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Var is a handle to a graph node. Leaves are constants or parameters;
// every op records a pullback that routes the node's gradient into the
// parents that require it. backward() seeds a 1x1 root with 1 and runs the
// pullbacks in reverse topological order. Leaf gradients accumulate across
// backward() calls until zero_grad()/step resets them, interior gradients
// are reset at the start of every backward().

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace infomae::ad {

using Matrix = Eigen::MatrixXd;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> pullback;  // routes this->grad into parents
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Var constant(Matrix m);
  static Var scalar(double v);           // 1x1 constant
  static Var param(Matrix m);            // differentiable leaf

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }  // leaves only (FD probes, optimizer)
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);  // leaves only; freezing toggles this
  long rows() const { return node_->value.rows(); }
  long cols() const { return node_->value.cols(); }
  double item() const;  // value of a 1x1 node

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Seeds root (must be 1x1) with gradient 1 and backpropagates.
void backward(const Var& root);

// ---- graph-building ops ----

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var add_rowvec(const Var& a, const Var& row);   // row is 1xC, broadcast over rows
Var sub_colvec(const Var& a, const Var& col);   // col is Rx1, broadcast over cols
Var mul_colvec(const Var& a, const Var& col);   // scale each row by col entry
Var reciprocal_(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

Var tanh_(const Var& a);
Var sigmoid_(const Var& a);
Var relu_(const Var& a);
Var exp_(const Var& a);
Var log_(const Var& a);
Var sqrt_(const Var& a);    // derivative taken as 0 at 0
Var square_(const Var& a);
Var clamp_(const Var& a, double lo, double hi);  // zero gradient outside [lo, hi]

Var sum_(const Var& a);    // 1x1
Var mean_(const Var& a);   // 1x1
Var row_sum(const Var& a);               // RxC -> Rx1
Var row_max_detached(const Var& a);      // RxC -> Rx1 constant (logsumexp shift)
Var row_block_mean(const Var& a, int block);  // (n*block)xC -> nxC
Var repeat_rows(const Var& a, int times);     // nxC -> (n*times)xC

Var gather_rows(const Var& a, std::vector<int> idx);
// out(i,j) = a(src[i*out_cols + j].first, src[i*out_cols + j].second)
Var gather_elems(const Var& a, std::vector<std::pair<int, int>> src,
                 int out_rows, int out_cols);

Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, int start, int n);

Var detach(const Var& a);

// Convenience composites.
Var dot_rows(const Var& a, const Var& b);                  // Rx1 of row dot products
Var affine(const Var& x, const Var& w, const Var& b);      // x*w + b(1xC)
Var mse(const Var& a, const Var& b);                       // mean squared error, 1x1

}  // namespace infomae::ad
