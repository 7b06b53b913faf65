#include "infomae/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace infomae::ad {

namespace {

std::shared_ptr<Node> make_interior(Matrix value, std::vector<std::shared_ptr<Node>> parents,
                                    std::function<void(Node&)> pullback) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->is_leaf = false;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  n->requires_grad = needs;
  if (needs) {
    n->parents = std::move(parents);
    n->pullback = std::move(pullback);
  }
  return n;
}

void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("autodiff: " + msg);
}

void accumulate(Node& dst, const Matrix& g) {
  if (!dst.requires_grad) return;
  if (dst.grad.size() == 0) dst.grad = Matrix::Zero(dst.value.rows(), dst.value.cols());
  dst.grad += g;
}

}  // namespace

Var Var::constant(Matrix m) {
  auto n = std::make_shared<Node>();
  n->value = std::move(m);
  return Var(n);
}

Var Var::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Var::param(Matrix m) {
  auto n = std::make_shared<Node>();
  n->value = std::move(m);
  n->requires_grad = true;
  n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  return Var(n);
}

void Var::set_requires_grad(bool on) {
  check(node_->is_leaf, "set_requires_grad on interior node");
  node_->requires_grad = on;
  if (on && node_->grad.size() == 0) node_->grad = Matrix::Zero(rows(), cols());
}

double Var::item() const {
  check(rows() == 1 && cols() == 1, "item() needs a 1x1 node");
  return node_->value(0, 0);
}

void backward(const Var& root) {
  check(root.defined() && root.rows() == 1 && root.cols() == 1, "backward root must be 1x1");
  if (!root.node()->requires_grad) return;

  // Iterative post-order DFS; topo holds children before parents is wrong way
  // round, so we run it back to front.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i].get();
      ++i;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      topo.push_back(n);
      stack.pop_back();
    }
  }
  // topo is post-order: parents before children. Reset interior grads, then
  // pull from children down to leaves in reverse.
  for (Node* n : topo) {
    if (!n->is_leaf) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
    if (n->is_leaf && n->grad.size() == 0) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  }
  root.node()->grad(0, 0) += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->pullback) n->pullback(*n);
  }
}

Var matmul(const Var& a, const Var& b) {
  check(a.cols() == b.rows(), "matmul shape mismatch");
  auto an = a.node();
  auto bn = b.node();
  return Var(make_interior(an->value * bn->value, {an, bn}, [an, bn](Node& n) {
    accumulate(*an, n.grad * bn->value.transpose());
    accumulate(*bn, an->value.transpose() * n.grad);
  }));
}

Var transpose(const Var& a) {
  auto an = a.node();
  return Var(make_interior(an->value.transpose(), {an},
                           [an](Node& n) { accumulate(*an, n.grad.transpose()); }));
}

Var add(const Var& a, const Var& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "add shape mismatch");
  auto an = a.node();
  auto bn = b.node();
  return Var(make_interior(an->value + bn->value, {an, bn}, [an, bn](Node& n) {
    accumulate(*an, n.grad);
    accumulate(*bn, n.grad);
  }));
}

Var sub(const Var& a, const Var& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "sub shape mismatch");
  auto an = a.node();
  auto bn = b.node();
  return Var(make_interior(an->value - bn->value, {an, bn}, [an, bn](Node& n) {
    accumulate(*an, n.grad);
    accumulate(*bn, -n.grad);
  }));
}

Var hadamard(const Var& a, const Var& b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard shape mismatch");
  auto an = a.node();
  auto bn = b.node();
  return Var(make_interior(an->value.cwiseProduct(bn->value), {an, bn}, [an, bn](Node& n) {
    accumulate(*an, n.grad.cwiseProduct(bn->value));
    accumulate(*bn, n.grad.cwiseProduct(an->value));
  }));
}

Var add_rowvec(const Var& a, const Var& row) {
  check(row.rows() == 1 && row.cols() == a.cols(), "add_rowvec needs 1xC row");
  auto an = a.node();
  auto rn = row.node();
  Matrix out = an->value;
  out.rowwise() += rn->value.row(0);
  return Var(make_interior(std::move(out), {an, rn}, [an, rn](Node& n) {
    accumulate(*an, n.grad);
    accumulate(*rn, n.grad.colwise().sum());
  }));
}

Var sub_colvec(const Var& a, const Var& col) {
  check(col.cols() == 1 && col.rows() == a.rows(), "sub_colvec needs Rx1 col");
  auto an = a.node();
  auto cn = col.node();
  Matrix out = a.value();
  out.colwise() -= cn->value.col(0);
  return Var(make_interior(std::move(out), {an, cn}, [an, cn](Node& n) {
    accumulate(*an, n.grad);
    accumulate(*cn, -n.grad.rowwise().sum());
  }));
}

Var mul_colvec(const Var& a, const Var& col) {
  check(col.cols() == 1 && col.rows() == a.rows(), "mul_colvec needs Rx1 col");
  auto an = a.node();
  auto cn = col.node();
  Matrix out = an->value.array().colwise() * cn->value.col(0).array();
  return Var(make_interior(std::move(out), {an, cn}, [an, cn](Node& n) {
    accumulate(*an, (n.grad.array().colwise() * cn->value.col(0).array()).matrix());
    accumulate(*cn, n.grad.cwiseProduct(an->value).rowwise().sum());
  }));
}

Var reciprocal_(const Var& a) {
  auto an = a.node();
  Matrix out = an->value.cwiseInverse();
  return Var(make_interior(std::move(out), {an}, [an](Node& n) {
    accumulate(*an, (-n.grad.array() * n.value.array().square()).matrix());
  }));
}

Var scale(const Var& a, double s) {
  auto an = a.node();
  return Var(make_interior(an->value * s, {an},
                           [an, s](Node& n) { accumulate(*an, n.grad * s); }));
}

Var add_scalar(const Var& a, double s) {
  auto an = a.node();
  return Var(make_interior(an->value.array() + s, {an},
                           [an](Node& n) { accumulate(*an, n.grad); }));
}

Var tanh_(const Var& a) {
  auto an = a.node();
  Matrix out = an->value.array().tanh();
  auto on = make_interior(out, {an}, [an](Node& n) {
    accumulate(*an, (n.grad.array() * (1.0 - n.value.array().square())).matrix());
  });
  return Var(on);
}

Var sigmoid_(const Var& a) {
  auto an = a.node();
  Matrix out = (1.0 / (1.0 + (-an->value.array()).exp())).matrix();
  auto on = make_interior(out, {an}, [an](Node& n) {
    accumulate(*an, (n.grad.array() * n.value.array() * (1.0 - n.value.array())).matrix());
  });
  return Var(on);
}

Var relu_(const Var& a) {
  auto an = a.node();
  Matrix out = an->value.cwiseMax(0.0);
  return Var(make_interior(std::move(out), {an}, [an](Node& n) {
    accumulate(*an, (n.grad.array() * (an->value.array() > 0.0).cast<double>()).matrix());
  }));
}

Var exp_(const Var& a) {
  auto an = a.node();
  Matrix out = an->value.array().exp();
  return Var(make_interior(std::move(out), {an}, [an](Node& n) {
    accumulate(*an, (n.grad.array() * n.value.array()).matrix());
  }));
}

Var log_(const Var& a) {
  auto an = a.node();
  Matrix out = an->value.array().log();
  return Var(make_interior(std::move(out), {an}, [an](Node& n) {
    accumulate(*an, (n.grad.array() / an->value.array()).matrix());
  }));
}

Var sqrt_(const Var& a) {
  auto an = a.node();
  Matrix out = an->value.array().sqrt();
  return Var(make_interior(std::move(out), {an}, [an](Node& n) {
    Matrix g = n.grad;
    for (long c = 0; c < g.cols(); ++c)
      for (long r = 0; r < g.rows(); ++r)
        g(r, c) = n.value(r, c) > 0.0 ? g(r, c) / (2.0 * n.value(r, c)) : 0.0;
    accumulate(*an, g);
  }));
}

Var square_(const Var& a) {
  auto an = a.node();
  return Var(make_interior(an->value.array().square(), {an}, [an](Node& n) {
    accumulate(*an, (2.0 * n.grad.array() * an->value.array()).matrix());
  }));
}

Var clamp_(const Var& a, double lo, double hi) {
  auto an = a.node();
  Matrix out = an->value.cwiseMax(lo).cwiseMin(hi);
  return Var(make_interior(std::move(out), {an}, [an, lo, hi](Node& n) {
    Matrix mask = ((an->value.array() >= lo) && (an->value.array() <= hi)).cast<double>();
    accumulate(*an, n.grad.cwiseProduct(mask));
  }));
}

Var sum_(const Var& a) {
  auto an = a.node();
  Matrix out(1, 1);
  out(0, 0) = an->value.sum();
  return Var(make_interior(std::move(out), {an}, [an](Node& n) {
    accumulate(*an, Matrix::Constant(an->value.rows(), an->value.cols(), n.grad(0, 0)));
  }));
}

Var mean_(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a.rows() * a.cols());
  return scale(sum_(a), inv);
}

Var row_sum(const Var& a) {
  auto an = a.node();
  Matrix out = an->value.rowwise().sum();
  return Var(make_interior(std::move(out), {an}, [an](Node& n) {
    accumulate(*an, n.grad.col(0).replicate(1, an->value.cols()));
  }));
}

Var row_max_detached(const Var& a) {
  Matrix out = a.value().rowwise().maxCoeff();
  return Var::constant(std::move(out));
}

Var row_block_mean(const Var& a, int block) {
  check(block > 0 && a.rows() % block == 0, "row_block_mean: rows not divisible by block");
  auto an = a.node();
  const long n_out = a.rows() / block;
  Matrix out = Matrix::Zero(n_out, a.cols());
  for (long i = 0; i < n_out; ++i)
    out.row(i) = an->value.middleRows(i * block, block).colwise().mean();
  return Var(make_interior(std::move(out), {an}, [an, block, n_out](Node& n) {
    Matrix g(an->value.rows(), an->value.cols());
    const double inv = 1.0 / block;
    for (long i = 0; i < n_out; ++i)
      g.middleRows(i * block, block) = (n.grad.row(i) * inv).replicate(block, 1);
    accumulate(*an, g);
  }));
}

Var repeat_rows(const Var& a, int times) {
  check(times > 0, "repeat_rows: times must be positive");
  auto an = a.node();
  const long n_in = a.rows();
  Matrix out(n_in * times, a.cols());
  for (long i = 0; i < n_in; ++i) out.middleRows(i * times, times) = an->value.row(i).replicate(times, 1);
  return Var(make_interior(std::move(out), {an}, [an, times, n_in](Node& n) {
    Matrix g(n_in, an->value.cols());
    for (long i = 0; i < n_in; ++i) g.row(i) = n.grad.middleRows(i * times, times).colwise().sum();
    accumulate(*an, g);
  }));
}

Var gather_rows(const Var& a, std::vector<int> idx) {
  auto an = a.node();
  Matrix out(static_cast<long>(idx.size()), a.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows: index out of range");
    out.row(static_cast<long>(i)) = an->value.row(idx[i]);
  }
  return Var(make_interior(std::move(out), {an}, [an, idx = std::move(idx)](Node& n) {
    Matrix g = Matrix::Zero(an->value.rows(), an->value.cols());
    for (size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += n.grad.row(static_cast<long>(i));
    accumulate(*an, g);
  }));
}

Var gather_elems(const Var& a, std::vector<std::pair<int, int>> src, int out_rows, int out_cols) {
  check(static_cast<long>(src.size()) == static_cast<long>(out_rows) * out_cols,
        "gather_elems: index map size mismatch");
  auto an = a.node();
  Matrix out(out_rows, out_cols);
  for (int r = 0; r < out_rows; ++r)
    for (int c = 0; c < out_cols; ++c) {
      const auto& [sr, sc] = src[static_cast<size_t>(r) * out_cols + c];
      out(r, c) = an->value(sr, sc);
    }
  return Var(make_interior(std::move(out), {an},
                           [an, src = std::move(src), out_rows, out_cols](Node& n) {
    Matrix g = Matrix::Zero(an->value.rows(), an->value.cols());
    for (int r = 0; r < out_rows; ++r)
      for (int c = 0; c < out_cols; ++c) {
        const auto& [sr, sc] = src[static_cast<size_t>(r) * out_cols + c];
        g(sr, sc) += n.grad(r, c);
      }
    accumulate(*an, g);
  }));
}

Var concat_cols(const Var& a, const Var& b) {
  check(a.rows() == b.rows(), "concat_cols row mismatch");
  auto an = a.node();
  auto bn = b.node();
  Matrix out(a.rows(), a.cols() + b.cols());
  out << an->value, bn->value;
  return Var(make_interior(std::move(out), {an, bn}, [an, bn](Node& n) {
    accumulate(*an, n.grad.leftCols(an->value.cols()));
    accumulate(*bn, n.grad.rightCols(bn->value.cols()));
  }));
}

Var concat_rows(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_rows: empty input");
  long rows = 0;
  const long cols = parts.front().cols();
  std::vector<std::shared_ptr<Node>> ps;
  ps.reserve(parts.size());
  for (const auto& p : parts) {
    check(p.cols() == cols, "concat_rows col mismatch");
    rows += p.rows();
    ps.push_back(p.node());
  }
  Matrix out(rows, cols);
  long at = 0;
  for (const auto& p : ps) {
    out.middleRows(at, p->value.rows()) = p->value;
    at += p->value.rows();
  }
  return Var(make_interior(std::move(out), ps, [ps](Node& n) {
    long at = 0;
    for (const auto& p : ps) {
      accumulate(*p, n.grad.middleRows(at, p->value.rows()));
      at += p->value.rows();
    }
  }));
}

Var slice_cols(const Var& a, int start, int n) {
  check(start >= 0 && n >= 0 && start + n <= a.cols(), "slice_cols out of range");
  auto an = a.node();
  Matrix out = an->value.middleCols(start, n);
  return Var(make_interior(std::move(out), {an}, [an, start, n](Node& nd) {
    Matrix g = Matrix::Zero(an->value.rows(), an->value.cols());
    g.middleCols(start, n) = nd.grad;
    accumulate(*an, g);
  }));
}

Var detach(const Var& a) { return Var::constant(a.value()); }

Var dot_rows(const Var& a, const Var& b) { return row_sum(hadamard(a, b)); }

Var affine(const Var& x, const Var& w, const Var& b) { return add_rowvec(matmul(x, w), b); }

Var mse(const Var& a, const Var& b) { return mean_(square_(sub(a, b))); }

}  // namespace infomae::ad
