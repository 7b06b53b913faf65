#include "infomae/discrete_info.hpp"

#include <cmath>
#include <stdexcept>

namespace infomae {

JointTable::JointTable(std::vector<int> alphabet_sizes) : sizes_(std::move(alphabet_sizes)) {
  if (sizes_.empty()) throw std::invalid_argument("JointTable: no variables");
  std::size_t total = 1;
  strides_.resize(sizes_.size());
  for (int v = num_vars() - 1; v >= 0; --v) {
    if (sizes_[v] < 1) throw std::invalid_argument("JointTable: alphabet must be >= 1");
    strides_[v] = total;
    total *= static_cast<std::size_t>(sizes_[v]);
  }
  probs_.assign(total, 0.0);
}

std::size_t JointTable::flat_index(const std::vector<int>& assignment) const {
  if (assignment.size() != sizes_.size())
    throw std::invalid_argument("JointTable: assignment arity mismatch");
  std::size_t at = 0;
  for (int v = 0; v < num_vars(); ++v) {
    if (assignment[v] < 0 || assignment[v] >= sizes_[v])
      throw std::invalid_argument("JointTable: symbol out of range");
    at += strides_[v] * static_cast<std::size_t>(assignment[v]);
  }
  return at;
}

double& JointTable::at(const std::vector<int>& assignment) { return probs_[flat_index(assignment)]; }
double JointTable::at(const std::vector<int>& assignment) const {
  return probs_[flat_index(assignment)];
}

void JointTable::validate(double tol) const {
  double sum = 0.0;
  for (double p : probs_) {
    if (p < 0.0) throw std::invalid_argument("JointTable: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > tol)
    throw std::invalid_argument("JointTable: not normalized, sum = " + std::to_string(sum));
}

template <typename F>
void JointTable::for_each_cell(F&& f) const {
  std::vector<int> idx(sizes_.size(), 0);
  for (std::size_t flat = 0; flat < probs_.size(); ++flat) {
    f(idx, probs_[flat]);
    for (int v = num_vars() - 1; v >= 0; --v) {
      if (++idx[v] < sizes_[v]) break;
      idx[v] = 0;
    }
  }
}

double JointTable::marginal(const std::vector<int>& vars, const std::vector<int>& vals) const {
  if (vars.size() != vals.size()) throw std::invalid_argument("marginal: vars/vals mismatch");
  double sum = 0.0;
  for_each_cell([&](const std::vector<int>& idx, double p) {
    for (std::size_t i = 0; i < vars.size(); ++i)
      if (idx[vars[i]] != vals[i]) return;
    sum += p;
  });
  return sum;
}

double JointTable::entropy(const std::vector<int>& vars) const {
  // Accumulate the marginal over `vars` first so identical outcomes share one
  // p log p term.
  std::size_t cells = 1;
  std::vector<std::size_t> stride(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    stride[i] = cells;
    cells *= static_cast<std::size_t>(sizes_.at(vars[i]));
  }
  std::vector<double> marg(cells, 0.0);
  for_each_cell([&](const std::vector<int>& idx, double p) {
    std::size_t at = 0;
    for (std::size_t i = 0; i < vars.size(); ++i)
      at += stride[i] * static_cast<std::size_t>(idx[vars[i]]);
    marg[at] += p;
  });
  double h = 0.0;
  for (double p : marg)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

double JointTable::log_ratio_expectation(const std::vector<std::vector<int>>& numerator,
                                         const std::vector<std::vector<int>>& denominator) const {
  double total = 0.0;
  for_each_cell([&](const std::vector<int>& idx, double p) {
    if (p <= 0.0) return;
    double ratio = 1.0;
    for (const auto& g : numerator) {
      std::vector<int> vals(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) vals[i] = idx[g[i]];
      ratio *= marginal(g, vals);
    }
    for (const auto& g : denominator) {
      std::vector<int> vals(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) vals[i] = idx[g[i]];
      ratio /= marginal(g, vals);
    }
    const double lg = std::log(ratio);
    if (lg != 0.0) total += p * lg;  // keeps exact-zero cases exactly zero
  });
  return total;
}

double JointTable::mutual_information(const std::vector<int>& a, const std::vector<int>& b) const {
  std::vector<int> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  return log_ratio_expectation({ab}, {a, b});
}

double JointTable::conditional_mutual_information(const std::vector<int>& a,
                                                  const std::vector<int>& b,
                                                  const std::vector<int>& given) const {
  // I(A;B|C) = E log [ p(A,B,C) p(C) / (p(A,C) p(B,C)) ]
  std::vector<int> abc = a;
  abc.insert(abc.end(), b.begin(), b.end());
  abc.insert(abc.end(), given.begin(), given.end());
  std::vector<int> ac = a;
  ac.insert(ac.end(), given.begin(), given.end());
  std::vector<int> bc = b;
  bc.insert(bc.end(), given.begin(), given.end());
  return log_ratio_expectation({abc, given}, {ac, bc});
}

JointTable augment_with_maps(const std::vector<std::vector<double>>& joint_x1x2,
                             const std::vector<int>& u1_map, const std::vector<int>& u2_map,
                             const std::vector<int>* v1_map, const std::vector<int>* v2_map) {
  const int a1 = static_cast<int>(joint_x1x2.size());
  if (a1 == 0) throw std::invalid_argument("augment_with_maps: empty joint");
  const int a2 = static_cast<int>(joint_x1x2.front().size());
  if (static_cast<int>(u1_map.size()) != a1 || static_cast<int>(u2_map.size()) != a2)
    throw std::invalid_argument("augment_with_maps: map arity mismatch");
  auto range_of = [](const std::vector<int>& m) {
    int r = 0;
    for (int v : m) r = std::max(r, v + 1);
    return r;
  };
  std::vector<int> sizes = {a1, a2, range_of(u1_map), range_of(u2_map)};
  if (v1_map && v2_map) {
    sizes.push_back(range_of(*v1_map));
    sizes.push_back(range_of(*v2_map));
  }
  JointTable t(sizes);
  for (int x1 = 0; x1 < a1; ++x1)
    for (int x2 = 0; x2 < a2; ++x2) {
      std::vector<int> idx = {x1, x2, u1_map[x1], u2_map[x2]};
      if (v1_map && v2_map) {
        idx.push_back((*v1_map)[x1]);
        idx.push_back((*v2_map)[x2]);
      }
      t.at(idx) = joint_x1x2[x1][x2];
    }
  t.validate(1e-9);
  return t;
}

SharedLossSides exact_shared_loss_sides(const std::vector<std::vector<double>>& joint_x1x2,
                                        const std::vector<int>& u1_map,
                                        const std::vector<int>& u2_map, double beta) {
  JointTable t = augment_with_maps(joint_x1x2, u1_map, u2_map);
  const int X1 = 0, X2 = 1, U1 = 2, U2 = 3;
  SharedLossSides s;
  s.entropy_side = t.conditional_mutual_information({X1}, {X2}, {U1}) +
                   t.conditional_mutual_information({X1}, {X2}, {U2}) +
                   beta * (t.entropy({U1}) + t.entropy({U2}));
  const int u_of[2] = {U1, U2};
  const int self_of[2] = {X1, X2};
  const int cross_of[2] = {X2, X1};
  for (int i = 0; i < 2; ++i) {
    const int u = u_of[i];
    s.joint3[i] = t.log_ratio_expectation({{X1, X2, u}}, {{X1}, {X2}, {u}});
    s.self[i] = t.mutual_information({self_of[i]}, {u});
    s.cross[i] = t.mutual_information({cross_of[i]}, {u});
    s.expectation_side += s.joint3[i] - (1.0 - beta) * s.self[i] - s.cross[i];
  }
  return s;
}

PrivateLossSides exact_private_loss_sides(const std::vector<std::vector<double>>& joint_x1x2,
                                          const std::vector<int>& u1_map,
                                          const std::vector<int>& u2_map,
                                          const std::vector<int>& v1_map,
                                          const std::vector<int>& v2_map, double gamma,
                                          double eps) {
  JointTable t = augment_with_maps(joint_x1x2, u1_map, u2_map, &v1_map, &v2_map);
  const int X1 = 0, X2 = 1, U1 = 2, U2 = 3, V1 = 4, V2 = 5;
  PrivateLossSides s;
  s.entropy_side = gamma * (t.entropy({V1}) + t.entropy({V2})) +
                   eps * (t.mutual_information({V1}, {U1}) + t.mutual_information({V2}, {U2}));
  const int x_of[2] = {X1, X2}, v_of[2] = {V1, V2}, u_of[2] = {U1, U2};
  for (int i = 0; i < 2; ++i) {
    s.priv_self[i] = t.mutual_information({x_of[i]}, {v_of[i]});
    s.priv_shared[i] = t.mutual_information({v_of[i]}, {u_of[i]});
    s.expectation_side += gamma * s.priv_self[i] + eps * s.priv_shared[i];
  }
  return s;
}

}  // namespace infomae
