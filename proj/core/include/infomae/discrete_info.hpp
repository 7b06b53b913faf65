#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace infomae {

// Exact information quantities over a finite joint distribution, computed in
// nats by direct summation with 0*log 0 = 0. Used as the enumeration oracle
// for the information-loss identities; never part of the training path.
class JointTable {
 public:
  explicit JointTable(std::vector<int> alphabet_sizes);

  int num_vars() const { return static_cast<int>(sizes_.size()); }
  int alphabet(int var) const { return sizes_.at(var); }
  std::size_t cells() const { return probs_.size(); }

  double& at(const std::vector<int>& assignment);
  double at(const std::vector<int>& assignment) const;

  // Throws unless entries are >= 0 and sum to 1 within tol.
  void validate(double tol = 1e-12) const;

  double marginal(const std::vector<int>& vars, const std::vector<int>& vals) const;

  double entropy(const std::vector<int>& vars) const;
  double mutual_information(const std::vector<int>& a, const std::vector<int>& b) const;
  double conditional_mutual_information(const std::vector<int>& a, const std::vector<int>& b,
                                        const std::vector<int>& given) const;

  // E over the full joint of log [ prod p(num_i) / prod p(den_j) ], each
  // group a set of variable indices. The building block for the density-ratio
  // expectations of the shared/private losses.
  double log_ratio_expectation(const std::vector<std::vector<int>>& numerator,
                               const std::vector<std::vector<int>>& denominator) const;

 private:
  template <typename F>
  void for_each_cell(F&& f) const;
  std::size_t flat_index(const std::vector<int>& assignment) const;

  std::vector<int> sizes_;
  std::vector<std::size_t> strides_;
  std::vector<double> probs_;
};

// Random joint over (X1, X2) with deterministic maps applied to each side.
// Axes of the result: 0=X1, 1=X2, 2=map1(X1), 3=map2(X2) [, 4=map3(X1),
// 5=map4(X2) when the private maps are provided].
JointTable augment_with_maps(const std::vector<std::vector<double>>& joint_x1x2,
                             const std::vector<int>& u1_map, const std::vector<int>& u2_map,
                             const std::vector<int>* v1_map = nullptr,
                             const std::vector<int>* v2_map = nullptr);

// Both sides of the shared-loss reduction, evaluated exactly.
// entropy_side     = I(X1;X2|U1) + I(X1;X2|U2) + beta*(H(U1)+H(U2))
// expectation_side = sum_i [ E log p(X1,X2,Ui)/(p1 p2 pUi)
//                            - (1-beta) E log p(Xi,Ui)/(pi pUi)
//                            - E log p(X_{3-i},Ui)/(p_{3-i} pUi) ]
struct SharedLossSides {
  double entropy_side = 0;
  double expectation_side = 0;
  double joint3[2] = {0, 0};
  double self[2] = {0, 0};
  double cross[2] = {0, 0};
};
SharedLossSides exact_shared_loss_sides(const std::vector<std::vector<double>>& joint_x1x2,
                                        const std::vector<int>& u1_map,
                                        const std::vector<int>& u2_map, double beta);

// Both sides of the private-loss reduction:
// entropy_side     = gamma*(H(V1)+H(V2)) + eps*(I(V1;U1)+I(V2;U2))
// expectation_side = sum_i [ gamma*E log p(Xi,Vi)/(pi pVi) + eps*E log p(Vi,Ui)/(pVi pUi) ]
struct PrivateLossSides {
  double entropy_side = 0;
  double expectation_side = 0;
  double priv_self[2] = {0, 0};
  double priv_shared[2] = {0, 0};
};
PrivateLossSides exact_private_loss_sides(const std::vector<std::vector<double>>& joint_x1x2,
                                          const std::vector<int>& u1_map,
                                          const std::vector<int>& u2_map,
                                          const std::vector<int>& v1_map,
                                          const std::vector<int>& v2_map, double gamma,
                                          double eps);

}  // namespace infomae
