#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "infomae/discrete_info.hpp"
#include "infomae/rng.hpp"

#include <cmath>
#include <random>

using namespace infomae;

namespace {

// Random joint over (X1, X2) plus random deterministic maps, dimensioned per
// the oracle contract (alphabets <= 4).
struct RandomCase {
  std::vector<std::vector<double>> joint;
  std::vector<int> u1, u2, v1, v2;
  double beta = 0.5, gamma = 0.3, eps = 0.7;
};

RandomCase make_case(std::uint64_t seed) {
  auto rng = make_rng(seed, "oracle_case");
  std::uniform_int_distribution<int> alpha(2, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomCase c;
  const int a1 = alpha(rng), a2 = alpha(rng);
  c.joint.assign(a1, std::vector<double>(a2, 0.0));
  double total = 0.0;
  for (auto& row : c.joint)
    for (double& p : row) {
      p = unit(rng) + 1e-3;
      total += p;
    }
  for (auto& row : c.joint)
    for (double& p : row) p /= total;
  auto make_map = [&](int n, int range) {
    std::uniform_int_distribution<int> pick(0, range - 1);
    std::vector<int> m(n);
    for (int& v : m) v = pick(rng);
    return m;
  };
  c.u1 = make_map(a1, 3);
  c.u2 = make_map(a2, 3);
  c.v1 = make_map(a1, 3);
  c.v2 = make_map(a2, 3);
  c.beta = unit(rng);
  c.gamma = unit(rng);
  c.eps = unit(rng);
  return c;
}

}  // namespace

TEST_CASE("independent fair binary variables carry zero mutual information") {
  JointTable t({2, 2});
  t.at({0, 0}) = 0.25;
  t.at({0, 1}) = 0.25;
  t.at({1, 0}) = 0.25;
  t.at({1, 1}) = 0.25;
  t.validate();
  CHECK(t.mutual_information({0}, {1}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("copy channel has I = ln 2") {
  JointTable t({2, 2});
  t.at({0, 0}) = 0.5;
  t.at({1, 1}) = 0.5;
  t.validate();
  CHECK(t.mutual_information({0}, {1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(t.entropy({0}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("common-variable construction gives exactly zero conditional MI") {
  // X1 = (U, N1), X2 = (U, N2), all fair bits, dyadic probabilities: the
  // enumerated ratio is exactly 1 cell by cell, so the sum is exactly 0.
  JointTable t({4, 4, 2});  // X1 = 2*u+n1, X2 = 2*u+n2, U
  for (int u = 0; u < 2; ++u)
    for (int n1 = 0; n1 < 2; ++n1)
      for (int n2 = 0; n2 < 2; ++n2) t.at({2 * u + n1, 2 * u + n2, u}) = 0.125;
  t.validate();
  const double cmi = t.conditional_mutual_information({0}, {1}, {2});
  CHECK(cmi == 0.0);  // exact, not approximate
  // and the unconditional MI is ln 2 (they share exactly the one common bit)
  CHECK(t.mutual_information({0}, {1}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("unnormalized table is rejected") {
  JointTable t({2, 2});
  t.at({0, 0}) = 0.6;
  t.at({1, 1}) = 0.6;
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}

TEST_CASE("X1 = X2 = U collapses conditional MI to zero") {
  JointTable t({2, 2, 2});
  t.at({0, 0, 0}) = 0.5;
  t.at({1, 1, 1}) = 0.5;
  t.validate();
  CHECK(t.conditional_mutual_information({0}, {1}, {2}) == 0.0);
}

TEST_CASE("shared-loss reduction: entropy side equals expectation side on 100 random tables") {
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    RandomCase c = make_case(1000 + trial);
    SharedLossSides s = exact_shared_loss_sides(c.joint, c.u1, c.u2, c.beta);
    worst = std::max(worst, std::abs(s.entropy_side - s.expectation_side));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("private-loss reduction: entropy side equals expectation side on 100 random tables") {
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    RandomCase c = make_case(2000 + trial);
    PrivateLossSides s =
        exact_private_loss_sides(c.joint, c.u1, c.u2, c.v1, c.v2, c.gamma, c.eps);
    worst = std::max(worst, std::abs(s.entropy_side - s.expectation_side));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("independent v and u give zero PRIV_SHARED term under enumeration") {
  // X1's two components: u-bit and v-bit, independent; maps pick them apart.
  std::vector<std::vector<double>> joint(4, std::vector<double>(1, 0.25));
  std::vector<int> u1 = {0, 0, 1, 1};  // high bit
  std::vector<int> v1 = {0, 1, 0, 1};  // low bit
  std::vector<int> u2 = {0};
  std::vector<int> v2 = {0};
  PrivateLossSides s = exact_private_loss_sides(joint, u1, u2, v1, v2, 0.0, 1.0);
  CHECK(std::abs(s.priv_shared[0]) < 1e-12);
}

TEST_CASE("entropy term of Eq.(7) reduces to I(X;V) exactly for deterministic maps") {
  RandomCase c = make_case(77);
  JointTable t = augment_with_maps(c.joint, c.u1, c.u2, &c.v1, &c.v2);
  CHECK(t.entropy({4}) == doctest::Approx(t.mutual_information({0}, {4})).epsilon(1e-12));
  CHECK(t.entropy({5}) == doctest::Approx(t.mutual_information({1}, {5})).epsilon(1e-12));
}
