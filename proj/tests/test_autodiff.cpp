#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "infomae/autodiff.hpp"

using namespace infomae;
using infomae::testing::max_grad_rel_err;
using infomae::testing::random_matrix;

TEST_CASE("matmul chain gradient matches finite differences") {
  ad::Var a = ad::Var::param(random_matrix(3, 4, 1, 0.5));
  ad::Var b = ad::Var::param(random_matrix(4, 5, 2, 0.5));
  auto build = [&] { return ad::mean_(ad::square_(ad::matmul(a, b))); };
  CHECK(max_grad_rel_err(build, {a, b}) < 1e-6);
}

TEST_CASE("elementwise ops gradients") {
  ad::Var x = ad::Var::param(random_matrix(4, 4, 3, 0.7));
  SUBCASE("tanh") {
    auto build = [&] { return ad::sum_(ad::tanh_(x)); };
    CHECK(max_grad_rel_err(build, {x}) < 1e-6);
  }
  SUBCASE("sigmoid-log mix") {
    auto build = [&] {
      return ad::mean_(ad::log_(ad::add_scalar(ad::sigmoid_(x), 0.5)));
    };
    CHECK(max_grad_rel_err(build, {x}) < 1e-6);
  }
  SUBCASE("exp square") {
    auto build = [&] { return ad::mean_(ad::exp_(ad::scale(ad::square_(x), 0.1))); };
    CHECK(max_grad_rel_err(build, {x}) < 1e-6);
  }
  SUBCASE("sqrt away from zero") {
    auto build = [&] { return ad::sum_(ad::sqrt_(ad::add_scalar(ad::square_(x), 1.0))); };
    CHECK(max_grad_rel_err(build, {x}) < 1e-6);
  }
  SUBCASE("reciprocal") {
    auto build = [&] { return ad::sum_(ad::reciprocal_(ad::add_scalar(ad::square_(x), 2.0))); };
    CHECK(max_grad_rel_err(build, {x}) < 1e-6);
  }
}

TEST_CASE("broadcast and reduction gradients") {
  ad::Var x = ad::Var::param(random_matrix(6, 3, 4));
  ad::Var bias = ad::Var::param(random_matrix(1, 3, 5));
  ad::Var col = ad::Var::param(random_matrix(6, 1, 6));
  SUBCASE("add_rowvec") {
    auto build = [&] { return ad::mean_(ad::square_(ad::add_rowvec(x, bias))); };
    CHECK(max_grad_rel_err(build, {x, bias}) < 1e-6);
  }
  SUBCASE("sub_colvec + mul_colvec") {
    auto build = [&] {
      return ad::mean_(ad::square_(ad::mul_colvec(ad::sub_colvec(x, col), col)));
    };
    CHECK(max_grad_rel_err(build, {x, col}) < 1e-6);
  }
  SUBCASE("row_sum row_block_mean repeat_rows") {
    auto build = [&] {
      ad::Var r = ad::repeat_rows(ad::row_block_mean(x, 2), 2);
      return ad::mean_(ad::square_(ad::hadamard(r, r)));
    };
    CHECK(max_grad_rel_err(build, {x}) < 1e-6);
  }
}

TEST_CASE("gather concat slice gradients") {
  ad::Var x = ad::Var::param(random_matrix(5, 4, 7));
  ad::Var y = ad::Var::param(random_matrix(5, 2, 8));
  SUBCASE("gather_rows with repeats") {
    auto build = [&] {
      return ad::mean_(ad::square_(ad::gather_rows(x, {0, 2, 2, 4, 1})));
    };
    CHECK(max_grad_rel_err(build, {x}) < 1e-6);
  }
  SUBCASE("gather_elems") {
    std::vector<std::pair<int, int>> idx = {{0, 0}, {1, 3}, {4, 2}, {1, 3}, {2, 1}, {3, 0}};
    auto build = [&] { return ad::sum_(ad::square_(ad::gather_elems(x, idx, 3, 2))); };
    CHECK(max_grad_rel_err(build, {x}) < 1e-6);
  }
  SUBCASE("concat_cols slice_cols transpose") {
    auto build = [&] {
      ad::Var c = ad::concat_cols(x, y);
      ad::Var s = ad::slice_cols(c, 2, 3);
      return ad::mean_(ad::square_(ad::matmul(ad::transpose(s), s)));
    };
    CHECK(max_grad_rel_err(build, {x, y}) < 1e-6);
  }
}

TEST_CASE("relu and clamp gradients away from kinks") {
  ad::Var x = ad::Var::param(random_matrix(4, 4, 9));
  SUBCASE("relu") {
    auto build = [&] { return ad::sum_(ad::relu_(ad::add_scalar(x, 0.05))); };
    CHECK(max_grad_rel_err(build, {x}) < 1e-6);
  }
  SUBCASE("clamp keeps interior gradient and kills exterior") {
    ad::Matrix m(1, 2);
    m << 0.3, 7.0;
    ad::Var v = ad::Var::param(m);
    ad::Var loss = ad::sum_(ad::clamp_(v, 0.0, 1.0));
    ad::backward(loss);
    CHECK(v.grad()(0, 0) == doctest::Approx(1.0));
    CHECK(v.grad()(0, 1) == doctest::Approx(0.0));
  }
}

TEST_CASE("leaf gradients accumulate across backward calls, interior reset") {
  ad::Var x = ad::Var::param(ad::Matrix::Ones(1, 1));
  ad::Var loss1 = ad::scale(x, 3.0);
  ad::backward(loss1);
  CHECK(x.grad()(0, 0) == doctest::Approx(3.0));
  ad::Var loss2 = ad::scale(x, 2.0);
  ad::backward(loss2);
  CHECK(x.grad()(0, 0) == doctest::Approx(5.0));
}

TEST_CASE("frozen leaves receive no gradient and prune the graph") {
  ad::Var x = ad::Var::param(random_matrix(2, 2, 10));
  ad::Var y = ad::Var::param(random_matrix(2, 2, 11));
  x.set_requires_grad(false);
  ad::Var loss = ad::sum_(ad::hadamard(x, y));
  ad::backward(loss);
  CHECK(x.grad().cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(y.grad().cwiseAbs().maxCoeff() > 0.0);
  x.set_requires_grad(true);
}

TEST_CASE("diamond-shaped reuse accumulates correctly") {
  ad::Var x = ad::Var::param(random_matrix(3, 3, 12));
  auto build = [&] {
    ad::Var t = ad::tanh_(x);
    return ad::add(ad::mean_(ad::square_(t)), ad::mean_(ad::hadamard(t, t)));
  };
  CHECK(max_grad_rel_err(build, {x}) < 1e-6);
}

TEST_CASE("row_max_detached blocks gradient flow") {
  ad::Var x = ad::Var::param(random_matrix(3, 4, 13));
  ad::Var shifted = ad::sub_colvec(x, ad::row_max_detached(x));
  ad::Var loss = ad::sum_(ad::exp_(shifted));
  ad::backward(loss);
  CHECK(x.grad().allFinite());
}
