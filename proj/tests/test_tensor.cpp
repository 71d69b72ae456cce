#include <catch2/catch_amalgamated.hpp>

#include "auscult/tensor.hpp"
#include "support/test_util.hpp"

using namespace auscult;
using testutil::random_tensor;
using testutil::random_tensor_off_zero;

TEST_CASE("backward of sum gives all-ones gradient") {
  std::mt19937 rng(7);
  auto x = random_tensor<double>({3, 4}, rng, -2.0, 2.0, true);
  auto loss = sum_all(x);
  backward(loss);
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("dead ReLU blocks all gradient") {
  std::mt19937 rng(8);
  auto x = random_tensor<double>({5, 5}, rng, -3.0, -0.5, true);
  auto loss = sum_all(relu(x));
  backward(loss);
  CHECK(loss.item() == 0.0);
  for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("quadratic gradient is exact") {
  // f = 0.5 * ||x||^2  ->  grad = x. Central differences have zero truncation
  // error on a quadratic, so a wide step keeps roundoff negligible.
  std::mt19937 rng(9);
  auto x = random_tensor_off_zero<double>({6}, rng, 0.2, 2.0, true);
  auto f = [](Tensor<double>& t) { return scale(sum_all(mul(t, t)), 0.5); };
  double err = finite_diff_check(f, x, 1e-3);
  CHECK(err < 1e-8);
  auto loss = f(x);
  backward(loss);
  for (size_t i = 0; i < x.data().size(); ++i)
    CHECK_THAT(x.grad()[i], Catch::Matchers::WithinAbs(x.data()[i], 1e-12));
}

TEST_CASE("three dense+ReLU layers match finite differences") {
  std::mt19937 rng(10);
  auto w1 = random_tensor<double>({4, 6}, rng, -0.8, 0.8, true);
  auto b1 = random_tensor<double>({6}, rng, -0.3, 0.3, true);
  auto w2 = random_tensor<double>({6, 5}, rng, -0.8, 0.8, true);
  auto b2 = random_tensor<double>({5}, rng, -0.3, 0.3, true);
  auto w3 = random_tensor<double>({5, 2}, rng, -0.8, 0.8, true);
  auto b3 = random_tensor<double>({2}, rng, -0.3, 0.3, true);
  auto x = random_tensor<double>({3, 4}, rng, -1.0, 1.0, true);
  auto net = [&](Tensor<double>& in) {
    auto h1 = relu(add_rowvec(matmul(in, w1), b1));
    auto h2 = relu(add_rowvec(matmul(h1, w2), b2));
    auto out = add_rowvec(matmul(h2, w3), b3);
    return sum_all(mul(out, out));
  };
  CHECK(finite_diff_check(net, x, 1e-5) < 1e-6);
  auto wrt_w2 = [&](Tensor<double>& w) {
    auto h1 = relu(add_rowvec(matmul(x, w1), b1));
    auto h2 = relu(add_rowvec(matmul(h1, w), b2));
    auto out = add_rowvec(matmul(h2, w3), b3);
    return sum_all(mul(out, out));
  };
  CHECK(finite_diff_check(wrt_w2, w2, 1e-5) < 1e-6);
}

TEST_CASE("elementwise and reduction ops pass gradient checks") {
  std::mt19937 rng(11);
  auto check = [&](auto f, Tensor<double>& x, double tol = 1e-7) {
    CHECK(finite_diff_check(f, x, 1e-5) < tol);
  };
  auto x = random_tensor<double>({2, 3, 4}, rng, 0.5, 2.0, true);
  auto y = random_tensor<double>({2, 3, 4}, rng, -1.0, 1.0);

  auto f_add = [&](Tensor<double>& t) { return sum_all(mul(add(t, y), add(t, y))); };
  check(f_add, x);
  auto f_sub = [&](Tensor<double>& t) { return sum_all(mul(sub(t, y), sub(t, y))); };
  check(f_sub, x);
  auto f_mul = [&](Tensor<double>& t) { return sum_all(mul(t, y)); };
  check(f_mul, x);
  auto f_log = [&](Tensor<double>& t) { return sum_all(log_t(t)); };
  check(f_log, x);
  auto f_sqrt = [&](Tensor<double>& t) { return sum_all(sqrt_t(t)); };
  check(f_sqrt, x);
  auto f_scale = [&](Tensor<double>& t) { return mean_all(scale(t, 3.5)); };
  check(f_scale, x);
  auto f_rsum = [&](Tensor<double>& t) {
    auto r = reduce_sum(t, 1);
    return sum_all(mul(r, r));
  };
  check(f_rsum, x);
  auto f_rmean = [&](Tensor<double>& t) {
    auto r = reduce_mean(t, 2);
    return sum_all(mul(r, r));
  };
  check(f_rmean, x);

  auto z = random_tensor_off_zero<double>({3, 5}, rng, 0.05, 1.0, true);
  auto f_relu = [&](Tensor<double>& t) { return sum_all(relu(t)); };
  check(f_relu, z);
  auto f_rmax = [&](Tensor<double>& t) {
    auto r = reduce_max(t, 1);
    return sum_all(mul(r, r));
  };
  check(f_rmax, z);
  auto f_clamp = [&](Tensor<double>& t) { return sum_all(clamp_min(t, 0.02)); };
  check(f_clamp, z);
}

TEST_CASE("shape ops route gradients faithfully") {
  std::mt19937 rng(12);
  auto x = random_tensor<double>({2, 3, 4}, rng, -1.0, 1.0, true);
  auto w = random_tensor<double>({4, 3, 2}, rng, -1.0, 1.0);
  auto f_perm = [&](Tensor<double>& t) {
    return sum_all(mul(permute(t, {2, 1, 0}), w));
  };
  CHECK(finite_diff_check(f_perm, x, 1e-5) < 1e-8);
  auto f_resh = [&](Tensor<double>& t) {
    auto r = reshape(t, {6, 4});
    return sum_all(mul(r, r));
  };
  CHECK(finite_diff_check(f_resh, x, 1e-5) < 1e-8);
  auto y = random_tensor<double>({2, 2, 4}, rng, -1.0, 1.0, true);
  auto f_cat = [&](Tensor<double>& t) {
    auto c = concat<double>({t, x}, 1);
    return sum_all(mul(c, c));
  };
  CHECK(finite_diff_check(f_cat, y, 1e-5) < 1e-8);
  auto f_rows = [&](Tensor<double>& t) {
    auto r = reshape(t, {4, 4});
    auto s = select_rows(r, {0, 2, 2, 3});
    return sum_all(mul(s, s));
  };
  CHECK(finite_diff_check(f_rows, y, 1e-5) < 1e-8);
}

TEST_CASE("matmul and bmm match finite differences") {
  std::mt19937 rng(13);
  auto a = random_tensor<double>({3, 4}, rng, -1.0, 1.0, true);
  auto b = random_tensor<double>({4, 5}, rng, -1.0, 1.0, true);
  auto f_a = [&](Tensor<double>& t) {
    auto c = matmul(t, b);
    return sum_all(mul(c, c));
  };
  CHECK(finite_diff_check(f_a, a, 1e-5) < 1e-7);
  auto f_b = [&](Tensor<double>& t) {
    auto c = matmul(a, t);
    return sum_all(mul(c, c));
  };
  CHECK(finite_diff_check(f_b, b, 1e-5) < 1e-7);

  auto ba = random_tensor<double>({2, 3, 4}, rng, -1.0, 1.0, true);
  auto bb = random_tensor<double>({2, 4, 5}, rng, -1.0, 1.0, true);
  auto f_ba = [&](Tensor<double>& t) {
    auto c = bmm(t, bb);
    return sum_all(mul(c, c));
  };
  CHECK(finite_diff_check(f_ba, ba, 1e-5) < 1e-7);
  auto f_bb = [&](Tensor<double>& t) {
    auto c = bmm(ba, t);
    return sum_all(mul(c, c));
  };
  CHECK(finite_diff_check(f_bb, bb, 1e-5) < 1e-7);
}

TEST_CASE("rowvec broadcasts match finite differences") {
  std::mt19937 rng(14);
  auto x = random_tensor<double>({3, 5}, rng, -1.0, 1.0, true);
  auto v = random_tensor<double>({5}, rng, -1.0, 1.0, true);
  auto f_x = [&](Tensor<double>& t) {
    auto c = mul_rowvec(add_rowvec(t, v), v);
    return sum_all(mul(c, c));
  };
  CHECK(finite_diff_check(f_x, x, 1e-5) < 1e-7);
  auto f_v = [&](Tensor<double>& t) {
    auto c = mul_rowvec(add_rowvec(x, t), t);
    return sum_all(mul(c, c));
  };
  CHECK(finite_diff_check(f_v, v, 1e-5) < 1e-7);
}

TEST_CASE("backward demands a scalar loss") {
  auto x = Tensor<double>::constant({2, 2}, 1.0, true);
  CHECK_THROWS_AS(backward(add(x, x)), ValidationError);
}

TEST_CASE("detached graph leaves no gradient behind") {
  auto x = Tensor<double>::constant({3}, 2.0, false);
  auto loss = sum_all(x);
  backward(loss);  // warns, does not throw
  CHECK(x.grad().empty());
}

TEST_CASE("gradients accumulate across shared subexpressions") {
  auto x = Tensor<double>::from({2}, {1.5, -0.5}, true);
  auto y = add(x, x);  // dy/dx = 2
  auto loss = sum_all(y);
  backward(loss);
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 2.0);
}
