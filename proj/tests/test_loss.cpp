#include <catch2/catch_amalgamated.hpp>

#include "auscult/loss.hpp"
#include "support/test_util.hpp"

using namespace auscult;
using testutil::random_tensor;

TEST_CASE("KL self-divergence is zero without regularization") {
  auto y = Tensor<double>::from({2, 3}, {0.2, 0.5, 0.3, 0.1, 0.1, 0.8});
  auto yhat = Tensor<double>::from({2, 3}, {0.2, 0.5, 0.3, 0.1, 0.1, 0.8});
  auto loss = kl_loss<double>(y, yhat, {}, 0.0);
  CHECK(loss.item() == 0.0);
}

TEST_CASE("one-hot target against a uniform prediction gives log T") {
  auto y = Tensor<double>::from({1, 4}, {0.0, 1.0, 0.0, 0.0});
  auto yhat = Tensor<double>::constant({1, 4}, 0.25);
  auto loss = kl_loss<double>(y, yhat, {}, 0.0);
  CHECK_THAT(loss.item(), Catch::Matchers::WithinAbs(std::log(4.0), 1e-12));
  CHECK_THAT(loss.item(), Catch::Matchers::WithinAbs(1.3863, 1e-4));
}

TEST_CASE("the L2 term adds half lambda times the squared parameter norm") {
  auto y = Tensor<double>::from({1, 2}, {1.0, 0.0});
  auto yhat = Tensor<double>::from({1, 2}, {1.0, 0.0});
  Parameter<double> p{"w", Tensor<double>::from({3}, {1.0, -2.0, 2.0}, true), {}, {}};
  ParamRefs<double> params{&p};
  auto loss = kl_loss<double>(y, yhat, params, 1e-4);
  CHECK_THAT(loss.item(), Catch::Matchers::WithinAbs(0.5e-4 * 9.0, 1e-15));
}

TEST_CASE("clamped predictions are counted") {
  auto y = Tensor<double>::from({1, 2}, {1.0, 0.0});
  auto yhat = Tensor<double>::from({1, 2}, {0.0, 1.0});
  long clamps = 0;
  auto loss = kl_loss<double>(y, yhat, {}, 0.0, &clamps);
  CHECK(clamps == 1);
  CHECK(std::isfinite(loss.item()));
  CHECK(loss.item() > 20.0);  // log(1/1e-12)
}

TEST_CASE("KL loss exceeds the regularizer except at equality") {
  std::mt19937 rng(3);
  Parameter<double> p{"w", random_tensor<double>({4}, rng, -1.0, 1.0, true), {}, {}};
  ParamRefs<double> params{&p};
  const double reg = 0.5e-4 * [&] {
    double acc = 0;
    for (double v : p.value.data()) acc += v * v;
    return acc;
  }();
  for (int trial = 0; trial < 50; ++trial) {
    auto logits = random_tensor<double>({3, 5}, rng, -2.0, 2.0);
    auto y = softmax(random_tensor<double>({3, 5}, rng, -2.0, 2.0), 1);
    auto yhat = softmax(logits, 1);
    auto loss = kl_loss<double>(y, yhat, params, 1e-4);
    CHECK(loss.item() >= reg - 1e-12);
  }
}

TEST_CASE("KL gradients pass the finite-difference check") {
  std::mt19937 rng(4);
  auto y = softmax(random_tensor<double>({3, 4}, rng, -1.0, 1.0), 1);
  auto x = random_tensor<double>({3, 4}, rng, -1.5, 1.5, true);
  auto f = [&](Tensor<double>& t) {
    auto yhat = softmax(t, 1);
    return kl_loss<double>(y, yhat, {}, 0.0);
  };
  CHECK(finite_diff_check(f, x, 1e-5) < 1e-6);
}

TEST_CASE("contrastive loss vanishes for coincident same-class embeddings") {
  auto e = Tensor<double>::from({3}, {0.5, -1.0, 2.0});
  auto loss = contrastive_loss<double>(e, e, 1, 1.0);
  CHECK(loss.item() == 0.0);
}

TEST_CASE("contrastive loss vanishes beyond the margin for different classes") {
  auto a = Tensor<double>::from({2}, {0.0, 0.0});
  auto b = Tensor<double>::from({2}, {3.0, 4.0});  // d = 5 >= margin
  auto loss = contrastive_loss<double>(a, b, 0, 1.0);
  CHECK(loss.item() == 0.0);
}

TEST_CASE("contrastive hinge is squared inside the margin") {
  auto a = Tensor<double>::from({2}, {0.0, 0.0});
  auto b = Tensor<double>::from({2}, {0.4, 0.0});  // d = 0.4
  auto loss = contrastive_loss<double>(a, b, 0, 1.0);
  CHECK_THAT(loss.item(), Catch::Matchers::WithinAbs(0.36, 1e-9));
  auto same = contrastive_loss<double>(a, b, 1, 1.0);
  CHECK_THAT(same.item(), Catch::Matchers::WithinAbs(0.16, 1e-9));
}

TEST_CASE("contrastive loss is monotone in the distance") {
  double prev_same = -1.0, prev_diff = 2.0;
  for (double d : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    auto a = Tensor<double>::from({1}, {0.0});
    auto b = Tensor<double>::from({1}, {d});
    const double same = contrastive_loss<double>(a, b, 1, 1.0).item();
    const double diff = contrastive_loss<double>(a, b, 0, 1.0).item();
    CHECK(same > prev_same);
    CHECK(diff < prev_diff);
    CHECK(same >= 0.0);
    CHECK(diff >= 0.0);
    prev_same = same;
    prev_diff = diff;
  }
}

TEST_CASE("contrastive gradients pass the finite-difference check") {
  std::mt19937 rng(5);
  auto b = random_tensor<double>({6}, rng, 1.0, 1.5);
  auto x = random_tensor<double>({6}, rng, -0.5, 0.4, true);  // keeps d off 0 and margin
  auto f_diff = [&](Tensor<double>& t) { return contrastive_loss<double>(t, b, 0, 4.0); };
  CHECK(finite_diff_check(f_diff, x, 1e-6) < 1e-6);
  auto f_same = [&](Tensor<double>& t) { return contrastive_loss<double>(t, b, 1, 1.0); };
  CHECK(finite_diff_check(f_same, x, 1e-5) < 1e-6);
}

TEST_CASE("batch contrastive matches the brute-force all-pairs mean") {
  std::mt19937 rng(6);
  const int N = 7, E = 5;
  auto e = random_tensor<double>({N, E}, rng, -1.0, 1.0);
  std::vector<int> labels = {0, 1, 2, 0, 1, 2, 0};
  Rng prng(1);
  const double got = batch_contrastive<double>(e, labels, 1.0, prng).item();

  double acc = 0.0;
  int pairs = 0;
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) {
      double d2 = 0.0;
      for (int k = 0; k < E; ++k) {
        const double d = e.data()[size_t(i * E + k)] - e.data()[size_t(j * E + k)];
        d2 += d * d;
      }
      const double d = std::sqrt(d2 + 1e-12);
      const double hinge = std::max(1.0 - d, 0.0);
      acc += labels[size_t(i)] == labels[size_t(j)] ? d2 : hinge * hinge;
      pairs++;
    }
  CHECK_THAT(got, Catch::Matchers::WithinAbs(acc / pairs, 1e-9));
}

TEST_CASE("identical same-class embeddings give zero batch loss") {
  auto e = Tensor<double>::constant({4, 3}, 0.7);
  std::vector<int> labels = {1, 1, 1, 1};
  Rng rng(2);
  CHECK(batch_contrastive<double>(e, labels, 1.0, rng).item() < 1e-10);
}

TEST_CASE("well-separated classes give zero batch loss") {
  auto e = Tensor<double>::from({4, 2}, {0.0, 0.0, 0.0, 0.0, 5.0, 5.0, 5.0, 5.0});
  std::vector<int> labels = {0, 0, 1, 1};
  Rng rng(3);
  CHECK(batch_contrastive<double>(e, labels, 1.0, rng).item() < 1e-9);
}

TEST_CASE("large batches fall back to derangement pairs") {
  std::mt19937 rng(7);
  auto e = random_tensor<double>({40, 4}, rng, -1.0, 1.0, true);
  std::vector<int> labels(40);
  for (int i = 0; i < 40; ++i) labels[size_t(i)] = i % 4;
  Rng prng(11);
  auto loss = batch_contrastive<double>(e, labels, 1.0, prng);
  CHECK(std::isfinite(loss.item()));
  backward(loss);
  double gsum = 0.0;
  for (double g : e.grad()) gsum += std::abs(g);
  CHECK(gsum > 0.0);  // every item appears in exactly two pairs
}

TEST_CASE("mixed items can be excluded from pairing") {
  auto e = Tensor<double>::from({4, 1}, {0.0, 10.0, 0.1, 0.2});
  std::vector<int> labels = {0, 1, 0, 0};
  std::vector<bool> mixed = {false, true, false, false};
  Rng rng(5);
  const double with_mixed =
      batch_contrastive<double>(e, labels, 1.0, rng).item();
  Rng rng2(5);
  const double without = batch_contrastive<double>(e, labels, 1.0, rng2,
                                                   PairPolicy::ExcludeMixed, &mixed)
                             .item();
  // the mixed item only formed zero-loss cross-class pairs; dropping it
  // raises the mean over the remaining same-class pairs
  CHECK(without > with_mixed);
  CHECK_THAT(without, Catch::Matchers::WithinAbs(0.06 / 3.0, 1e-9));
  CHECK_THAT(with_mixed, Catch::Matchers::WithinAbs(0.06 / 6.0, 1e-9));
}

TEST_CASE("total loss is the advertised weighted sum") {
  auto one = [] { return Tensor<double>::constant({1}, 1.0); };
  LossParts<double> parts{one(), one(), one(), one(), one(), one(), one()};
  LossWeights w{1.0 / 3.0, 1.0, 1.0};
  CHECK_THAT(total_loss(parts, w).item(), Catch::Matchers::WithinAbs(5.0, 1e-12));
  LossWeights no_cont{1.0 / 3.0, 1.0, 0.0};
  CHECK_THAT(total_loss(parts, no_cont).item(), Catch::Matchers::WithinAbs(2.0, 1e-12));
}

TEST_CASE("total loss is linear in each part with the exact coefficient") {
  auto c = [](double v) { return Tensor<double>::constant({1}, v); };
  LossWeights w{0.25, 2.0, 0.5};
  LossParts<double> base{c(1), c(1), c(1), c(1), c(1), c(1), c(1)};
  const double l0 = total_loss(base, w).item();
  LossParts<double> bumped{c(1 + 4), c(1), c(1), c(1), c(1), c(1), c(1)};
  CHECK_THAT(total_loss(bumped, w).item() - l0,
             Catch::Matchers::WithinAbs(0.25 * 4, 1e-12));
  LossParts<double> bumped_comb{c(1), c(1), c(1), c(1 + 3), c(1), c(1), c(1)};
  CHECK_THAT(total_loss(bumped_comb, w).item() - l0,
             Catch::Matchers::WithinAbs(2.0 * 3, 1e-12));
  LossParts<double> bumped_cont{c(1), c(1), c(1), c(1), c(1), c(1 + 2), c(1)};
  CHECK_THAT(total_loss(bumped_cont, w).item() - l0,
             Catch::Matchers::WithinAbs(0.5 * 2, 1e-12));
}

TEST_CASE("missing parts simply contribute nothing") {
  LossParts<double> parts;
  parts.l_comb = Tensor<double>::constant({1}, 2.0);
  LossWeights w{1.0 / 3.0, 1.0, 1.0};
  CHECK_THAT(total_loss(parts, w).item(), Catch::Matchers::WithinAbs(2.0, 1e-12));
  LossParts<double> none;
  CHECK_THROWS_AS(total_loss(none, w), ValidationError);
}
