#pragma once

#include "auscult/model.hpp"

namespace auscult {

struct LossWeights {
  double alpha = 1.0 / 3.0, beta = 1.0, gamma = 1.0;
};

// Kullback-Leibler divergence between soft targets y and predicted rows yhat,
// plus an L2 penalty over the trainable parameters:
//   sum_n y_n log(y_n / yhat_n) + (lambda/2) ||Theta||^2
// Rows of yhat are clamped at 1e-12; clamps where y > 0 are counted so a
// collapsing softmax is visible to the caller.
template <typename T>
Tensor<T> kl_loss(const Tensor<T>& y, const Tensor<T>& yhat, const ParamRefs<T>& params,
                  T lambda_reg, long* clamp_count = nullptr) {
  require(y.shape() == yhat.shape(), "kl_loss: shape mismatch");
  if (clamp_count) {
    for (size_t i = 0; i < y.data().size(); ++i)
      if (y.data()[i] > T(0) && yhat.data()[i] < T(1e-12)) ++*clamp_count;
  }
  // y log y with the 0 log 0 = 0 convention, constant wrt the graph
  std::vector<T> logy(y.data().size());
  for (size_t i = 0; i < logy.size(); ++i)
    logy[i] = std::log(std::max(y.data()[i], T(1e-12)));
  auto log_target = Tensor<T>::from(y.shape(), std::move(logy));
  auto terms = mul(y, sub(log_target, log_t(clamp_min(yhat, T(1e-12)))));
  auto loss = sum_all(terms);
  if (lambda_reg > T(0) && !params.empty()) {
    Tensor<T> reg;
    for (auto* p : params) {
      auto sq = sum_all(mul(p->value, p->value));
      reg = reg.valid() ? add(reg, sq) : sq;
    }
    loss = add(loss, scale(reg, lambda_reg / T(2)));
  }
  return loss;
}

// Contrastive pair loss: Y*d^2 + (1-Y)*max(margin - d, 0)^2 with d the
// Euclidean distance between the two embeddings.
template <typename T>
Tensor<T> contrastive_loss(const Tensor<T>& e_i, const Tensor<T>& e_j, int label_same,
                           T margin) {
  require(e_i.shape() == e_j.shape(), "contrastive_loss: embedding shapes differ");
  require(label_same == 0 || label_same == 1, "contrastive_loss: Y must be 0 or 1");
  auto diff = sub(e_i, e_j);
  auto d2 = sum_all(mul(diff, diff));
  if (label_same == 1) return d2;
  // small floor keeps sqrt differentiable when embeddings coincide
  auto d = sqrt_t(add_scalar(d2, T(1e-12)));
  auto hinge = relu(add_scalar(scale(d, T(-1)), margin));
  return mul(hinge, hinge);
}

enum class PairPolicy { AllPairsOrDerangement, ExcludeMixed };

// Within-batch pair formation: exhaustive pairs for N <= 32, otherwise N
// derangement pairs drawn from a random rotation.
inline void form_pairs(int n, Rng& rng, std::vector<int>& first,
                       std::vector<int>& second) {
  first.clear();
  second.clear();
  if (n < 2) return;
  if (n <= 32) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        first.push_back(i);
        second.push_back(j);
      }
  } else {
    std::uniform_int_distribution<int> shift(1, n - 1);
    const int k = shift(rng);
    for (int i = 0; i < n; ++i) {
      first.push_back(i);
      second.push_back((i + k) % n);
    }
  }
}

// Mean contrastive loss over sampled within-batch pairs. `labels` are the
// dominant classes after mixup; with ExcludeMixed, items whose grid is a
// genuine cross-class blend drop out of the pairing.
template <typename T>
Tensor<T> batch_contrastive(const Tensor<T>& e, const std::vector<int>& labels,
                            T margin, Rng& rng,
                            PairPolicy policy = PairPolicy::AllPairsOrDerangement,
                            const std::vector<bool>* mixed = nullptr) {
  require(e.ndim() == 2 && int(labels.size()) == e.dim(0),
          "batch_contrastive: labels must match the batch");
  std::vector<int> keep;
  for (int i = 0; i < e.dim(0); ++i)
    if (policy != PairPolicy::ExcludeMixed || !mixed || !(*mixed)[size_t(i)])
      keep.push_back(i);
  std::vector<int> first, second;
  form_pairs(int(keep.size()), rng, first, second);
  if (first.empty()) return Tensor<T>::zeros({1});

  std::vector<int> rows_i, rows_j;
  std::vector<T> same(first.size());
  for (size_t p = 0; p < first.size(); ++p) {
    rows_i.push_back(keep[size_t(first[p])]);
    rows_j.push_back(keep[size_t(second[p])]);
    same[p] = labels[size_t(rows_i.back())] == labels[size_t(rows_j.back())] ? T(1) : T(0);
  }
  auto ei = select_rows(e, rows_i);
  auto ej = select_rows(e, rows_j);
  auto diff = sub(ei, ej);
  auto d2 = reduce_sum(mul(diff, diff), 1);                     // [P]
  auto d = sqrt_t(add_scalar(d2, T(1e-12)));
  auto hinge = relu(add_scalar(scale(d, T(-1)), margin));
  auto y = Tensor<T>::from({int(first.size())}, std::move(same));
  auto y_inv = add_scalar(scale(y, T(-1)), T(1));
  auto per_pair = add(mul(y, d2), mul(y_inv, mul(hinge, hinge)));
  return mean_all(per_pair);
}

// the seven per-step loss components; invalid tensors count as zero
template <typename T>
struct LossParts {
  Tensor<T> l_wa, l_ga, l_wm, l_comb;
  Tensor<T> c_wa, c_ga, c_wm;
};

// L_total = alpha (L_WA + L_GA + L_WM) + beta L_Comb
//         + gamma (L_WA-Cont + L_GA-Cont + L_WM-Cont)
template <typename T>
Tensor<T> total_loss(const LossParts<T>& parts, const LossWeights& w) {
  Tensor<T> acc;
  auto accumulate = [&acc](const Tensor<T>& part, double coeff) {
    if (!part.valid() || coeff == 0.0) return;
    auto scaled = scale(part, T(coeff));
    acc = acc.valid() ? add(acc, scaled) : scaled;
  };
  accumulate(parts.l_wa, w.alpha);
  accumulate(parts.l_ga, w.alpha);
  accumulate(parts.l_wm, w.alpha);
  accumulate(parts.l_comb, w.beta);
  accumulate(parts.c_wa, w.gamma);
  accumulate(parts.c_ga, w.gamma);
  accumulate(parts.c_wm, w.gamma);
  require(acc.valid(), "total_loss: no loss parts present");
  return acc;
}

}  // namespace auscult
