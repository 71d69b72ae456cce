#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>

#include "auscult/augment.hpp"
#include "auscult/loss.hpp"
#include "auscult/metrics.hpp"

namespace auscult {

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// standard Adam with bias correction; parameters without a gradient this step
// still decay their moments
template <typename T>
struct Adam {
  AdamConfig cfg;
  int64_t step_count = 0;

  void step(const ParamRefs<T>& params) {
    ++step_count;
    const T b1 = T(cfg.beta1), b2 = T(cfg.beta2);
    const T bc1 = T(1) - T(std::pow(cfg.beta1, double(step_count)));
    const T bc2 = T(1) - T(std::pow(cfg.beta2, double(step_count)));
    const T lr = T(cfg.lr), eps = T(cfg.eps);
    for (Parameter<T>* p : params) {
      auto& value = p->value.data();
      const size_t n = value.size();
      if (p->adam_m.size() != n) {
        p->adam_m.assign(n, T(0));
        p->adam_v.assign(n, T(0));
      }
      const bool has_grad = p->value.grad().size() == n;
      for (size_t i = 0; i < n; ++i) {
        const T g = has_grad ? p->value.grad()[i] : T(0);
        p->adam_m[i] = b1 * p->adam_m[i] + (T(1) - b1) * g;
        p->adam_v[i] = b2 * p->adam_v[i] + (T(1) - b2) * g * g;
        const T mhat = p->adam_m[i] / bc1;
        const T vhat = p->adam_v[i] / bc2;
        value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

// ---------------------------------------------------------------------------
// feature sets (directory of RSPK1 files + an index)
// ---------------------------------------------------------------------------

struct FeatureItem {
  FeatureTriple features;
  std::string id;
  int fine_label = -1;  // identity-task index (T1_2 or T2_2 space)
  Split split = Split::Train;
  bool from_pq_recording = false;
};

struct FeatureSet {
  std::vector<FeatureItem> items;
  FeatureLevel level = FeatureLevel::Event;
};

inline void save_feature_set(const std::string& dir, const FeatureSet& set) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json index;
  index["level"] = set.level == FeatureLevel::Event ? "event" : "recording";
  index["items"] = nlohmann::json::array();
  for (size_t i = 0; i < set.items.size(); ++i) {
    const auto& item = set.items[i];
    std::ostringstream name;
    name << "item_" << std::setw(5) << std::setfill('0') << i << ".rspk";
    FeatureTriple ft = item.features;
    ft.label = item.fine_label;
    ft.id = item.id;
    save_features((fs::path(dir) / name.str()).string(), ft);
    index["items"].push_back({{"file", name.str()},
                              {"id", item.id},
                              {"fine_label", item.fine_label},
                              {"split", to_string(item.split)},
                              {"from_pq_recording", item.from_pq_recording}});
  }
  std::ofstream out(fs::path(dir) / "index.json");
  if (!out) throw IoError("cannot write feature index in " + dir);
  out << index.dump(2) << "\n";
}

inline FeatureSet load_feature_set(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path index_path = fs::path(dir) / "index.json";
  nlohmann::json index;
  {
    std::ifstream in(index_path);
    if (!in) throw IoError("missing feature index: " + index_path.string());
    in >> index;
  }
  FeatureSet set;
  set.level = index.value("level", "event") == std::string("event")
                  ? FeatureLevel::Event
                  : FeatureLevel::Recording;
  for (const auto& ji : index["items"]) {
    FeatureItem item;
    item.features = load_features((fs::path(dir) / ji.at("file").get<std::string>()).string());
    item.id = ji.value("id", item.features.id);
    item.fine_label = ji.value("fine_label", item.features.label);
    const std::string s = ji.value("split", "train");
    item.split = s == "train" ? Split::Train
                              : (s == "validation" ? Split::Validation : Split::Test);
    item.from_pq_recording = ji.value("from_pq_recording", false);
    set.items.push_back(std::move(item));
  }
  return set;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

template <typename T>
void collect_bn_stats(SystemModel<T>& model,
                      std::vector<std::pair<std::string, BnStats<T>*>>& out);

template <typename T>
void save_checkpoint(const std::string& path, SystemModel<T>& model,
                     const Adam<T>* adam = nullptr) {
  std::vector<TensorRecord> records;
  auto to_record = [](const std::string& name, const Shape& dims,
                      const std::vector<T>& data) {
    TensorRecord r;
    r.name = name;
    r.dims = dims;
    r.data.assign(data.begin(), data.end());
    return r;
  };
  for (Parameter<T>* p : model.parameters()) {
    records.push_back(to_record(p->name, p->value.shape(), p->value.data()));
    if (adam && !p->adam_m.empty()) {
      records.push_back(to_record(p->name + ".adam_m", p->value.shape(), p->adam_m));
      records.push_back(to_record(p->name + ".adam_v", p->value.shape(), p->adam_v));
    }
  }
  // batch-norm running statistics ride along as named buffers
  std::vector<std::pair<std::string, BnStats<T>*>> bns;
  collect_bn_stats(model, bns);
  for (auto& [name, stats] : bns) {
    records.push_back(to_record(name + ".running_mean", {int(stats->mean.size())},
                                stats->mean));
    records.push_back(to_record(name + ".running_var", {int(stats->var.size())},
                                stats->var));
  }
  if (adam) {
    TensorRecord step;
    step.name = "::adam_step";
    step.dims = {1};
    step.data = {float(adam->step_count)};
    records.push_back(step);
  }
  write_records(path, records);
}

template <typename T>
void load_checkpoint(const std::string& path, SystemModel<T>& model,
                     Adam<T>* adam = nullptr) {
  auto records = read_records(path);
  std::map<std::string, TensorRecord*> by_name;
  for (auto& r : records) by_name[r.name] = &r;
  auto fetch = [&](const std::string& name) -> TensorRecord* {
    auto it = by_name.find(name);
    return it == by_name.end() ? nullptr : it->second;
  };
  for (Parameter<T>* p : model.parameters()) {
    TensorRecord* r = fetch(p->name);
    require(r != nullptr, "checkpoint: missing parameter " + p->name);
    require(r->dims == p->value.shape(), "checkpoint: shape mismatch for " + p->name);
    for (size_t i = 0; i < r->data.size(); ++i) p->value.data()[i] = T(r->data[i]);
    if (TensorRecord* m = fetch(p->name + ".adam_m")) {
      p->adam_m.assign(m->data.begin(), m->data.end());
      TensorRecord* v = fetch(p->name + ".adam_v");
      require(v != nullptr, "checkpoint: adam_v missing for " + p->name);
      p->adam_v.assign(v->data.begin(), v->data.end());
    }
  }
  std::vector<std::pair<std::string, BnStats<T>*>> bns;
  collect_bn_stats(model, bns);
  for (auto& [name, stats] : bns) {
    if (TensorRecord* m = fetch(name + ".running_mean"))
      stats->mean.assign(m->data.begin(), m->data.end());
    if (TensorRecord* v = fetch(name + ".running_var"))
      stats->var.assign(v->data.begin(), v->data.end());
  }
  if (adam) {
    if (TensorRecord* s = fetch("::adam_step"))
      adam->step_count = int64_t(s->data[0]);
  }
}

// enumerate every BnStats buffer with a stable name
template <typename T>
void collect_bn_stats(SystemModel<T>& model,
                      std::vector<std::pair<std::string, BnStats<T>*>>& out) {
  auto branch = [&](BranchModel<T>& b) {
    out.push_back({b.backbone.doub.bn1.gamma.name + "::stats", &b.backbone.doub.bn1.stats});
    out.push_back({b.backbone.doub.bn2.gamma.name + "::stats", &b.backbone.doub.bn2.stats});
    out.push_back({b.backbone.res1.bn.gamma.name + "::stats", &b.backbone.res1.bn.stats});
    out.push_back({b.backbone.res2.bn.gamma.name + "::stats", &b.backbone.res2.bn.stats});
    out.push_back({b.head.bn.gamma.name + "::stats", &b.head.bn.stats});
  };
  if (individual_variant(model.cfg.variant)) {
    branch(model.branch_for(model.cfg.variant));
  } else {
    branch(model.wa);
    branch(model.ga);
    branch(model.wm);
    out.push_back({model.comb_head.bn.gamma.name + "::stats", &model.comb_head.bn.stats});
  }
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 32;
  int epochs = 100;
  uint64_t seed = 0;
  double margin = 1.0;        // contrastive margin
  double lambda_reg = 1e-4;   // L2 coefficient inside the KL loss
  bool mixup = true;
  int crop_bins = 10;
  PairPolicy pair_policy = PairPolicy::AllPairsOrDerangement;
  bool include_pq_events = true;  // keep task-1 events from PQ recordings
  double target_train_accuracy = -1.0;  // early stop when reached; < 0 disables
  std::optional<LossWeights> loss_override;  // defaults to the system's weights
  SystemConfig system;
};

struct EpochStats {
  int epoch = 0;
  double l_wa = 0, l_ga = 0, l_wm = 0, l_comb = 0;
  double c_wa = 0, c_ga = 0, c_wm = 0;
  double total = 0;
  double val_score = 0;
  double train_accuracy = -1.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  double best_score = -1.0;
  int best_epoch = -1;
  int epochs_run = 0;
  long kl_clamp_count = 0;
};

namespace detail {

// raw (un-augmented) inputs for a span of items
template <typename T>
struct EvalBatch {
  Tensor<T> ga, wa, wm;
  std::vector<int> labels;
};

template <typename T>
EvalBatch<T> eval_batch(const std::vector<const FeatureItem*>& items, size_t from,
                        size_t count, TaskId task) {
  const int F = items[from]->features.ga.freq_bins;
  const int Tm = items[from]->features.ga.time_frames;
  std::vector<float> ga, wa, wm;
  EvalBatch<T> out;
  for (size_t i = from; i < from + count; ++i) {
    const auto& ft = items[i]->features;
    ga.insert(ga.end(), ft.ga.values.begin(), ft.ga.values.end());
    wa.insert(wa.end(), ft.wa.values.begin(), ft.wa.values.end());
    wm.insert(wm.end(), ft.wm.values.begin(), ft.wm.values.end());
    out.labels.push_back(coarse_label(task, items[i]->fine_label));
  }
  out.ga = batch_input<T>(ga, int(count), F, Tm);
  out.wa = batch_input<T>(wa, int(count), F, Tm);
  out.wm = batch_input<T>(wm, int(count), F, Tm);
  return out;
}

}  // namespace detail

// Eval-mode predictions (argmax of the combination head) over a list of items.
template <typename T>
std::vector<int> predict(SystemModel<T>& model, const std::vector<const FeatureItem*>& items,
                         int batch_size = 4) {
  std::vector<int> preds;
  Rng rng(0);  // unused in eval mode
  for (size_t from = 0; from < items.size(); from += size_t(batch_size)) {
    const size_t count = std::min(size_t(batch_size), items.size() - from);
    auto b = detail::eval_batch<T>(items, from, count, model.cfg.task);
    auto out = model.forward(b.ga, b.wa, b.wm, false, rng);
    const int C = model.cfg.classes();
    for (size_t i = 0; i < count; ++i) {
      int best = 0;
      for (int c = 1; c < C; ++c)
        if (out.p_comb.data()[i * size_t(C) + size_t(c)] >
            out.p_comb.data()[i * size_t(C) + size_t(best)])
          best = c;
      preds.push_back(best);
    }
  }
  return preds;
}

struct EvalResult {
  ConfusionMatrix cm;
  MetricReport report;
  std::vector<std::string> ids;
  std::vector<int> truths, preds;
};

template <typename T>
EvalResult evaluate(SystemModel<T>& model, const std::vector<const FeatureItem*>& items) {
  require(!items.empty(), "evaluate: no items");
  const TaskId task = model.cfg.task;
  EvalResult r{ConfusionMatrix(model.cfg.classes(), normal_class(task)), {}, {}, {}, {}};
  r.preds = predict(model, items);
  for (size_t i = 0; i < items.size(); ++i) {
    const int truth = coarse_label(task, items[i]->fine_label);
    r.truths.push_back(truth);
    r.ids.push_back(items[i]->id);
    r.cm.add(truth, r.preds[i]);
  }
  r.report = compute_report(r.cm);
  return r;
}

inline void write_predictions_csv(const std::string& path, const EvalResult& r,
                                  TaskId task) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write predictions: " + path);
  const auto names = class_names(task);
  out << "id,true_label,predicted_label\n";
  for (size_t i = 0; i < r.ids.size(); ++i)
    out << r.ids[i] << "," << names[size_t(r.truths[i])] << ","
        << names[size_t(r.preds[i])] << "\n";
}

inline void write_history_csv(const std::string& path,
                              const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write history: " + path);
  out << "epoch,l_wa,l_ga,l_wm,l_comb,c_wa,c_ga,c_wm,total,val_score,train_accuracy\n";
  out << std::setprecision(10);
  for (const auto& e : history)
    out << e.epoch << "," << e.l_wa << "," << e.l_ga << "," << e.l_wm << ","
        << e.l_comb << "," << e.c_wa << "," << e.c_ga << "," << e.c_wm << ","
        << e.total << "," << e.val_score << "," << e.train_accuracy << "\n";
}

// Full training loop: balanced batches -> forward -> multi-objective loss ->
// Adam. Keeps the best-validation-Score checkpoint in `out_dir` (best.ckpt)
// next to the final one (last.ckpt) and the loss history (history.csv).
template <typename T>
TrainResult train(SystemModel<T>& model, const FeatureSet& features,
                  const TrainConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const TaskId task = model.cfg.task;
  const int C = model.cfg.classes();
  require(cfg.batch_size % C == 0,
          "train: batch size must be divisible by the class count");

  // pools: task-1 events from PQ recordings stay unless configured away
  std::vector<const FeatureItem*> train_items, val_items;
  std::vector<const FeatureTriple*> train_pool;
  std::vector<int> train_labels;
  for (const auto& item : features.items) {
    if (event_level(task) && item.from_pq_recording && !cfg.include_pq_events) continue;
    if (item.split == Split::Train) {
      train_items.push_back(&item);
      train_pool.push_back(&item.features);
      train_labels.push_back(coarse_label(task, item.fine_label));
    } else if (item.split == Split::Validation) {
      val_items.push_back(&item);
    }
  }
  require(!train_items.empty(), "train: empty training split");
  if (val_items.empty()) val_items = train_items;  // fall back for tiny sets

  AugmentConfig aug;
  aug.batch_size = cfg.batch_size;
  aug.mixup = cfg.mixup;
  aug.crop_bins = cfg.crop_bins;
  aug.seed = cfg.seed;

  Adam<T> adam;
  adam.cfg.lr = cfg.lr;
  auto params = model.parameters();
  const LossWeights weights = cfg.loss_override.value_or(
      LossWeights{model.cfg.alpha, model.cfg.beta, model.cfg.gamma});

  const int steps_per_epoch =
      std::max<int>(1, int(train_pool.size()) / cfg.batch_size);
  TrainResult result;
  uint64_t batch_index = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    for (int step = 0; step < steps_per_epoch; ++step, ++batch_index) {
      AugmentedBatch batch = assemble_batch(train_pool, train_labels, C, aug, batch_index);
      auto x_ga = batch_input<T>(batch.ga, batch.batch, batch.freq, batch.frames);
      auto x_wa = batch_input<T>(batch.wa, batch.batch, batch.freq, batch.frames);
      auto x_wm = batch_input<T>(batch.wm, batch.batch, batch.freq, batch.frames);
      std::vector<T> yv(batch.soft_labels.begin(), batch.soft_labels.end());
      auto y = Tensor<T>::from({batch.batch, C}, std::move(yv));

      Rng step_rng(derive_seed(cfg.seed ^ 0x5eedf00d, batch_index));
      auto out = model.forward(x_ga, x_wa, x_wm, true, step_rng);

      LossParts<T> parts;
      // the combination loss carries the single global L2 term; the branch
      // KL losses stay unregularized so the penalty enters the total once
      if (out.p_wa.valid())
        parts.l_wa = kl_loss<T>(y, out.p_wa, {}, T(0), &result.kl_clamp_count);
      if (out.p_ga.valid())
        parts.l_ga = kl_loss<T>(y, out.p_ga, {}, T(0), &result.kl_clamp_count);
      if (out.p_wm.valid())
        parts.l_wm = kl_loss<T>(y, out.p_wm, {}, T(0), &result.kl_clamp_count);
      parts.l_comb =
          kl_loss<T>(y, out.p_comb, params, T(cfg.lambda_reg), &result.kl_clamp_count);
      if (weights.gamma != 0.0) {
        std::vector<bool> mixed(size_t(batch.batch), false);
        for (int i = 0; i < batch.batch; ++i)
          mixed[size_t(i)] = batch.mix_ratio[size_t(i)] > 0.01f &&
                             batch.mix_ratio[size_t(i)] < 0.99f;
        Rng pair_rng(derive_seed(cfg.seed ^ 0xc0917a57, batch_index));
        if (out.e_wa.valid())
          parts.c_wa = batch_contrastive<T>(out.e_wa, batch.dominant_class,
                                            T(cfg.margin), pair_rng, cfg.pair_policy,
                                            &mixed);
        if (out.e_ga.valid())
          parts.c_ga = batch_contrastive<T>(out.e_ga, batch.dominant_class,
                                            T(cfg.margin), pair_rng, cfg.pair_policy,
                                            &mixed);
        if (out.e_wm.valid())
          parts.c_wm = batch_contrastive<T>(out.e_wm, batch.dominant_class,
                                            T(cfg.margin), pair_rng, cfg.pair_policy,
                                            &mixed);
      }
      auto loss = total_loss(parts, weights);
      if (!std::isfinite(double(loss.item()))) {
        nlohmann::json diag = {{"epoch", epoch},
                               {"batch_index", batch_index},
                               {"loss", double(loss.item())}};
        std::ofstream dump(fs::path(out_dir) / "nan_batch.json");
        dump << diag.dump(2) << "\n";
        throw ValidationError("train: non-finite loss at batch " +
                              std::to_string(batch_index) + " (diagnostic dumped)");
      }
      backward(loss);
      adam.step(params);

      auto part_val = [](const Tensor<T>& t) { return t.valid() ? double(t.item()) : 0.0; };
      stats.l_wa += part_val(parts.l_wa) / steps_per_epoch;
      stats.l_ga += part_val(parts.l_ga) / steps_per_epoch;
      stats.l_wm += part_val(parts.l_wm) / steps_per_epoch;
      stats.l_comb += part_val(parts.l_comb) / steps_per_epoch;
      stats.c_wa += part_val(parts.c_wa) / steps_per_epoch;
      stats.c_ga += part_val(parts.c_ga) / steps_per_epoch;
      stats.c_wm += part_val(parts.c_wm) / steps_per_epoch;
      stats.total += double(loss.item()) / steps_per_epoch;
    }

    // per-epoch validation Score; train accuracy shares the pass when the
    // validation pool is the training pool
    EvalResult val = evaluate(model, val_items);
    stats.val_score = val.report.score;
    const bool same_pool = val_items.size() == train_items.size() &&
                           std::equal(val_items.begin(), val_items.end(),
                                      train_items.begin());
    if (cfg.target_train_accuracy >= 0.0) {
      std::vector<int> preds;
      std::vector<const FeatureItem*>* pool = &train_items;
      if (same_pool) {
        preds = val.preds;
      } else {
        preds = predict(model, train_items);
      }
      int hits = 0;
      for (size_t i = 0; i < pool->size(); ++i)
        if (preds[i] == coarse_label(task, (*pool)[i]->fine_label)) hits++;
      stats.train_accuracy = double(hits) / double(pool->size());
    }
    result.history.push_back(stats);
    result.epochs_run = epoch + 1;
    if (stats.val_score > result.best_score) {
      result.best_score = stats.val_score;
      result.best_epoch = epoch;
      save_checkpoint((fs::path(out_dir) / "best.ckpt").string(), model, &adam);
    }
    if (cfg.target_train_accuracy >= 0.0 &&
        stats.train_accuracy >= cfg.target_train_accuracy)
      break;
  }
  save_checkpoint((fs::path(out_dir) / "last.ckpt").string(), model, &adam);
  write_history_csv((fs::path(out_dir) / "history.csv").string(), result.history);
  return result;
}

// ---------------------------------------------------------------------------
// embedding dump (CSV consumed by external visualization)
// ---------------------------------------------------------------------------

template <typename T>
void dump_embeddings(SystemModel<T>& model, const std::vector<const FeatureItem*>& items,
                     const std::string& path, int batch_size = 4) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings: " + path);
  out << std::setprecision(8);
  bool header = false;
  Rng rng(0);
  for (size_t from = 0; from < items.size(); from += size_t(batch_size)) {
    const size_t count = std::min(size_t(batch_size), items.size() - from);
    auto b = detail::eval_batch<T>(items, from, count, model.cfg.task);
    auto o = model.forward(b.ga, b.wa, b.wm, false, rng);
    auto width = [](const Tensor<T>& t) { return t.valid() ? int(t.dim(1)) : 0; };
    if (!header) {
      out << "id,label";
      for (int k = 0; k < width(o.e_wa); ++k) out << ",e_wa_" << k;
      for (int k = 0; k < width(o.e_ga); ++k) out << ",e_ga_" << k;
      for (int k = 0; k < width(o.e_wm); ++k) out << ",e_wm_" << k;
      for (int k = 0; k < width(o.a); ++k) out << ",a_" << k;
      out << "\n";
      header = true;
    }
    for (size_t i = 0; i < count; ++i) {
      out << items[from + i]->id << "," << b.labels[i];
      auto put = [&](const Tensor<T>& t) {
        if (!t.valid()) return;
        for (int k = 0; k < t.dim(1); ++k)
          out << "," << double(t.data()[i * size_t(t.dim(1)) + size_t(k)]);
      };
      put(o.e_wa);
      put(o.e_ga);
      put(o.e_wm);
      put(o.a);
      out << "\n";
    }
  }
}

}  // namespace auscult
