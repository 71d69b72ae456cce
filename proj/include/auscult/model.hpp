#pragma once

#include "auscult/dataset.hpp"
#include "auscult/nn_ops.hpp"

namespace auscult {

// ---------------------------------------------------------------------------
// parameters and layers
// ---------------------------------------------------------------------------

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  std::vector<T> adam_m, adam_v;  // optimizer state, sized on first step
};

template <typename T>
using ParamRefs = std::vector<Parameter<T>*>;

namespace detail {

template <typename T>
Tensor<T> kaiming_uniform(const Shape& s, int64_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in));
  std::uniform_real_distribution<double> d(-bound, bound);
  std::vector<T> vals(size_t(numel(s)));
  for (auto& v : vals) v = T(d(rng));
  return Tensor<T>::from(s, std::move(vals), true);
}

}  // namespace detail

template <typename T>
struct Conv2dLayer {
  Parameter<T> w, b;

  void init(const std::string& name, int oc, int ic, int kh, int kw, Rng& rng) {
    w.name = name + ".w";
    w.value = detail::kaiming_uniform<T>({oc, ic, kh, kw}, int64_t(ic) * kh * kw, rng);
    b.name = name + ".b";
    b.value = Tensor<T>::zeros({oc}, true);
  }
  Tensor<T> forward(const Tensor<T>& x) const { return conv2d_same(x, w.value, b.value); }
  void collect(ParamRefs<T>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

template <typename T>
struct BnLayer {
  Parameter<T> gamma, beta;
  BnStats<T> stats;

  void init(const std::string& name, int channels) {
    gamma.name = name + ".gamma";
    gamma.value = Tensor<T>::constant({channels}, T(1), true);
    beta.name = name + ".beta";
    beta.value = Tensor<T>::zeros({channels}, true);
    stats.init(channels);
  }
  Tensor<T> forward(const Tensor<T>& x, bool train) {
    return batch_norm(x, gamma.value, beta.value, stats, train);
  }
  void collect(ParamRefs<T>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

template <typename T>
struct DenseLayer {
  Parameter<T> w, b;

  void init(const std::string& name, int din, int dout, Rng& rng) {
    w.name = name + ".w";
    w.value = detail::kaiming_uniform<T>({din, dout}, din, rng);
    b.name = name + ".b";
    b.value = Tensor<T>::zeros({dout}, true);
  }
  Tensor<T> forward(const Tensor<T>& x) const { return dense(x, w.value, b.value); }
  void collect(ParamRefs<T>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

// lambda-weighted shortcut around frequency-wise instance normalization
template <typename T>
Tensor<T> resnorm(const Tensor<T>& x, T lambda) {
  return add(scale(x, lambda), instance_norm_freq(x));
}

// ---------------------------------------------------------------------------
// architecture config
// ---------------------------------------------------------------------------

struct Inc01Spec {
  int out_channels = 8;  // per kernel branch; kernels fixed {3x3, 1x1, 4x1}
};

struct Inc02Spec {
  int out_channels = 128;
  int k = 3;  // odd; kernels {Kx1, KxK, 1xK}
};

struct BackboneConfig {
  Inc01Spec doub_inc;
  int doub_ap = 2;          // AP kernel in the Doub-Inc block
  double doub_drop = 0.2;
  Inc02Spec inc_res_1{128, 3};
  Inc02Spec inc_res_2{256, 3};
  int sub_branch_ap = 1;    // AP after each Inc02 kernel branch (shape-preserving)
  int res_mp = 2;           // MP at each Inc-Res block exit
  double res_drop = 0.2;
  double rn_lambda = 0.4;
};

struct AttentionSpec {
  int heads = 16;
  int key_dim = 32;
};

enum class Variant {
  IndividualWA,
  IndividualGA,
  IndividualWM,
  SystemI,
  SystemII,
  SystemIII
};

inline const char* to_string(Variant v) {
  static const char* names[] = {"individual_wa", "individual_ga", "individual_wm",
                                "system1",       "system2",       "system3"};
  return names[int(v)];
}
inline std::optional<Variant> parse_variant(const std::string& s) {
  for (int i = 0; i < 6; ++i)
    if (s == to_string(Variant(i))) return Variant(i);
  return std::nullopt;
}
inline bool individual_variant(Variant v) {
  return v == Variant::IndividualWA || v == Variant::IndividualGA ||
         v == Variant::IndividualWM;
}

enum class CombinerKind { Concat, Linear };

struct SystemConfig {
  Variant variant = Variant::SystemIII;
  CombinerKind combiner = CombinerKind::Linear;
  bool attention = true;
  double alpha = 1.0 / 3.0, beta = 1.0, gamma = 1.0;
  TaskId task = TaskId::T1_1;
  int input_freq = 128;
  int input_frames = 155;
  double head_drop = 0.2;
  BackboneConfig backbone;
  AttentionSpec attn;

  int classes() const { return class_count(task); }
};

// variant presets; alpha/beta/gamma and the combiner follow the system definitions
inline SystemConfig make_system_config(Variant v, TaskId task) {
  SystemConfig cfg;
  cfg.variant = v;
  cfg.task = task;
  cfg.input_frames = event_level(task) ? 155 : 512;
  switch (v) {
    case Variant::SystemI:
      cfg.combiner = CombinerKind::Concat;
      cfg.attention = false;
      cfg.gamma = 0.0;
      break;
    case Variant::SystemII:
      cfg.combiner = CombinerKind::Concat;
      cfg.attention = true;
      cfg.gamma = 0.0;
      break;
    case Variant::SystemIII:
      cfg.combiner = CombinerKind::Linear;
      cfg.attention = true;
      cfg.gamma = 1.0;
      break;
    default:  // individual branches: the single head plays the combination role
      cfg.attention = true;
      cfg.alpha = 0.0;
      cfg.beta = 1.0;
      cfg.gamma = 0.0;
      break;
  }
  return cfg;
}

inline void validate(const SystemConfig& cfg) {
  require(cfg.backbone.inc_res_1.k >= 1 && cfg.backbone.inc_res_1.k % 2 == 1 &&
              cfg.backbone.inc_res_2.k >= 1 && cfg.backbone.inc_res_2.k % 2 == 1,
          "SystemConfig: Inc02 kernel size K must be odd and >= 1");
  require(cfg.backbone.rn_lambda >= 0.0 && cfg.backbone.rn_lambda <= 1.0,
          "SystemConfig: rn_lambda must lie in [0,1]");
  require(cfg.backbone.inc_res_1.out_channels <= cfg.backbone.inc_res_2.out_channels,
          "SystemConfig: Inc-Res channels must not decrease");
  if (cfg.variant == Variant::SystemI)
    require(cfg.combiner == CombinerKind::Concat && !cfg.attention && cfg.gamma == 0.0,
            "SystemConfig: system1 is concat, no attention, gamma = 0");
  if (cfg.variant == Variant::SystemIII)
    require(cfg.combiner == CombinerKind::Linear && cfg.attention && cfg.gamma == 1.0,
            "SystemConfig: system3 is linear combiner, attention, gamma = 1");
}

// spatial extent of the backbone output for a given input size
struct BackboneDims {
  int channels, freq, frames;
};
inline BackboneDims backbone_output_dims(const BackboneConfig& bb, int F, int Tm) {
  BackboneDims d;
  d.freq = ((F / bb.doub_ap) / bb.res_mp) / bb.res_mp;
  d.frames = ((Tm / bb.doub_ap) / bb.res_mp) / bb.res_mp;
  d.channels = bb.inc_res_2.out_channels;
  return d;
}

// width of the per-branch embedding e (concat of the three attention outputs)
inline int embedding_width(const SystemConfig& cfg) {
  const auto d = backbone_output_dims(cfg.backbone, cfg.input_freq, cfg.input_frames);
  return d.frames + d.freq + d.frames;
}

// ---------------------------------------------------------------------------
// blocks
// ---------------------------------------------------------------------------

// variant of the naive inception layer: parallel {3x3, 1x1, 4x1} convolutions
// concatenated on the channel axis
template <typename T>
struct Inc01Layer {
  Conv2dLayer<T> k3x3, k1x1, k4x1;

  void init(const std::string& name, int in_c, const Inc01Spec& spec, Rng& rng) {
    k3x3.init(name + ".k3x3", spec.out_channels, in_c, 3, 3, rng);
    k1x1.init(name + ".k1x1", spec.out_channels, in_c, 1, 1, rng);
    k4x1.init(name + ".k4x1", spec.out_channels, in_c, 4, 1, rng);
  }
  int out_channels(const Inc01Spec& spec) const { return 3 * spec.out_channels; }
  Tensor<T> forward(const Tensor<T>& x) const {
    return concat<T>({k3x3.forward(x), k1x1.forward(x), k4x1.forward(x)}, 1);
  }
  void collect(ParamRefs<T>& out) {
    k3x3.collect(out);
    k1x1.collect(out);
    k4x1.collect(out);
  }
};

// inception kernels {Kx1, KxK, 1xK}, each followed by a shape-preserving AP,
// summed rather than concatenated
template <typename T>
struct Inc02Layer {
  Conv2dLayer<T> kx1, kxk, c1xk;
  int ap = 1;

  void init(const std::string& name, int in_c, const Inc02Spec& spec, int sub_ap,
            Rng& rng) {
    kx1.init(name + ".kx1", spec.out_channels, in_c, spec.k, 1, rng);
    kxk.init(name + ".kxk", spec.out_channels, in_c, spec.k, spec.k, rng);
    c1xk.init(name + ".1xk", spec.out_channels, in_c, 1, spec.k, rng);
    ap = sub_ap;
  }
  Tensor<T> forward(const Tensor<T>& x) const {
    auto a = avg_pool(kx1.forward(x), ap, ap);
    auto b = avg_pool(kxk.forward(x), ap, ap);
    auto c = avg_pool(c1xk.forward(x), ap, ap);
    return add(add(a, b), c);
  }
  void collect(ParamRefs<T>& out) {
    kx1.collect(out);
    kxk.collect(out);
    c1xk.collect(out);
  }
};

// two Inc01 layers each followed by BN-ReLU, then AP, Dropout, RN
template <typename T>
struct DoubIncBlock {
  Inc01Layer<T> inc1, inc2;
  BnLayer<T> bn1, bn2;
  int ap = 2;
  double drop = 0.2;
  T lambda = T(0.4);

  void init(const std::string& name, int in_c, const BackboneConfig& bb, Rng& rng) {
    inc1.init(name + ".inc1", in_c, bb.doub_inc, rng);
    bn1.init(name + ".bn1", inc1.out_channels(bb.doub_inc));
    inc2.init(name + ".inc2", inc1.out_channels(bb.doub_inc), bb.doub_inc, rng);
    bn2.init(name + ".bn2", inc2.out_channels(bb.doub_inc));
    ap = bb.doub_ap;
    drop = bb.doub_drop;
    lambda = T(bb.rn_lambda);
  }
  Tensor<T> forward(const Tensor<T>& x, bool train, Rng& rng) {
    auto h = relu(bn1.forward(inc1.forward(x), train));
    h = relu(bn2.forward(inc2.forward(h), train));
    h = avg_pool(h, ap, ap);
    h = dropout(h, drop, rng, train);
    return resnorm(h, lambda);
  }
  void collect(ParamRefs<T>& out) {
    inc1.collect(out);
    bn1.collect(out);
    inc2.collect(out);
    bn2.collect(out);
  }
};

// summed Inc02 branches merged with a 1x1-conv residual path, then
// BN-ReLU-MP-Dropout-RN
template <typename T>
struct IncResBlock {
  Inc02Layer<T> inc;
  Conv2dLayer<T> residual;
  BnLayer<T> bn;
  int mp = 2;
  double drop = 0.2;
  T lambda = T(0.4);

  void init(const std::string& name, int in_c, const Inc02Spec& spec,
            const BackboneConfig& bb, Rng& rng) {
    inc.init(name + ".inc", in_c, spec, bb.sub_branch_ap, rng);
    residual.init(name + ".res", spec.out_channels, in_c, 1, 1, rng);
    bn.init(name + ".bn", spec.out_channels);
    mp = bb.res_mp;
    drop = bb.res_drop;
    lambda = T(bb.rn_lambda);
  }
  Tensor<T> forward(const Tensor<T>& x, bool train, Rng& rng) {
    auto h = add(inc.forward(x), residual.forward(x));
    h = relu(bn.forward(h, train));
    h = max_pool(h, mp, mp);
    h = dropout(h, drop, rng, train);
    return resnorm(h, lambda);
  }
  void collect(ParamRefs<T>& out) {
    inc.collect(out);
    residual.collect(out);
    bn.collect(out);
  }
};

template <typename T>
struct PooledFeatures {
  Tensor<T> freq;  // avg over channels  [B,F,T]
  Tensor<T> time;  // max over time      [B,C,F]
  Tensor<T> chan;  // avg over frequency [B,C,T]
};

template <typename T>
PooledFeatures<T> pooling_block(const Tensor<T>& x) {
  return {global_pool(x, GlobalPool::AvgChannel), global_pool(x, GlobalPool::MaxTime),
          global_pool(x, GlobalPool::AvgFreq)};
}

template <typename T>
struct Backbone {
  DoubIncBlock<T> doub;
  IncResBlock<T> res1, res2;

  void init(const std::string& name, const BackboneConfig& bb, Rng& rng) {
    doub.init(name + ".doub", 1, bb, rng);
    res1.init(name + ".res1", doub.inc2.out_channels(bb.doub_inc), bb.inc_res_1, bb, rng);
    res2.init(name + ".res2", bb.inc_res_1.out_channels, bb.inc_res_2, bb, rng);
  }
  Tensor<T> forward(const Tensor<T>& x, bool train, Rng& rng) {
    auto h = doub.forward(x, train, rng);
    h = res1.forward(h, train, rng);
    return res2.forward(h, train, rng);
  }
  void collect(ParamRefs<T>& out) {
    doub.collect(out);
    res1.collect(out);
    res2.collect(out);
  }
};

// ---------------------------------------------------------------------------
// attention
// ---------------------------------------------------------------------------

// scaled dot-product self-attention over [B, L, D]; projections map D to
// heads*key_dim and back
template <typename T>
struct Mha {
  DenseLayer<T> wq, wk, wv, wo;
  int heads = 16, key_dim = 32, model_dim = 0;

  void init(const std::string& name, int d_model, const AttentionSpec& spec, Rng& rng) {
    heads = spec.heads;
    key_dim = spec.key_dim;
    model_dim = d_model;
    const int inner = heads * key_dim;
    wq.init(name + ".wq", d_model, inner, rng);
    wk.init(name + ".wk", d_model, inner, rng);
    wv.init(name + ".wv", d_model, inner, rng);
    wo.init(name + ".wo", inner, d_model, rng);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    require(x.ndim() == 3 && x.dim(2) == model_dim, "attention: bad input shape");
    const int B = x.dim(0), L = x.dim(1), D = model_dim;
    auto split = [&](const DenseLayer<T>& proj) {
      auto flat = proj.forward(reshape(x, {B * L, D}));           // [B*L, H*dk]
      auto heads4 = permute(reshape(flat, {B, L, heads, key_dim}), {0, 2, 1, 3});
      return reshape(heads4, {B * heads, L, key_dim});            // [B*H, L, dk]
    };
    auto q = split(wq), k = split(wk), v = split(wv);
    auto scores = scale(bmm(q, permute(k, {0, 2, 1})), T(1) / std::sqrt(T(key_dim)));
    auto att = softmax(scores, 2);                                // rows over keys
    auto ctx = bmm(att, v);                                       // [B*H, L, dk]
    auto merged = reshape(permute(reshape(ctx, {B, heads, L, key_dim}), {0, 2, 1, 3}),
                          {B * L, heads * key_dim});
    return reshape(wo.forward(merged), {B, L, D});
  }
  void collect(ParamRefs<T>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
  }
};

// One attention layer per pooled feature (sequence axis first), each output
// mean-pooled over the sequence; the three vectors concatenate into e.
template <typename T>
struct AttentionBlock {
  Mha<T> on_freq, on_time, on_chan;

  void init(const std::string& name, const BackboneDims& d, const AttentionSpec& spec,
            Rng& rng) {
    on_freq.init(name + ".freq", d.frames, spec, rng);  // [B,F,T]: L=F, D=T
    on_time.init(name + ".time", d.freq, spec, rng);    // [B,C,F]: L=C, D=F
    on_chan.init(name + ".chan", d.frames, spec, rng);  // [B,C,T]: L=C, D=T
  }
  Tensor<T> forward(const PooledFeatures<T>& p) const {
    auto e1 = reduce_mean(on_freq.forward(p.freq), 1);
    auto e2 = reduce_mean(on_time.forward(p.time), 1);
    auto e3 = reduce_mean(on_chan.forward(p.chan), 1);
    return concat<T>({e1, e2, e3}, 1);
  }
  void collect(ParamRefs<T>& out) {
    on_freq.collect(out);
    on_time.collect(out);
    on_chan.collect(out);
  }
};

// without attention the pooled maps are mean-pooled over their sequence axis
// directly, giving an embedding of the same width
template <typename T>
Tensor<T> pooled_embedding(const PooledFeatures<T>& p) {
  return concat<T>({reduce_mean(p.freq, 1), reduce_mean(p.time, 1),
                    reduce_mean(p.chan, 1)},
                   1);
}

// ---------------------------------------------------------------------------
// heads and combiners
// ---------------------------------------------------------------------------

// FC[E] + BN + ReLU + Dropout, then FC[T] + Softmax
template <typename T>
struct DnnHead {
  DenseLayer<T> fc1, fc2;
  BnLayer<T> bn;
  double drop = 0.2;

  void init(const std::string& name, int e_dim, int classes, double drop_ratio,
            Rng& rng) {
    fc1.init(name + ".fc1", e_dim, e_dim, rng);
    bn.init(name + ".bn", e_dim);
    fc2.init(name + ".fc2", e_dim, classes, rng);
    drop = drop_ratio;
  }
  Tensor<T> forward(const Tensor<T>& e, bool train, Rng& rng) {
    auto h = relu(bn.forward(fc1.forward(e), train));
    h = dropout(h, drop, rng, train);
    return softmax(fc2.forward(h), 1);
  }
  void collect(ParamRefs<T>& out) {
    fc1.collect(out);
    bn.collect(out);
    fc2.collect(out);
  }
};

template <typename T>
Tensor<T> combiner_concat(const Tensor<T>& e_wa, const Tensor<T>& e_ga,
                          const Tensor<T>& e_wm) {
  return concat<T>({e_wa, e_ga, e_wm}, 1);
}

// a = ReLU(e_wa o w_wa + e_ga o w_ga + e_wm o w_wm + w_bias), elementwise
template <typename T>
Tensor<T> combiner_linear(const Tensor<T>& e_wa, const Tensor<T>& e_ga,
                          const Tensor<T>& e_wm, const Tensor<T>& w_wa,
                          const Tensor<T>& w_ga, const Tensor<T>& w_wm,
                          const Tensor<T>& w_bias) {
  auto mixed = add(add(mul_rowvec(e_wa, w_wa), mul_rowvec(e_ga, w_ga)),
                   mul_rowvec(e_wm, w_wm));
  return relu(add_rowvec(mixed, w_bias));
}

// ---------------------------------------------------------------------------
// full system
// ---------------------------------------------------------------------------

template <typename T>
struct BranchModel {
  Backbone<T> backbone;
  AttentionBlock<T> attn;
  DnnHead<T> head;
  bool use_attention = true;

  void init(const std::string& name, const SystemConfig& cfg, Rng& rng) {
    backbone.init(name + ".backbone", cfg.backbone, rng);
    use_attention = cfg.attention;
    const auto dims =
        backbone_output_dims(cfg.backbone, cfg.input_freq, cfg.input_frames);
    if (use_attention) attn.init(name + ".attn", dims, cfg.attn, rng);
    head.init(name + ".head", embedding_width(cfg), cfg.classes(), cfg.head_drop, rng);
  }
  // returns (embedding e, class distribution p)
  std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T>& x, bool train, Rng& rng) {
    auto pooled = pooling_block(backbone.forward(x, train, rng));
    auto e = use_attention ? attn.forward(pooled) : pooled_embedding(pooled);
    auto p = head.forward(e, train, rng);
    return {e, p};
  }
  void collect(ParamRefs<T>& out) {
    backbone.collect(out);
    if (use_attention) attn.collect(out);
    head.collect(out);
  }
};

template <typename T>
struct SystemOutput {
  Tensor<T> p_wa, p_ga, p_wm, p_comb;
  Tensor<T> e_wa, e_ga, e_wm;
  Tensor<T> a;  // combined feature entering the combination head
};

// The four-branch classifier: three spectrogram branches with independent
// backbones plus the combination branch. Individual variants instantiate a
// single branch whose head doubles as the inference head.
template <typename T>
struct SystemModel {
  SystemConfig cfg;
  BranchModel<T> wa, ga, wm;
  Parameter<T> w_wa, w_ga, w_wm, w_bias;  // linear combiner weights
  DnnHead<T> comb_head;

  void init(const SystemConfig& config, uint64_t seed) {
    cfg = config;
    validate(cfg);
    Rng rng(derive_seed(seed, 0xC0FFEE));
    const int E = embedding_width(cfg);
    if (individual_variant(cfg.variant)) {
      const char* name = cfg.variant == Variant::IndividualWA
                             ? "wa"
                             : (cfg.variant == Variant::IndividualGA ? "ga" : "wm");
      branch_for(cfg.variant).init(name, cfg, rng);
      return;
    }
    wa.init("wa", cfg, rng);
    ga.init("ga", cfg, rng);
    wm.init("wm", cfg, rng);
    if (cfg.combiner == CombinerKind::Linear) {
      // start from an equal-contribution mix
      w_wa = {"comb.w_wa", Tensor<T>::constant({E}, T(1), true), {}, {}};
      w_ga = {"comb.w_ga", Tensor<T>::constant({E}, T(1), true), {}, {}};
      w_wm = {"comb.w_wm", Tensor<T>::constant({E}, T(1), true), {}, {}};
      w_bias = {"comb.w_bias", Tensor<T>::zeros({E}, true), {}, {}};
      comb_head.init("comb.head", E, cfg.classes(), cfg.head_drop, rng);
    } else {
      comb_head.init("comb.head", 3 * E, cfg.classes(), cfg.head_drop, rng);
    }
  }

  BranchModel<T>& branch_for(Variant v) {
    if (v == Variant::IndividualWA) return wa;
    if (v == Variant::IndividualGA) return ga;
    return wm;
  }

  // inputs are [B,1,F,T] grids per spectrogram kind
  SystemOutput<T> forward(const Tensor<T>& x_ga, const Tensor<T>& x_wa,
                          const Tensor<T>& x_wm, bool train, Rng& rng) {
    SystemOutput<T> out;
    if (individual_variant(cfg.variant)) {
      auto& branch = branch_for(cfg.variant);
      const Tensor<T>& x = cfg.variant == Variant::IndividualWA
                               ? x_wa
                               : (cfg.variant == Variant::IndividualGA ? x_ga : x_wm);
      auto [e, p] = branch.forward(x, train, rng);
      if (cfg.variant == Variant::IndividualWA) {
        out.e_wa = e;
        out.p_wa = p;
      } else if (cfg.variant == Variant::IndividualGA) {
        out.e_ga = e;
        out.p_ga = p;
      } else {
        out.e_wm = e;
        out.p_wm = p;
      }
      out.p_comb = p;  // single head serves as the system prediction
      out.a = e;
      return out;
    }
    auto [e_wa, p_wa] = wa.forward(x_wa, train, rng);
    auto [e_ga, p_ga] = ga.forward(x_ga, train, rng);
    auto [e_wm, p_wm] = wm.forward(x_wm, train, rng);
    out.e_wa = e_wa;
    out.e_ga = e_ga;
    out.e_wm = e_wm;
    out.p_wa = p_wa;
    out.p_ga = p_ga;
    out.p_wm = p_wm;
    out.a = cfg.combiner == CombinerKind::Linear
                ? combiner_linear(e_wa, e_ga, e_wm, w_wa.value, w_ga.value,
                                  w_wm.value, w_bias.value)
                : combiner_concat(e_wa, e_ga, e_wm);
    out.p_comb = comb_head.forward(out.a, train, rng);
    return out;
  }

  ParamRefs<T> parameters() {
    ParamRefs<T> out;
    if (individual_variant(cfg.variant)) {
      branch_for(cfg.variant).collect(out);
      return out;
    }
    wa.collect(out);
    ga.collect(out);
    wm.collect(out);
    if (cfg.combiner == CombinerKind::Linear) {
      out.push_back(&w_wa);
      out.push_back(&w_ga);
      out.push_back(&w_wm);
      out.push_back(&w_bias);
    }
    comb_head.collect(out);
    return out;
  }

  int64_t parameter_count() {
    int64_t n = 0;
    for (auto* p : parameters()) n += p->value.size();
    return n;
  }
};

// batch grid -> [B,1,F,T] input tensor
template <typename T>
Tensor<T> batch_input(const std::vector<float>& grids, int batch, int F, int Tm) {
  std::vector<T> vals(grids.size());
  for (size_t i = 0; i < grids.size(); ++i) vals[i] = T(grids[i]);
  return Tensor<T>::from({batch, 1, F, Tm}, std::move(vals));
}

}  // namespace auscult
