#pragma once

// Network assembly. Three variants share one parameter registry design:
//
//   resnet  - classic CIFAR-style residual network (basic blocks, strided
//             first block per level with 1x1 projection shortcuts)
//   mgnet   - per resolution level, nu iterations of the residual smoothing
//             update u <- u + B^i(f - A(u)), with A and/or B optionally
//             shared across iterations; data moves between levels through
//             learnable depthwise pooling operators R (and Pi under FAS)
//   mgiad   - mgnet where each level's smoothing is replaced by a recursive
//             in-channel V-cycle over a channel ladder that halves widths
//             down to the coarsest fully coupled stage
//
// Weights of one (level, kappa) stage are reused by every smoothing
// application at that stage; only batch-norm parameters are per-application.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mgiad/ops.hpp"
#include "mgiad/rng.hpp"

namespace mgiad {

enum class Variant { ResNet, MgNet, MGiaD };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::ResNet: return "resnet";
    case Variant::MgNet: return "mgnet";
    default: return "mgiad";
  }
}

inline Variant variant_from(const std::string& s) {
  if (s == "resnet") return Variant::ResNet;
  if (s == "mgnet") return Variant::MgNet;
  if (s == "mgiad") return Variant::MGiaD;
  throw ConfigError("unknown variant '" + s + "' (expected resnet, mgnet or mgiad)");
}

struct SharingPolicy {
  bool share_a = true;
  bool share_b = true;
};

struct ModelConfig {
  Variant variant = Variant::MGiaD;
  int levels = 4;
  std::vector<int> channels = {64, 128, 256, 256};  // base plan, scaled by lambda
  int lambda = 1;
  int nu = 2;           // blocks (resnet) / smoothing iterations (mgnet) per level
  int eta_pre = 1;      // mgiad in-channel pre-smoothing steps
  int eta_post = 1;     // mgiad in-channel post-smoothing steps
  int group_size = 4;   // g_s; 0 = fully coupled (mgnet only)
  int coarse_channels = 64;  // c_K, never scaled by lambda
  SharingPolicy sharing;
  bool fas = true;
  int num_classes = 10;
  int input_channels = 3;
  int input_size = 32;

  // test/oracle build option, not part of the config file schema
  bool linear_mode = false;  // identity activations, batch norm off

  std::vector<int> plan() const {
    std::vector<int> p = channels;
    for (auto& c : p) c *= lambda;
    return p;
  }

  void validate() const;
};

// Channel ladder of one resolution level: halve while the next width would
// still be at least c_K. The last entry is the fully coupled stage (it can
// exceed c_K when the scaled plan is not a power-of-two multiple of it).
inline std::vector<int> channel_ladder(int c1, int ck) {
  std::vector<int> ladder{c1};
  while (ladder.back() % 2 == 0 && ladder.back() / 2 >= ck) ladder.push_back(ladder.back() / 2);
  return ladder;
}

inline void ModelConfig::validate() const {
  if (levels < 1) throw ConfigError("levels must be >= 1");
  if (static_cast<int>(channels.size()) != levels)
    throw ConfigError("channel plan has " + std::to_string(channels.size()) + " entries for " +
                      std::to_string(levels) + " levels");
  for (int c : channels)
    if (c < 1) throw ConfigError("channel plan entries must be positive");
  if (lambda < 1) throw ConfigError("lambda must be an integer >= 1");
  if (nu < 1) throw ConfigError("nu must be >= 1");
  if (eta_pre < 1) throw ConfigError("eta_pre must be >= 1");
  if (eta_post < 0) throw ConfigError("eta_post must be >= 0");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (input_channels < 1 || input_size < 4) throw ConfigError("invalid input spec");
  const auto p = plan();
  if (variant != Variant::ResNet) {
    for (int l = 0; l + 1 < levels; ++l)
      if (p[static_cast<std::size_t>(l + 1)] % p[static_cast<std::size_t>(l)] != 0)
        throw ConfigError("level transfer needs channels[" + std::to_string(l + 1) + "]=" +
                          std::to_string(p[static_cast<std::size_t>(l + 1)]) +
                          " divisible by channels[" + std::to_string(l) + "]=" +
                          std::to_string(p[static_cast<std::size_t>(l)]));
  }
  if (variant == Variant::MGiaD) {
    if (group_size < 1) throw ConfigError("mgiad requires group_size >= 1");
    if (coarse_channels < 1) throw ConfigError("mgiad requires coarse_channels >= 1");
    for (int l = 0; l < levels; ++l) {
      auto ladder = channel_ladder(p[static_cast<std::size_t>(l)], coarse_channels);
      for (std::size_t k = 0; k + 1 < ladder.size(); ++k)
        if (ladder[k] % group_size != 0)
          throw ConfigError("level " + std::to_string(l + 1) + " ladder width " +
                            std::to_string(ladder[k]) + " is not divisible by group size " +
                            std::to_string(group_size));
    }
  }
  if (variant == Variant::MgNet && group_size > 0) {
    for (int c : p)
      if (c % group_size != 0)
        throw ConfigError("grouped mgnet: width " + std::to_string(c) +
                          " not divisible by group size " + std::to_string(group_size));
  }
}

// Named baseline shapes used across the experiments and the CLI.
inline ModelConfig preset_config(const std::string& name) {
  ModelConfig c;
  if (name == "resnet20") {
    c.variant = Variant::ResNet;
    c.levels = 3;
    c.channels = {16, 32, 64};
    c.nu = 3;
    c.group_size = 0;
  } else if (name == "resnet18") {
    c.variant = Variant::ResNet;
    c.levels = 4;
    c.channels = {64, 128, 256, 512};
    c.nu = 2;
    c.group_size = 0;
  } else if (name == "mgnet" || name == "mgnet-ab") {
    c.variant = Variant::MgNet;
    c.levels = 4;
    c.channels = {64, 128, 256, 256};
    c.nu = 2;
    c.group_size = 0;
  } else if (name == "mgnet-a") {
    c = preset_config("mgnet");
    c.sharing.share_b = false;
  } else if (name == "mgnet3" || name == "mgnet3-ab") {
    c.variant = Variant::MgNet;
    c.levels = 3;
    c.channels = {16, 32, 64};
    c.nu = 3;
    c.group_size = 0;
  } else if (name == "mgnet3-a") {
    c = preset_config("mgnet3");
    c.sharing.share_b = false;
  } else if (name == "mgiad") {
    c.variant = Variant::MGiaD;  // defaults already describe the 4-level shape
  } else if (name == "mgiad3") {
    c.variant = Variant::MGiaD;
    c.levels = 3;
    c.channels = {16, 32, 64};
    c.coarse_channels = 16;
  } else {
    throw ConfigError("unknown preset '" + name +
                      "' (expected resnet20, resnet18, mgnet, mgnet-a, mgnet3, mgnet3-a, mgiad or "
                      "mgiad3)");
  }
  return c;
}

// ---------------------------------------------------------------------------

template <typename T>
struct Param {
  NodePtr<T> node;
  bool is_bn = false;
  std::string role;  // stem, A, B, Ahat, ..., BN, head
  int level = -1;    // 1-based; -1 = global
  int kappa = -1;
};

template <typename T>
class ParamStore {
 public:
  NodePtr<T> add(const std::string& name, Tensor<T> init, bool is_bn, const std::string& role,
                 int level = -1, int kappa = -1) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name " + name);
    auto n = std::make_shared<Node<T>>(std::move(init), true);
    n->name = name;
    index_[name] = items_.size();
    items_.push_back(Param<T>{n, is_bn, role, level, kappa});
    return n;
  }

  const std::vector<Param<T>>& items() const { return items_; }
  std::vector<Param<T>>& items() { return items_; }

  const Param<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &items_[it->second];
  }

  std::int64_t total_count() const {
    std::int64_t n = 0;
    for (const auto& p : items_) n += p.node->value.numel();
    return n;
  }

  void zero_grads() {
    for (auto& p : items_) p.node->grad.fill(T(0));
  }

 private:
  std::vector<Param<T>> items_;
  std::map<std::string, std::size_t> index_;
};

template <typename T>
struct ConvLayer {
  ConvGeom geom;
  NodePtr<T> w;

  NodePtr<T> operator()(Tape<T>& tape, const NodePtr<T>& x) const {
    return ops::conv2d(tape, x, w, geom);
  }
};

template <typename T>
struct BNLayer {
  NodePtr<T> gamma, beta;
  ops::BatchNormState<T> state;
};

// One application of u <- u + B(f - A(u)); conv weights may be shared with
// other applications, the normalizations are private.
template <typename T>
struct SmoothApp {
  std::shared_ptr<ConvLayer<T>> A, B;
  BNLayer<T> bnA, bnB;
};

template <typename T>
struct ChannelStage {
  std::shared_ptr<ConvLayer<T>> A, B;  // operators referenced by transfers
  std::vector<SmoothApp<T>> pre, post;
  struct Down {
    ConvLayer<T> R, Pi, P;  // pairwise-grouped 1x1: c -> c/2, c -> c/2, c/2 -> c
    BNLayer<T> bnR, bnPi, bnP;
  };
  std::optional<Down> down;
};

template <typename T>
struct ResLevel {
  std::vector<ChannelStage<T>> stages;
  struct Down {
    ConvLayer<T> R;  // depthwise 3x3 stride-2 pooling with channel multiplier
    std::optional<ConvLayer<T>> Pi;
    BNLayer<T> bnR, bnPi;
  };
  std::optional<Down> down;
};

template <typename T>
struct ResBlock {
  ConvLayer<T> conv1, conv2;
  BNLayer<T> bn1, bn2;
  std::optional<ConvLayer<T>> proj;
  std::optional<BNLayer<T>> bn_proj;
};

template <typename T>
class Network {
 public:
  ModelConfig cfg;
  ConvLayer<T> stem;
  BNLayer<T> stem_bn;
  std::vector<ResLevel<T>> levels;                 // mgnet / mgiad
  std::vector<std::vector<ResBlock<T>>> blocks;    // resnet
  NodePtr<T> head_w, head_b;
  ParamStore<T> params;

  NodePtr<T> forward(Tape<T>& tape, const Tensor<T>& input, bool train);

  // exposed for the multigrid correspondence checks
  NodePtr<T> act_bn(Tape<T>& tape, BNLayer<T>& bn, NodePtr<T> x, bool train) {
    if (cfg.linear_mode) return x;
    return ops::relu(tape, ops::batch_norm(tape, x, bn.gamma, bn.beta, bn.state, train));
  }
  NodePtr<T> smooth_app(Tape<T>& tape, SmoothApp<T>& app, NodePtr<T> u, NodePtr<T> f, bool train);
  NodePtr<T> sic(Tape<T>& tape, int level, std::size_t kappa, NodePtr<T> f, NodePtr<T> u,
                 bool train);
  // one resolution transfer: (f_l, u_l) -> (f_{l+1}, u_{l+1})
  std::pair<NodePtr<T>, NodePtr<T>> resolution_step(Tape<T>& tape, int level, NodePtr<T> f,
                                                    NodePtr<T> u, bool train, bool fas);
};

template <typename T>
NodePtr<T> Network<T>::smooth_app(Tape<T>& tape, SmoothApp<T>& app, NodePtr<T> u, NodePtr<T> f,
                                  bool train) {
  auto au = act_bn(tape, app.bnA, (*app.A)(tape, u), train);
  auto residual = ops::sub(tape, f, au);
  auto correction = act_bn(tape, app.bnB, (*app.B)(tape, residual), train);
  return ops::add(tape, u, correction);
}

template <typename T>
NodePtr<T> Network<T>::sic(Tape<T>& tape, int level, std::size_t kappa, NodePtr<T> f, NodePtr<T> u,
                           bool train) {
  auto& stage = levels[static_cast<std::size_t>(level)].stages[kappa];
  for (auto& app : stage.pre) u = smooth_app(tape, app, u, f, train);
  if (stage.down) {
    auto& d = *stage.down;
    auto u_coarse = act_bn(tape, d.bnPi, d.Pi(tape, u), train);
    auto residual = ops::sub(tape, f, (*stage.A)(tape, u));
    auto f_coarse = act_bn(tape, d.bnR, d.R(tape, residual), train);
    auto& next = levels[static_cast<std::size_t>(level)].stages[kappa + 1];
    f_coarse = ops::add(tape, f_coarse, (*next.A)(tape, u_coarse));
    auto u_hat = sic(tape, level, kappa + 1, f_coarse, u_coarse, train);
    u = ops::add(tape, u, act_bn(tape, d.bnP, d.P(tape, u_hat), train));
  }
  for (auto& app : stage.post) u = smooth_app(tape, app, u, f, train);
  return u;
}

template <typename T>
std::pair<NodePtr<T>, NodePtr<T>> Network<T>::resolution_step(Tape<T>& tape, int level,
                                                              NodePtr<T> f, NodePtr<T> u,
                                                              bool train, bool fas) {
  auto& d = *levels[static_cast<std::size_t>(level)].down;
  auto residual = ops::sub(tape, f, (*levels[static_cast<std::size_t>(level)].stages[0].A)(tape, u));
  auto f_next = act_bn(tape, d.bnR, d.R(tape, residual), train);
  NodePtr<T> u_next;
  if (fas) {
    if (!d.Pi) throw UsageError("FAS resolution step on a model built without Pi operators");
    u_next = act_bn(tape, d.bnPi, (*d.Pi)(tape, u), train);
    f_next = ops::add(tape, f_next,
                      (*levels[static_cast<std::size_t>(level + 1)].stages[0].A)(tape, u_next));
  } else {
    u_next = tape.node(Tensor<T>::zeros(f_next->value.shape), false);
  }
  return {f_next, u_next};
}

template <typename T>
NodePtr<T> Network<T>::forward(Tape<T>& tape, const Tensor<T>& input, bool train) {
  if (input.rank() != 4 || input.dim(3) != cfg.input_channels)
    throw ConfigError("forward: input " + shape_str(input.shape) + " does not match input spec (" +
                      std::to_string(cfg.input_channels) + " channels)");
  auto x = tape.node(input, false);

  if (cfg.variant == Variant::ResNet) {
    auto y = act_bn(tape, stem_bn, stem(tape, x), train);
    for (auto& level : blocks)
      for (auto& blk : level) {
        auto identity = y;
        auto z = act_bn(tape, blk.bn1, blk.conv1(tape, y), train);
        z = blk.conv2(tape, z);
        if (!cfg.linear_mode)
          z = ops::batch_norm(tape, z, blk.bn2.gamma, blk.bn2.beta, blk.bn2.state, train);
        if (blk.proj) {
          identity = (*blk.proj)(tape, y);
          if (!cfg.linear_mode)
            identity = ops::batch_norm(tape, identity, blk.bn_proj->gamma, blk.bn_proj->beta,
                                       blk.bn_proj->state, train);
        }
        z = ops::add(tape, z, identity);
        y = cfg.linear_mode ? z : ops::relu(tape, z);
      }
    return ops::linear(tape, ops::global_avg_pool(tape, y), head_w, head_b);
  }

  auto f = act_bn(tape, stem_bn, stem(tape, x), train);
  auto u = tape.node(Tensor<T>::zeros(f->value.shape), false);
  for (int l = 0; l < cfg.levels; ++l) {
    u = sic(tape, l, 0, f, u, train);
    if (l + 1 == cfg.levels) break;
    std::tie(f, u) = resolution_step(tape, l, f, u, train, cfg.fas);
  }
  return ops::linear(tape, ops::global_avg_pool(tape, u), head_w, head_b);
}

// ---------------------------------------------------------------------------
// Builder

namespace detail {

template <typename T>
Tensor<T> conv_init(const ConvGeom& g, Rng& rng) {
  Tensor<T> w(g.weight_shape());
  const double fan_out = static_cast<double>(g.kh) * g.kw * g.out_per_group();
  const double stddev = std::sqrt(2.0 / fan_out);
  for (auto& v : w.data) v = static_cast<T>(rng.normal(0.0, stddev));
  return w;
}

template <typename T>
ConvLayer<T> make_conv(Network<T>& net, const std::string& name, const std::string& role,
                       int level, int kappa, const ConvGeom& g, Rng& rng) {
  g.validate();
  return ConvLayer<T>{g, net.params.add(name + ".w", conv_init<T>(g, rng), false, role, level, kappa)};
}

template <typename T>
BNLayer<T> make_bn(Network<T>& net, const std::string& name, int channels, int level, int kappa) {
  BNLayer<T> bn;
  bn.gamma = net.params.add(name + ".gamma", Tensor<T>::full({channels}, T(1)), true, "BN", level, kappa);
  bn.beta = net.params.add(name + ".beta", Tensor<T>::zeros({channels}), true, "BN", level, kappa);
  bn.state = ops::BatchNormState<T>(channels);
  return bn;
}

inline ConvGeom smoothing_geom(int channels, int group_size) {
  const int groups = (group_size > 0 && group_size < channels) ? channels / group_size : 1;
  return ConvGeom{.kh = 3, .kw = 3, .in_ch = channels, .out_ch = channels, .groups = groups,
                  .stride = 1, .pad_h = 1, .pad_w = 1};
}

}  // namespace detail

template <typename T>
Network<T> build_model(const ModelConfig& cfg, std::uint64_t seed = 1) {
  cfg.validate();
  Rng rng = Rng::stream(seed, "init");
  Network<T> net;
  net.cfg = cfg;
  const auto plan = cfg.plan();

  ConvGeom stem_geom{.kh = 3, .kw = 3, .in_ch = cfg.input_channels, .out_ch = plan[0],
                     .groups = 1, .stride = 1, .pad_h = 1, .pad_w = 1};
  net.stem = detail::make_conv(net, "stem", "stem", -1, -1, stem_geom, rng);
  net.stem_bn = detail::make_bn(net, "stem.bn", plan[0], -1, -1);

  if (cfg.variant == Variant::ResNet) {
    int prev = plan[0];
    for (int l = 0; l < cfg.levels; ++l) {
      const int c = plan[static_cast<std::size_t>(l)];
      std::vector<ResBlock<T>> level;
      for (int b = 0; b < cfg.nu; ++b) {
        const int stride = (b == 0 && l > 0) ? 2 : 1;
        const int cin = b == 0 ? prev : c;
        const std::string base = "l" + std::to_string(l + 1) + ".b" + std::to_string(b + 1);
        ResBlock<T> blk;
        blk.conv1 = detail::make_conv(
            net, base + ".conv1", "A", l + 1, -1,
            ConvGeom{.kh = 3, .kw = 3, .in_ch = cin, .out_ch = c, .groups = 1, .stride = stride,
                     .pad_h = 1, .pad_w = 1},
            rng);
        blk.bn1 = detail::make_bn(net, base + ".bn1", c, l + 1, -1);
        blk.conv2 = detail::make_conv(
            net, base + ".conv2", "B", l + 1, -1,
            ConvGeom{.kh = 3, .kw = 3, .in_ch = c, .out_ch = c, .groups = 1, .stride = 1,
                     .pad_h = 1, .pad_w = 1},
            rng);
        blk.bn2 = detail::make_bn(net, base + ".bn2", c, l + 1, -1);
        if (stride != 1 || cin != c) {
          blk.proj = detail::make_conv(
              net, base + ".proj", "R", l + 1, -1,
              ConvGeom{.kh = 1, .kw = 1, .in_ch = cin, .out_ch = c, .groups = 1, .stride = stride},
              rng);
          blk.bn_proj = detail::make_bn(net, base + ".proj.bn", c, l + 1, -1);
        }
        level.push_back(std::move(blk));
      }
      net.blocks.push_back(std::move(level));
      prev = c;
    }
  } else {
    for (int l = 0; l < cfg.levels; ++l) {
      const int c1 = plan[static_cast<std::size_t>(l)];
      const bool in_channel_mg = cfg.variant == Variant::MGiaD;
      const auto ladder =
          in_channel_mg ? channel_ladder(c1, cfg.coarse_channels) : std::vector<int>{c1};
      ResLevel<T> level;
      for (std::size_t k = 0; k < ladder.size(); ++k) {
        const int c = ladder[k];
        const bool coarsest = k + 1 == ladder.size();
        const std::string base = "l" + std::to_string(l + 1) + ".k" + std::to_string(k + 1);
        // fully coupled on the coarsest rung, grouped above it
        const int gs = in_channel_mg ? (coarsest ? 0 : cfg.group_size) : cfg.group_size;
        const ConvGeom geom = detail::smoothing_geom(c, gs);
        ChannelStage<T> stage;
        const int pre_apps = in_channel_mg ? cfg.eta_pre : cfg.nu;
        const int post_apps = in_channel_mg ? cfg.eta_post : 0;
        auto shared_a =
            cfg.sharing.share_a
                ? std::make_shared<ConvLayer<T>>(
                      detail::make_conv(net, base + ".A", in_channel_mg ? "Ahat" : "A", l + 1,
                                        static_cast<int>(k) + 1, geom, rng))
                : nullptr;
        auto shared_b =
            cfg.sharing.share_b
                ? std::make_shared<ConvLayer<T>>(
                      detail::make_conv(net, base + ".B", in_channel_mg ? "Bhat" : "B", l + 1,
                                        static_cast<int>(k) + 1, geom, rng))
                : nullptr;
        auto make_apps = [&](int count, const char* tag, std::vector<SmoothApp<T>>& out) {
          for (int i = 0; i < count; ++i) {
            const std::string app = base + "." + tag + std::to_string(i + 1);
            SmoothApp<T> s;
            s.A = cfg.sharing.share_a
                      ? shared_a
                      : std::make_shared<ConvLayer<T>>(
                            detail::make_conv(net, app + ".A", in_channel_mg ? "Ahat" : "A", l + 1,
                                              static_cast<int>(k) + 1, geom, rng));
            s.B = cfg.sharing.share_b
                      ? shared_b
                      : std::make_shared<ConvLayer<T>>(
                            detail::make_conv(net, app + ".B", in_channel_mg ? "Bhat" : "B", l + 1,
                                              static_cast<int>(k) + 1, geom, rng));
            s.bnA = detail::make_bn(net, app + ".bnA", c, l + 1, static_cast<int>(k) + 1);
            s.bnB = detail::make_bn(net, app + ".bnB", c, l + 1, static_cast<int>(k) + 1);
            out.push_back(std::move(s));
          }
        };
        make_apps(pre_apps, "pre", stage.pre);
        make_apps(post_apps, "post", stage.post);
        stage.A = cfg.sharing.share_a ? shared_a : stage.pre.back().A;
        stage.B = cfg.sharing.share_b ? shared_b : stage.pre.back().B;
        if (!coarsest) {
          // pairwise channel pooling: each pair of channels maps to one
          // coarse channel (and back for the interpolation)
          const int ch = c, cc = c / 2;
          typename ChannelStage<T>::Down down{
              detail::make_conv(net, base + ".Rhat", "Rhat", l + 1, static_cast<int>(k) + 1,
                                ConvGeom{.kh = 1, .kw = 1, .in_ch = ch, .out_ch = cc, .groups = cc},
                                rng),
              detail::make_conv(net, base + ".Pihat", "Pihat", l + 1, static_cast<int>(k) + 1,
                                ConvGeom{.kh = 1, .kw = 1, .in_ch = ch, .out_ch = cc, .groups = cc},
                                rng),
              detail::make_conv(net, base + ".Phat", "Phat", l + 1, static_cast<int>(k) + 1,
                                ConvGeom{.kh = 1, .kw = 1, .in_ch = cc, .out_ch = ch, .groups = cc},
                                rng),
              detail::make_bn(net, base + ".Rhat.bn", cc, l + 1, static_cast<int>(k) + 1),
              detail::make_bn(net, base + ".Pihat.bn", cc, l + 1, static_cast<int>(k) + 1),
              detail::make_bn(net, base + ".Phat.bn", ch, l + 1, static_cast<int>(k) + 1)};
          stage.down.emplace(std::move(down));
        }
        level.stages.push_back(std::move(stage));
      }
      if (l + 1 < cfg.levels) {
        const int cn = plan[static_cast<std::size_t>(l + 1)];
        const std::string base = "l" + std::to_string(l + 1);
        // depthwise 3x3 stride-2 pooling; the channel multiplier cn/c1
        // grows the width into the next level's plan
        const ConvGeom pool{.kh = 3, .kw = 3, .in_ch = c1, .out_ch = cn, .groups = c1,
                            .stride = 2, .pad_h = 1, .pad_w = 1};
        typename ResLevel<T>::Down down;
        down.R = detail::make_conv(net, base + ".R", "R", l + 1, -1, pool, rng);
        down.bnR = detail::make_bn(net, base + ".R.bn", cn, l + 1, -1);
        if (cfg.fas) {
          down.Pi = detail::make_conv(net, base + ".Pi", "Pi", l + 1, -1, pool, rng);
          down.bnPi = detail::make_bn(net, base + ".Pi.bn", cn, l + 1, -1);
        }
        level.down.emplace(std::move(down));
      }
      net.levels.push_back(std::move(level));
    }
  }

  const int c_last = plan.back();
  Tensor<T> hw({cfg.num_classes, c_last});
  for (auto& v : hw.data) v = static_cast<T>(rng.normal(0.0, 0.01));
  net.head_w = net.params.add("head.w", std::move(hw), false, "head");
  net.head_b = net.params.add("head.b", Tensor<T>::zeros({cfg.num_classes}), false, "head");
  return net;
}

}  // namespace mgiad
