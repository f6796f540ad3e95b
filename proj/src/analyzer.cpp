#include "mgiad/analyzer.hpp"

#include <cmath>

#include "mgiad/csv.hpp"

namespace mgiad {

namespace {

std::int64_t conv_count(int kh, int kw, int cin, int cout, int groups) {
  return static_cast<std::int64_t>(kh) * kw * (cin / groups) * cout;
}

// 3x3 smoothing operator at width c: grouped with group size gs, or fully
// coupled when gs is 0 / at least c.
std::int64_t smoothing_count(int c, int gs) {
  const int groups = (gs > 0 && gs < c) ? c / gs : 1;
  return conv_count(3, 3, c, c, groups);
}

void push(WeightBreakdown& b, std::string name, std::string role, std::int64_t count, int level,
          int kappa) {
  b.ops.push_back(OpCount{std::move(name), std::move(role), count, level, kappa});
}

void push_bn(WeightBreakdown& b, const std::string& name, int c, int level, int kappa) {
  push(b, name + ".gamma", "BN", c, level, kappa);
  push(b, name + ".beta", "BN", c, level, kappa);
}

}  // namespace

WeightBreakdown count_weights(const ModelConfig& cfg) {
  cfg.validate();
  WeightBreakdown b;
  const auto plan = cfg.plan();

  push(b, "stem.w", "stem", conv_count(3, 3, cfg.input_channels, plan[0], 1), -1, -1);
  push_bn(b, "stem.bn", plan[0], -1, -1);

  if (cfg.variant == Variant::ResNet) {
    int prev = plan[0];
    for (int l = 0; l < cfg.levels; ++l) {
      const int c = plan[static_cast<std::size_t>(l)];
      for (int blk = 0; blk < cfg.nu; ++blk) {
        const bool first = blk == 0;
        const int cin = first ? prev : c;
        const bool strided = first && l > 0;
        const std::string base = "l" + std::to_string(l + 1) + ".b" + std::to_string(blk + 1);
        push(b, base + ".conv1.w", "A", conv_count(3, 3, cin, c, 1), l + 1, -1);
        push_bn(b, base + ".bn1", c, l + 1, -1);
        push(b, base + ".conv2.w", "B", conv_count(3, 3, c, c, 1), l + 1, -1);
        push_bn(b, base + ".bn2", c, l + 1, -1);
        if (strided || cin != c) {
          push(b, base + ".proj.w", "R", conv_count(1, 1, cin, c, 1), l + 1, -1);
          push_bn(b, base + ".proj.bn", c, l + 1, -1);
        }
      }
      prev = c;
    }
  } else {
    const bool mgiad = cfg.variant == Variant::MGiaD;
    for (int l = 0; l < cfg.levels; ++l) {
      const int c1 = plan[static_cast<std::size_t>(l)];
      const auto ladder =
          mgiad ? channel_ladder(c1, cfg.coarse_channels) : std::vector<int>{c1};
      const int apps = mgiad ? cfg.eta_pre + cfg.eta_post : cfg.nu;
      for (std::size_t k = 0; k < ladder.size(); ++k) {
        const int c = ladder[k];
        const bool coarsest = k + 1 == ladder.size();
        const int gs = mgiad ? (coarsest ? 0 : cfg.group_size) : cfg.group_size;
        const std::string base = "l" + std::to_string(l + 1) + ".k" + std::to_string(k + 1);
        const std::string ra = mgiad ? "Ahat" : "A", rb = mgiad ? "Bhat" : "B";
        const std::int64_t sc = smoothing_count(c, gs);
        const int a_copies = cfg.sharing.share_a ? 1 : apps;
        const int b_copies = cfg.sharing.share_b ? 1 : apps;
        for (int i = 0; i < a_copies; ++i)
          push(b, base + ".A" + (a_copies > 1 ? std::to_string(i + 1) : "") + ".w", ra, sc, l + 1,
               static_cast<int>(k) + 1);
        for (int i = 0; i < b_copies; ++i)
          push(b, base + ".B" + (b_copies > 1 ? std::to_string(i + 1) : "") + ".w", rb, sc, l + 1,
               static_cast<int>(k) + 1);
        for (int i = 0; i < apps; ++i) {
          push_bn(b, base + ".app" + std::to_string(i + 1) + ".bnA", c, l + 1,
                  static_cast<int>(k) + 1);
          push_bn(b, base + ".app" + std::to_string(i + 1) + ".bnB", c, l + 1,
                  static_cast<int>(k) + 1);
        }
        if (!coarsest) {
          // pairwise 1x1 channel transfers: c -> c/2 twice, c/2 -> c once,
          // each contributing exactly c weights
          push(b, base + ".Rhat.w", "Rhat", conv_count(1, 1, c, c / 2, c / 2), l + 1,
               static_cast<int>(k) + 1);
          push(b, base + ".Pihat.w", "Pihat", conv_count(1, 1, c, c / 2, c / 2), l + 1,
               static_cast<int>(k) + 1);
          push(b, base + ".Phat.w", "Phat", conv_count(1, 1, c / 2, c, c / 2), l + 1,
               static_cast<int>(k) + 1);
          push_bn(b, base + ".Rhat.bn", c / 2, l + 1, static_cast<int>(k) + 1);
          push_bn(b, base + ".Pihat.bn", c / 2, l + 1, static_cast<int>(k) + 1);
          push_bn(b, base + ".Phat.bn", c, l + 1, static_cast<int>(k) + 1);
        }
      }
      if (l + 1 < cfg.levels) {
        const int cn = plan[static_cast<std::size_t>(l + 1)];
        const std::string base = "l" + std::to_string(l + 1);
        // depthwise 3x3 pooling with channel multiplier: 9*cn weights
        push(b, base + ".R.w", "R", conv_count(3, 3, c1, cn, c1), l + 1, -1);
        push_bn(b, base + ".R.bn", cn, l + 1, -1);
        if (cfg.fas) {
          push(b, base + ".Pi.w", "Pi", conv_count(3, 3, c1, cn, c1), l + 1, -1);
          push_bn(b, base + ".Pi.bn", cn, l + 1, -1);
        }
      }
    }
  }

  push(b, "head.w", "head", static_cast<std::int64_t>(plan.back()) * cfg.num_classes, -1, -1);
  push(b, "head.b", "head", cfg.num_classes, -1, -1);
  return b;
}

std::int64_t probe_block_count(ProbeFamily family, int width, int group_size,
                               int coarse_channels) {
  switch (family) {
    case ProbeFamily::DenseSmoothing:
      return 2 * smoothing_count(width, 0);
    case ProbeFamily::Depthwise:
      return conv_count(3, 3, width, width, width);
    case ProbeFamily::SicHierarchy: {
      std::int64_t total = 0;
      const auto ladder = channel_ladder(width, coarse_channels);
      for (std::size_t k = 0; k < ladder.size(); ++k) {
        const bool coarsest = k + 1 == ladder.size();
        total += 2 * smoothing_count(ladder[k], coarsest ? 0 : group_size);
        if (!coarsest) total += 3 * static_cast<std::int64_t>(ladder[k]);
      }
      return total;
    }
  }
  return 0;
}

double scaling_probe(ProbeFamily family, const std::vector<int>& widths, int group_size,
                     int coarse_channels) {
  if (widths.size() < 4)
    throw UsageError("scaling_probe needs at least 4 sweep points, got " +
                     std::to_string(widths.size()));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(widths.size());
  for (int w : widths) {
    const double x = std::log(static_cast<double>(w));
    const double y =
        std::log(static_cast<double>(probe_block_count(family, w, group_size, coarse_channels)));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string emit_table(const std::vector<std::pair<ModelConfig, WeightBreakdown>>& rows,
                       bool detail) {
  std::vector<std::vector<std::string>> out;
  out.push_back({"model", "c_K", "g_s", "lambda", "weights"});
  for (const auto& [cfg, bd] : rows) {
    const bool mgiad = cfg.variant == Variant::MGiaD;
    out.push_back({variant_name(cfg.variant), mgiad ? std::to_string(cfg.coarse_channels) : "-",
                   cfg.group_size > 0 ? std::to_string(cfg.group_size) : "-",
                   std::to_string(cfg.lambda), std::to_string(bd.total())});
  }
  if (detail) {
    out.push_back({"model", "operator", "role", "count"});
    for (const auto& [cfg, bd] : rows)
      for (const auto& op : bd.ops)
        out.push_back({variant_name(cfg.variant), op.name, op.role, std::to_string(op.count)});
  }
  return csv::write(out);
}

}  // namespace mgiad
