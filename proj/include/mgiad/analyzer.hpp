#pragma once

// Closed-form weight counting and scaling probes. Deliberately independent
// of the network builder: the registry-equivalence suite checks that these
// formulas and the materialized parameter stores agree exactly.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mgiad/model.hpp"

namespace mgiad {

struct OpCount {
  std::string name;
  std::string role;  // stem, A, B, Ahat, Bhat, R, Pi, Rhat, Phat, Pihat, BN, head
  std::int64_t count = 0;
  int level = -1;  // 1-based resolution level, -1 = global
  int kappa = -1;  // 1-based channel level, -1 = none
};

struct WeightBreakdown {
  std::vector<OpCount> ops;  // unique (shared weights appear once)

  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto& o : ops) t += o.count;
    return t;
  }
  std::map<std::string, std::int64_t> by_role() const {
    std::map<std::string, std::int64_t> m;
    for (const auto& o : ops) m[o.role] += o.count;
    return m;
  }
  std::map<int, std::int64_t> by_level() const {
    std::map<int, std::int64_t> m;
    for (const auto& o : ops) m[o.level] += o.count;
    return m;
  }
};

WeightBreakdown count_weights(const ModelConfig& cfg);

// Breakdown of an already-built parameter registry (names, roles, sizes).
template <typename T>
WeightBreakdown registry_breakdown(const Network<T>& net) {
  WeightBreakdown b;
  for (const auto& p : net.params.items())
    b.ops.push_back(OpCount{p.node->name, p.role, p.node->value.numel(), p.level, p.kappa});
  return b;
}

enum class ProbeFamily { DenseSmoothing, SicHierarchy, Depthwise };

// Least-squares slope of log(conv weight count) against log(width) for the
// probed block family. BN and head parameters are excluded. Needs at least
// four sweep points.
double scaling_probe(ProbeFamily family, const std::vector<int>& widths, int group_size = 4,
                     int coarse_channels = 8);

// Conv-only parameter count of one probed block at the given width.
std::int64_t probe_block_count(ProbeFamily family, int width, int group_size, int coarse_channels);

// CSV table with deterministic columns: model,c_K,g_s,lambda,weights.
// With detail=true a second section lists one row per operator.
std::string emit_table(const std::vector<std::pair<ModelConfig, WeightBreakdown>>& rows,
                       bool detail = false);

}  // namespace mgiad
