#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mgiad/analyzer.hpp"
#include "mgiad/csv.hpp"
#include "mgiad/model.hpp"

using namespace mgiad;

namespace {

ModelConfig mgiad_cfg(int ck, int gs, int lambda = 1) {
  ModelConfig c = preset_config("mgiad");
  c.coarse_channels = ck;
  c.group_size = gs;
  c.lambda = lambda;
  return c;
}

void check_target(const ModelConfig& cfg, double target, double tol = 0.05) {
  const double got = static_cast<double>(count_weights(cfg).total());
  INFO("counted ", got, " vs published ", target);
  CHECK(std::abs(got - target) / target < tol);
}

}  // namespace

TEST_CASE("published weight counts: resnet and mgnet baselines") {
  check_target(preset_config("resnet20"), 270e3);
  check_target(preset_config("resnet18"), 11174e3);
  check_target(preset_config("mgnet"), 2751e3);
  check_target(preset_config("mgnet3"), 101e3);
  check_target(preset_config("mgnet-a"), 4115e3);
  check_target(preset_config("mgnet3-a"), 198e3);
}

TEST_CASE("published weight counts: mgiad group size / coarse width study") {
  check_target(mgiad_cfg(64, 4), 393e3);
  check_target(mgiad_cfg(4, 4), 138e3);
  check_target(mgiad_cfg(8, 4), 139e3);
  check_target(mgiad_cfg(16, 4), 148e3);
  check_target(mgiad_cfg(32, 4), 193e3);
  check_target(mgiad_cfg(8, 8), 236e3);
  check_target(mgiad_cfg(64, 8), 458e3);
  check_target(mgiad_cfg(16, 16), 424e3);
  check_target(mgiad_cfg(64, 32), 845e3);
  check_target(mgiad_cfg(64, 64), 1361e3);
  check_target(mgiad_cfg(64, 8, 3), 1269e3);
  check_target(mgiad_cfg(64, 4, 3), 1020e3);
  check_target(mgiad_cfg(64, 4, 2), 533e3);
}

TEST_CASE("published weight counts: grouped mgnet sparsification study") {
  for (auto [gs, target] : {std::pair{8, 121e3}, {16, 223e3}, {32, 425e3}, {64, 831e3}}) {
    ModelConfig c = preset_config("mgnet");
    c.group_size = gs;
    check_target(c, target);
  }
}

TEST_CASE("published weight counts: 3-level mgiad (greyscale input)") {
  ModelConfig c = preset_config("mgiad3");
  c.input_channels = 1;
  c.group_size = 4;
  check_target(c, 28e3);
}

TEST_CASE("grouped conv weight formula is exact") {
  ConvGeom g{.kh = 3, .kw = 3, .in_ch = 64, .out_ch = 64, .groups = 16};  // g_s = 4
  CHECK(g.weight_count() == 2304);
}

TEST_CASE("registry equivalence: closed-form count == built registry, exactly") {
  std::vector<ModelConfig> matrix;
  for (const char* p : {"resnet20", "resnet18", "mgnet", "mgnet-a", "mgnet3", "mgnet3-a", "mgiad",
                        "mgiad3"})
    matrix.push_back(preset_config(p));
  for (int ck : {4, 8, 16, 32, 64})
    for (int gs : {4, 8})
      matrix.push_back(mgiad_cfg(ck, gs));
  matrix.push_back(mgiad_cfg(64, 8, 3));
  matrix.push_back(mgiad_cfg(64, 4, 2));
  {
    ModelConfig c = preset_config("mgnet");
    c.group_size = 16;
    matrix.push_back(c);
  }
  {
    ModelConfig c = preset_config("mgnet");
    c.sharing = {false, false};
    matrix.push_back(c);
  }
  {
    ModelConfig c = preset_config("mgnet3");
    c.fas = false;
    matrix.push_back(c);
  }
  {
    ModelConfig c = mgiad_cfg(8, 4);
    c.eta_post = 3;
    matrix.push_back(c);
  }
  {
    ModelConfig c = mgiad_cfg(8, 4);
    c.levels = 2;
    c.channels = {8, 16};
    c.coarse_channels = 8;
    c.num_classes = 3;
    c.input_channels = 1;
    matrix.push_back(c);
  }
  REQUIRE(matrix.size() >= 20);

  for (const auto& cfg : matrix) {
    auto formula = count_weights(cfg);
    auto net = build_model<float>(cfg, 1);
    INFO("variant=", variant_name(cfg.variant), " levels=", cfg.levels,
         " c_K=", cfg.coarse_channels, " g_s=", cfg.group_size, " lambda=", cfg.lambda);
    CHECK(formula.total() == net.params.total_count());
    CHECK(formula.by_role() == registry_breakdown(net).by_role());
    CHECK(formula.by_level() == registry_breakdown(net).by_level());
  }
}

TEST_CASE("sharing ratios on an isolated two-block level") {
  ModelConfig base;
  base.variant = Variant::MgNet;
  base.levels = 1;
  base.channels = {32};
  base.nu = 2;
  base.group_size = 0;

  ModelConfig unshared = base;
  unshared.sharing = {false, false};
  ModelConfig shared = base;
  shared.sharing = {true, true};

  auto ab_count = [](const ModelConfig& c) {
    auto roles = count_weights(c).by_role();
    return roles["A"] + roles["B"];
  };
  // 4 * (s^2 c h) without sharing vs 2 * (s^2 c h) with sharing in A and B
  CHECK(ab_count(unshared) == 4 * 9 * 32 * 32);
  CHECK(ab_count(shared) == 2 * 9 * 32 * 32);
  CHECK(ab_count(unshared) == 2 * ab_count(shared));

  // registry ordering across the baseline family
  auto total = [](const char* p) { return count_weights(preset_config(p)).total(); };
  CHECK(total("mgnet-a") < total("resnet18"));
  CHECK(total("mgnet") < total("mgnet-a"));
  CHECK(total("mgnet3-a") < total("resnet20"));
  CHECK(total("mgnet3") < total("mgnet3-a"));
}

TEST_CASE("scaling exponents: quadratic dense blocks, linear hierarchy") {
  const std::vector<int> widths = {64, 128, 256, 512};
  const double dense = scaling_probe(ProbeFamily::DenseSmoothing, widths);
  CHECK(dense > 1.9);
  CHECK(dense < 2.1);
  for (int ck : {8, 16})
    for (int gs : {4, 8}) {
      const double sic = scaling_probe(ProbeFamily::SicHierarchy, widths, gs, ck);
      INFO("c_K=", ck, " g_s=", gs, " exponent=", sic);
      CHECK(sic > 0.9);
      CHECK(sic < 1.2);
    }
  const double dw = scaling_probe(ProbeFamily::Depthwise, widths);
  CHECK(dw > 0.95);
  CHECK(dw < 1.05);

  CHECK_THROWS_AS(scaling_probe(ProbeFamily::DenseSmoothing, {64, 128, 256}), UsageError);
}

TEST_CASE("table sweep is monotone in c_K and g_s") {
  const std::vector<int> grid = {4, 8, 16, 32, 64};
  for (int gs : grid) {
    std::int64_t prev = 0;
    for (int ck : grid) {
      if (ck < gs) continue;
      auto t = count_weights(mgiad_cfg(ck, gs)).total();
      CHECK(t > prev);
      prev = t;
    }
  }
  for (int ck : grid) {
    std::int64_t prev = 0;
    for (int gs : grid) {
      if (ck < gs) continue;
      auto t = count_weights(mgiad_cfg(ck, gs)).total();
      CHECK(t > prev);
      prev = t;
    }
  }
}

TEST_CASE("emit_table: header-only when empty, round-trips through the parser") {
  CHECK(emit_table({}) == "model,c_K,g_s,lambda,weights\n");

  std::vector<std::pair<ModelConfig, WeightBreakdown>> rows;
  for (auto cfg : {mgiad_cfg(64, 4), mgiad_cfg(16, 8)}) rows.emplace_back(cfg, count_weights(cfg));
  const std::string table = emit_table(rows, true);
  auto parsed = csv::parse(table);
  CHECK(csv::write(parsed) == table);
  CHECK(parsed[0] == std::vector<std::string>{"model", "c_K", "g_s", "lambda", "weights"});
  CHECK(parsed[1][4] == std::to_string(count_weights(mgiad_cfg(64, 4)).total()));
}

TEST_CASE("invalid configurations are rejected with precise messages") {
  ModelConfig c = preset_config("mgiad");
  c.lambda = 0;
  CHECK_THROWS_AS(count_weights(c), ConfigError);

  c = preset_config("mgiad");
  c.group_size = 16;      // ladder reaches width 8, which 16 does not divide
  c.coarse_channels = 4;
  CHECK_THROWS_WITH_AS(count_weights(c), doctest::Contains("not divisible by group size"),
                       ConfigError);

  c = preset_config("mgnet");
  c.channels = {64, 96, 256, 256};  // 256 % 96 != 0
  CHECK_THROWS_WITH_AS(count_weights(c), doctest::Contains("divisible by channels"), ConfigError);
}
