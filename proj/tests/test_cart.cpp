#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "synrisk/error.hpp"
#include "synrisk/release.hpp"

using namespace synrisk;
using testutil::cat;
using testutil::cont;

namespace {

// Binary target perfectly determined by a binary predictor.
Dataset separable(std::shared_ptr<const Schema>* schema_out = nullptr) {
  auto schema = testutil::make_schema(
      {cat("p", 2, false, true), cat("t", 2, true, true)});
  std::vector<std::vector<Cell>> rows;
  for (int i = 0; i < 12; ++i) {
    std::int32_t p = i % 2;
    rows.push_back({Cell{p}, Cell{p}});  // t == p exactly
  }
  if (schema_out) *schema_out = schema;
  return testutil::make_dataset(schema, rows);
}

// Continuous target, piecewise constant over 2 predictor strata plus noise.
Dataset piecewise(std::shared_ptr<const Schema>* schema_out = nullptr,
                  std::vector<double>* stratum_means = nullptr) {
  auto schema = testutil::make_schema(
      {cat("s", 2, false, true), cont("y", -10.0, 10.0, true, true)});
  Rng rng = make_rng(314);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<std::vector<Cell>> rows;
  double sums[2] = {0.0, 0.0};
  int counts[2] = {0, 0};
  for (int i = 0; i < 500; ++i) {
    std::int32_t s = i % 2;
    double mean = s == 0 ? -3.0 : 4.0;
    double y = std::clamp(mean + noise(rng), -10.0, 10.0);
    sums[s] += y;
    ++counts[s];
    rows.push_back({Cell{s}, Cell{y}});
  }
  if (schema_out) *schema_out = schema;
  if (stratum_means)
    *stratum_means = {sums[0] / counts[0], sums[1] / counts[1]};
  return testutil::make_dataset(schema, rows);
}

}  // namespace

TEST_CASE("a separable target yields one split with pure leaves") {
  Dataset data = separable();
  CartConfig cfg;
  cfg.order = {"t"};
  cfg.min_leaf = 2;
  CartModel model = fit_cart(data, cfg);
  REQUIRE(model.trees.size() == 1);
  const CartTree& tree = model.trees[0];
  CHECK(tree.leaf_count == 2);
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.nodes[0].split_var == 0);
  // Each leaf holds donors of a single target level.
  for (const auto& node : tree.nodes) {
    if (!node.is_leaf()) continue;
    std::set<std::int32_t> levels;
    for (std::size_t r : node.donors) levels.insert(data.code(r, 1));
    CHECK(levels.size() == 1);
  }
}

TEST_CASE("min_leaf = n forces a single leaf holding the whole column") {
  Dataset data = separable();
  CartConfig cfg;
  cfg.order = {"t"};
  cfg.min_leaf = data.rows();
  CartModel model = fit_cart(data, cfg);
  const CartTree& tree = model.trees[0];
  CHECK(tree.leaf_count == 1);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].donors.size() == data.rows());
}

TEST_CASE("min_leaf beyond n is a fit error") {
  Dataset data = separable();
  CartConfig cfg;
  cfg.order = {"t"};
  cfg.min_leaf = data.rows() + 1;
  CHECK_THROWS_AS(fit_cart(data, cfg), ConfigError);
}

TEST_CASE("piecewise-constant strata produce leaves near the stratum means") {
  std::shared_ptr<const Schema> schema;
  std::vector<double> means;
  Dataset data = piecewise(&schema, &means);
  CartConfig cfg;
  cfg.order = {"y"};
  cfg.min_leaf = 5;
  CartModel model = fit_cart(data, cfg);
  const CartTree& tree = model.trees[0];
  REQUIRE(tree.leaf_count >= 2);
  // Every leaf is stratum-pure and its donor mean is near that stratum mean.
  for (const auto& node : tree.nodes) {
    if (!node.is_leaf()) continue;
    std::set<std::int32_t> strata;
    double sum = 0.0;
    for (std::size_t r : node.donors) {
      strata.insert(data.code(r, 0));
      sum += data.value(r, 1);
    }
    REQUIRE(strata.size() == 1);
    double leaf_mean = sum / static_cast<double>(node.donors.size());
    CHECK(std::fabs(leaf_mean - means[*strata.begin()]) < 0.1);
  }
}

TEST_CASE("single-leaf synthesis is a resample of the confidential column") {
  std::shared_ptr<const Schema> schema;
  Dataset data = separable(&schema);
  CartConfig cfg;
  cfg.order = {"t"};
  cfg.min_leaf = data.rows();
  CartModel model = fit_cart(data, cfg);
  SyntheticRelease rel = cart_generate(model, data, 1, 5);
  std::set<std::int32_t> support;
  for (std::size_t i = 0; i < data.rows(); ++i) support.insert(data.code(i, 1));
  for (std::size_t i = 0; i < data.rows(); ++i)
    CHECK(support.count(rel.datasets[0].code(i, 1)) == 1);
}

TEST_CASE("a pure leaf synthesizes its single value") {
  Dataset data = separable();
  CartConfig cfg;
  cfg.order = {"t"};
  cfg.min_leaf = 2;
  CartModel model = fit_cart(data, cfg);
  SyntheticRelease rel = cart_generate(model, data, 3, 6);
  // t == p in the training data and routing uses the un-synthesized p, so
  // every synthetic t must equal p.
  for (const auto& z : rel.datasets)
    for (std::size_t i = 0; i < data.rows(); ++i)
      CHECK(z.code(i, 1) == data.code(i, 0));
}

TEST_CASE("per-stratum synthetic means stay near the confidential means") {
  std::shared_ptr<const Schema> schema;
  std::vector<double> means;
  Dataset data = piecewise(&schema, &means);
  CartConfig cfg;
  cfg.order = {"y"};
  cfg.min_leaf = 5;
  CartModel model = fit_cart(data, cfg);
  SyntheticRelease rel = cart_generate(model, data, 5, 7);
  double sums[2] = {0.0, 0.0};
  int counts[2] = {0, 0};
  for (const auto& z : rel.datasets)
    for (std::size_t i = 0; i < z.rows(); ++i) {
      sums[z.code(i, 0)] += z.value(i, 1);
      ++counts[z.code(i, 0)];
    }
  for (int s = 0; s < 2; ++s)
    CHECK(std::fabs(sums[s] / counts[s] - means[s]) < 0.15);
}

TEST_CASE("continuous synthetic values are donor values (support containment)") {
  std::shared_ptr<const Schema> schema;
  Dataset data = piecewise(&schema, nullptr);
  CartConfig cfg;
  cfg.order = {"y"};
  cfg.min_leaf = 10;
  CartModel model = fit_cart(data, cfg);
  SyntheticRelease rel = cart_generate(model, data, 2, 8);
  std::set<double> support;
  for (std::size_t i = 0; i < data.rows(); ++i) support.insert(data.value(i, 1));
  for (const auto& z : rel.datasets)
    for (std::size_t i = 0; i < z.rows(); ++i)
      CHECK(support.count(z.value(i, 1)) == 1);
}

TEST_CASE("later trees use earlier synthesized variables as predictors") {
  auto schema = testutil::make_schema(
      {cat("u", 2, false, true), cat("a", 2, true, true),
       cat("b", 2, true, true)});
  std::vector<std::vector<Cell>> rows;
  for (int i = 0; i < 40; ++i) {
    std::int32_t u = i % 2;
    std::int32_t a = (i / 2) % 2;
    rows.push_back({Cell{u}, Cell{a}, Cell{a}});  // b == a exactly
  }
  Dataset data = testutil::make_dataset(schema, rows);
  CartConfig cfg;
  cfg.order = {"a", "b"};
  cfg.min_leaf = 5;
  CartModel model = fit_cart(data, cfg);
  REQUIRE(model.trees.size() == 2);
  CHECK(model.trees[0].predictors == std::vector<std::size_t>{0});
  CHECK(model.trees[1].predictors == std::vector<std::size_t>{0, 1});
  // b's tree splits on a, so synthetic b equals synthetic a.
  SyntheticRelease rel = cart_generate(model, data, 2, 13);
  for (const auto& z : rel.datasets)
    for (std::size_t i = 0; i < z.rows(); ++i)
      CHECK(z.code(i, 2) == z.code(i, 1));
}

TEST_CASE("cart releases are reproducible and respect un-synthesized columns") {
  std::shared_ptr<const Schema> schema;
  Dataset data = piecewise(&schema, nullptr);
  CartConfig cfg;
  cfg.order = {"y"};
  cfg.min_leaf = 5;
  CartModel model = fit_cart(data, cfg);
  SyntheticRelease r1 = cart_generate(model, data, 3, 99, 1);
  SyntheticRelease r2 = cart_generate(model, data, 3, 99, 4);
  for (std::size_t l = 0; l < 3; ++l)
    for (std::size_t i = 0; i < data.rows(); ++i) {
      CHECK(r1.datasets[l].value(i, 1) == r2.datasets[l].value(i, 1));
      CHECK(r1.datasets[l].code(i, 0) == data.code(i, 0));
    }
  CHECK(r1.draw_count() == 3);  // one snapshot per release
}

TEST_CASE("cart_log_density puts donor mass inside the bin") {
  std::shared_ptr<const Schema> schema;
  Dataset data = piecewise(&schema, nullptr);
  CartConfig cfg;
  cfg.order = {"y"};
  cfg.min_leaf = data.rows();  // single leaf: weights over the full column
  CartModel model = fit_cart(data, cfg);
  Rng rng = make_rng(1);
  CartDraw draw = sample_cart_draw(model, rng);
  // Bin covering everything -> total weight 1; empty bin -> -inf.
  std::vector<Cell> at_zero = {Cell{0.0}};
  std::vector<double> wide = {100.0};
  double whole = cart_log_density(model, draw, data, 0, at_zero, wide);
  CHECK(std::fabs(std::exp(whole) - 1.0) < 1e-9);
  std::vector<Cell> far = {Cell{9.99}};
  std::vector<double> narrow = {0.001};
  double none = cart_log_density(model, draw, data, 0, far, narrow);
  CHECK(std::isinf(none));
  CHECK(none < 0);
}

TEST_CASE("cart release round-trips through the manifest files") {
  testutil::TempDir tmp;
  std::shared_ptr<const Schema> schema;
  Dataset data = piecewise(&schema, nullptr);
  CartConfig cfg;
  cfg.order = {"y"};
  cfg.min_leaf = 25;
  CartModel model = fit_cart(data, cfg);
  SyntheticRelease rel = cart_generate(model, data, 2, 3);
  auto manifest = write_release(rel, tmp.path, "geo");
  SyntheticRelease back = load_release(manifest, schema);
  REQUIRE_FALSE(back.is_mixture());
  CHECK(back.draw_count() == 2);
  CHECK(back.cart_draws().model.order == model.order);
  REQUIRE(back.cart_draws().model.trees.size() == 1);
  CHECK(back.cart_draws().model.trees[0].nodes.size() ==
        model.trees[0].nodes.size());
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t i = 0; i < data.rows(); ++i)
      CHECK(back.datasets[l].value(i, 1) == rel.datasets[l].value(i, 1));
  // Snapshot weights round-trip at full precision.
  CHECK(back.cart_draws().draws[0].leaf_weights ==
        rel.cart_draws().draws[0].leaf_weights);
}
