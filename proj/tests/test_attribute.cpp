#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "synrisk/attribute_risk.hpp"
#include "synrisk/error.hpp"
#include "synrisk/mixture.hpp"
#include "synrisk/rng.hpp"

using namespace synrisk;
using testutil::cat;
using testutil::cont;

namespace {

// A release whose datasets are fixed by hand around the given draws; the
// datasets' content is arbitrary but schema-valid.
SyntheticRelease hand_release(const Dataset& z, std::vector<MixtureDraw> draws,
                              std::size_t m = 1) {
  SyntheticRelease rel;
  for (std::size_t l = 0; l < m; ++l) rel.datasets.push_back(z);
  rel.draws = std::move(draws);
  rel.provenance.synthesizer = "mixture";
  return rel;
}

MixtureDraw uniform_draw(const std::vector<std::size_t>& cards) {
  MixtureDraw d;
  d.weights = {1.0};
  d.probs.emplace_back();
  for (std::size_t k : cards)
    d.probs[0].push_back(
        std::vector<double>(k, 1.0 / static_cast<double>(k)));
  return d;
}

}  // namespace

TEST_CASE("neighborhood guess set of the 14-variable file has 35 members") {
  std::vector<std::size_t> cards = {2, 4, 6, 4, 5, 2, 7, 3, 3, 2, 2, 3, 3, 2};
  std::vector<VariableDef> vars;
  for (std::size_t j = 0; j < cards.size(); ++j)
    vars.push_back(cat("v" + std::to_string(j), cards[j], true, false));
  auto schema = testutil::make_schema(vars);
  std::vector<Cell> row;
  for (std::size_t j = 0; j < cards.size(); ++j) row.push_back(Cell{0});
  Dataset data = testutil::make_dataset(schema, {row});
  GuessConfig cfg;
  cfg.mode = GuessMode::neighborhood;
  GuessSet gs = build_guess_set(data, 0, cfg);
  CHECK(gs.guesses.size() == 35);
  CHECK(gs.true_position == 0);
  CHECK(enumerate_cells(*schema) == 8709120ULL);
}

TEST_CASE("a single binary variable yields the pair {truth, flip}") {
  auto schema = testutil::make_schema({cat("b", 2, true, false)});
  Dataset data = testutil::make_dataset(schema, {{Cell{1}}});
  GuessConfig cfg;
  GuessSet gs = build_guess_set(data, 0, cfg);
  REQUIRE(gs.guesses.size() == 2);
  CHECK(cell_code(gs.guesses[0][0]) == 1);
  CHECK(cell_code(gs.guesses[1][0]) == 0);
}

TEST_CASE("neighborhood size formula 1 + sum(K - 1)") {
  auto schema = testutil::make_schema({cat("a", 2, true, false),
                                       cat("b", 3, true, false),
                                       cat("c", 4, true, false)});
  Dataset data = testutil::make_dataset(schema, {{Cell{0}, Cell{1}, Cell{3}}});
  GuessConfig cfg;
  GuessSet gs = build_guess_set(data, 0, cfg);
  CHECK(gs.guesses.size() == 7);  // 1 + (1 + 2 + 3)
  // Every non-true guess differs from the truth in exactly one variable.
  for (std::size_t g = 0; g < gs.guesses.size(); ++g) {
    if (g == gs.true_position) continue;
    int diffs = 0;
    for (std::size_t p = 0; p < 3; ++p)
      if (cell_code(gs.guesses[g][p]) != cell_code(gs.guesses[0][p])) ++diffs;
    CHECK(diffs == 1);
  }
}

TEST_CASE("guess-set size formulas hold over random schemas") {
  Rng rng = make_rng(2024);
  std::uniform_int_distribution<int> n_vars(1, 5);
  std::uniform_int_distribution<int> card(2, 6);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<VariableDef> vars;
    std::size_t expect_nbhd = 1;
    std::uint64_t expect_full = 1;
    int v = n_vars(rng);
    std::vector<Cell> row;
    for (int j = 0; j < v; ++j) {
      int k = card(rng);
      vars.push_back(cat("v" + std::to_string(j), k, true, false));
      expect_nbhd += static_cast<std::size_t>(k - 1);
      expect_full *= static_cast<std::uint64_t>(k);
      row.push_back(Cell{0});
    }
    Dataset data = testutil::make_dataset(testutil::make_schema(vars), {row});
    GuessConfig nbhd;
    CHECK(build_guess_set(data, 0, nbhd).guesses.size() == expect_nbhd);
    GuessConfig full;
    full.mode = GuessMode::full_enumeration;
    GuessSet fs = build_guess_set(data, 0, full);
    CHECK(fs.guesses.size() == expect_full);
    // The truth is present exactly once.
    std::size_t hits = 0;
    for (const auto& g : fs.guesses)
      if (g == fs.guesses[fs.true_position]) ++hits;
    CHECK(hits == 1);
  }
}

TEST_CASE("full enumeration above the cap is refused with the exact size") {
  std::vector<VariableDef> vars;
  for (int j = 0; j < 10; ++j)
    vars.push_back(cat("v" + std::to_string(j), 6, true, false));
  std::vector<Cell> row(10, Cell{0});
  Dataset data = testutil::make_dataset(testutil::make_schema(vars), {row});
  GuessConfig cfg;
  cfg.mode = GuessMode::full_enumeration;
  cfg.full_cap = 1000000;
  try {
    build_guess_set(data, 0, cfg);
    FAIL("expected RangeError");
  } catch (const RangeError& e) {
    CHECK(std::string(e.what()).find("60466176") != std::string::npos);
  }
}

TEST_CASE("explicit guesses get the truth appended when absent") {
  auto schema = testutil::make_schema({cat("a", 4, true, false)});
  Dataset data = testutil::make_dataset(schema, {{Cell{2}}});
  GuessConfig cfg;
  cfg.mode = GuessMode::explicit_list;
  cfg.explicit_guesses = {{Cell{0}}, {Cell{3}}};
  GuessSet gs = build_guess_set(data, 0, cfg);
  REQUIRE(gs.guesses.size() == 3);
  CHECK(gs.true_position == 2);
  cfg.explicit_guesses = {{Cell{0}}, {Cell{2}}};
  GuessSet gs2 = build_guess_set(data, 0, cfg);
  CHECK(gs2.guesses.size() == 2);
  CHECK(gs2.true_position == 1);
  cfg.explicit_guesses = {{Cell{2}}, {Cell{2}}};
  CHECK_THROWS_AS(build_guess_set(data, 0, cfg), ConfigError);
}

TEST_CASE("neighborhood mode rejects continuous synthesized variables") {
  auto schema = testutil::make_schema(
      {cont("x", 0.0, 1.0, true, false), cat("a", 2, true, false)});
  Dataset data = testutil::make_dataset(schema, {{Cell{0.5}, Cell{0}}});
  GuessConfig cfg;
  CHECK_THROWS_AS(build_guess_set(data, 0, cfg), SchemaError);
}

TEST_CASE("importance weight is exactly 1 at the true record") {
  MixtureDraw d;
  d.weights = {0.3, 0.7};
  d.probs = {{{0.1, 0.9}, {0.6, 0.4}}, {{0.8, 0.2}, {0.25, 0.75}}};
  auto schema = testutil::make_schema(
      {cat("a", 2, true, false), cat("b", 2, true, false)});
  std::vector<Cell> truth = {Cell{1}, Cell{0}};
  AttributeScenario sc;
  CHECK(importance_weight(*schema, d, truth, truth, sc) == 1.0);
}

TEST_CASE("single-class weights factor over the differing variable") {
  MixtureDraw d;
  d.weights = {1.0};
  d.probs = {{{0.2, 0.8}, {0.7, 0.3}}};
  auto schema = testutil::make_schema(
      {cat("a", 2, true, false), cat("b", 2, true, false)});
  std::vector<Cell> truth = {Cell{1}, Cell{0}};
  std::vector<Cell> guess = {Cell{0}, Cell{0}};  // differs in "a" only
  AttributeScenario sc;
  double w = importance_weight(*schema, d, guess, truth, sc);
  CHECK(std::fabs(w - 0.2 / 0.8) < 1e-12);
}

TEST_CASE("two-class weight matches hand arithmetic") {
  MixtureDraw d;
  d.weights = {0.6, 0.4};
  d.probs = {{{0.2, 0.8}, {0.7, 0.3}}, {{0.5, 0.5}, {0.9, 0.1}}};
  auto schema = testutil::make_schema(
      {cat("a", 2, true, false), cat("b", 2, true, false)});
  std::vector<Cell> truth = {Cell{0}, Cell{0}};   // f = 0.264
  std::vector<Cell> guess = {Cell{1}, Cell{1}};
  // f(guess) = 0.6 * 0.8 * 0.3 + 0.4 * 0.5 * 0.1 = 0.144 + 0.02 = 0.164
  AttributeScenario sc;
  double w = importance_weight(*schema, d, guess, truth, sc);
  CHECK(std::fabs(w - 0.164 / 0.264) < 1e-12);
}

TEST_CASE("a zero-density true record is a degeneracy error") {
  MixtureDraw d;
  d.weights = {1.0};
  d.probs = {{{1.0, 0.0}}};
  auto schema = testutil::make_schema({cat("a", 2, true, false)});
  std::vector<Cell> truth = {Cell{1}};  // density 0 under the draw
  std::vector<Cell> guess = {Cell{0}};
  AttributeScenario sc;
  CHECK_THROWS_AS(importance_weight(*schema, d, guess, truth, sc),
                  NumericalError);
}

TEST_CASE("symmetric densities and uniform prior give a uniform posterior") {
  auto schema = testutil::make_schema({cat("a", 5, true, false),
                                       cat("b", 7, true, false)});
  std::vector<Cell> row = {Cell{3}, Cell{2}};
  Dataset data = testutil::make_dataset(schema, {row});
  MixtureDraw d = uniform_draw({5, 7});
  SyntheticRelease rel = hand_release(data, {d}, 2);
  ReleaseDensityTable table = compute_release_density(rel, data, {});
  GuessConfig cfg;
  GuessSet gs = build_guess_set(data, 0, cfg);
  AttributeScenario sc;
  auto post = posterior_over_guesses(rel, table, data, gs, sc);
  REQUIRE(post.size() == 11);  // 1 + 4 + 6
  for (double p : post) CHECK(std::fabs(p - 1.0 / 11.0) < 1e-12);
}

TEST_CASE("known-theta single-draw posterior equals the analytic one") {
  // With a single retained draw the release density is a constant across
  // guesses, so the exact posterior is the renormalized prior. The oracle
  // computes it analytically in direct space.
  auto schema = testutil::make_schema(
      {cat("a", 2, true, false), cat("b", 2, true, false)});
  Dataset data = testutil::make_dataset(
      schema, {{Cell{0}, Cell{1}}, {Cell{1}, Cell{1}}, {Cell{0}, Cell{0}}});
  MixtureDraw d;
  d.weights = {1.0};
  d.probs = {{{0.3, 0.7}, {0.45, 0.55}}};
  SyntheticRelease rel = hand_release(data, {d}, 1);
  ReleaseDensityTable table = compute_release_density(rel, data, {});

  GuessConfig cfg;
  cfg.mode = GuessMode::full_enumeration;
  GuessSet gs = build_guess_set(data, 0, cfg);
  REQUIRE(gs.guesses.size() == 4);
  AttributeScenario sc;
  sc.prior = {0.4, 0.3, 0.2, 0.1};

  // Oracle: posterior proportional to prior * p(Z | guess), with
  // p(Z | guess) enumerated directly from the single known draw.
  std::vector<double> oracle(4);
  double z_density = testutil::oracle_dataset_density(d, data, {0, 1});
  double total = 0.0;
  for (std::size_t g = 0; g < 4; ++g) {
    oracle[g] = sc.prior[g] * z_density;
    total += oracle[g];
  }
  for (double& p : oracle) p /= total;

  auto post = posterior_over_guesses(rel, table, data, gs, sc);
  REQUIRE(post.size() == 4);
  for (std::size_t g = 0; g < 4; ++g)
    CHECK(std::fabs(post[g] - oracle[g]) < 1e-10);
}

TEST_CASE("known-theta oracle holds on a 64-cell schema with H = 1") {
  auto schema = testutil::make_schema({cat("a", 4, true, false),
                                       cat("b", 4, true, false),
                                       cat("c", 4, true, false)});
  std::vector<std::vector<Cell>> rows;
  for (int i = 0; i < 6; ++i)
    rows.push_back({Cell{i % 4}, Cell{(i + 1) % 4}, Cell{(3 * i) % 4}});
  Dataset data = testutil::make_dataset(schema, rows);
  MixtureDraw d;
  d.weights = {1.0};
  d.probs = {{{0.1, 0.2, 0.3, 0.4},
              {0.4, 0.3, 0.2, 0.1},
              {0.25, 0.25, 0.3, 0.2}}};
  SyntheticRelease rel = hand_release(data, {d}, 2);
  ReleaseDensityTable table = compute_release_density(rel, data, {});
  GuessConfig cfg;
  cfg.mode = GuessMode::full_enumeration;
  GuessSet gs = build_guess_set(data, 2, cfg);
  REQUIRE(gs.guesses.size() == 64);
  AttributeScenario sc;  // uniform prior
  auto post = posterior_over_guesses(rel, table, data, gs, sc);
  for (double p : post) CHECK(std::fabs(p - 1.0 / 64.0) < 1e-10);
}

TEST_CASE("uniform prior constant cancels") {
  auto schema = testutil::make_schema(
      {cat("a", 3, true, false), cat("b", 2, true, false)});
  Dataset data = testutil::make_dataset(
      schema, {{Cell{0}, Cell{1}}, {Cell{2}, Cell{0}}});
  MixtureDraw d1;
  d1.weights = {0.5, 0.5};
  d1.probs = {{{0.6, 0.3, 0.1}, {0.2, 0.8}}, {{0.1, 0.4, 0.5}, {0.7, 0.3}}};
  MixtureDraw d2;
  d2.weights = {0.9, 0.1};
  d2.probs = {{{0.3, 0.3, 0.4}, {0.5, 0.5}}, {{0.2, 0.2, 0.6}, {0.1, 0.9}}};
  SyntheticRelease rel = hand_release(data, {d1, d2}, 3);
  ReleaseDensityTable table = compute_release_density(rel, data, {});
  GuessConfig cfg;
  GuessSet gs = build_guess_set(data, 0, cfg);
  AttributeScenario without;  // empty prior = uniform, constant dropped
  AttributeScenario with;
  with.prior =
      std::vector<double>(gs.guesses.size(), 1.0 / gs.guesses.size());
  auto p1 = posterior_over_guesses(rel, table, data, gs, without);
  auto p2 = posterior_over_guesses(rel, table, data, gs, with);
  REQUIRE(p1.size() == p2.size());
  for (std::size_t g = 0; g < p1.size(); ++g)
    CHECK(std::fabs(p1[g] - p2[g]) < 1e-12);
}

TEST_CASE("posteriors are normalized") {
  auto schema = testutil::make_schema(
      {cat("a", 3, true, false), cat("b", 4, true, false)});
  std::vector<std::vector<Cell>> rows;
  for (int i = 0; i < 30; ++i)
    rows.push_back({Cell{i % 3}, Cell{(i * 7) % 4}});
  Dataset data = testutil::make_dataset(schema, rows);
  GibbsConfig gc;
  gc.classes = 3;
  gc.burn_in = 50;
  gc.thin = 1;
  gc.draws = 40;
  auto draws = fit_mixture(data, gc, 101);
  SyntheticRelease rel = generate_mixture_release(draws, data, 3, 55);
  AttributeRiskResult res = run_attribute_risk(rel, data, AttributeScenario{},
                                               GuessConfig{}, {});
  REQUIRE(res.records.size() == 30);
  for (const auto& r : res.records) {
    double sum = std::accumulate(r.posterior.begin(), r.posterior.end(), 0.0);
    CHECK(std::fabs(sum - 1.0) < 1e-9);
    CHECK(r.rank >= 1);
    CHECK(r.rank <= r.posterior.size());
  }
}

TEST_CASE("rank semantics: direct readoff, ties, monotonicity") {
  // Symmetric densities make the posterior equal the prior exactly, so the
  // prior doubles as a hand-built posterior vector.
  auto schema = testutil::make_schema({cat("a", 3, true, false)});
  Dataset data = testutil::make_dataset(schema, {{Cell{1}}});
  MixtureDraw d = uniform_draw({3});
  SyntheticRelease rel = hand_release(data, {d}, 1);
  ReleaseDensityTable table = compute_release_density(rel, data, {});

  GuessConfig cfg;
  cfg.mode = GuessMode::explicit_list;
  cfg.explicit_guesses = {{Cell{0}}, {Cell{1}}, {Cell{2}}};
  GuessSet gs = build_guess_set(data, 0, cfg);
  REQUIRE(gs.true_position == 1);

  AttributeScenario sc;
  sc.prior = {0.5, 0.3, 0.2};
  auto post = posterior_over_guesses(rel, table, data, gs, sc);
  CHECK(std::fabs(post[1] - 0.3) < 1e-12);

  AttributeRiskResult one = run_attribute_risk(rel, data, sc, cfg, {});
  REQUIRE(one.records.size() == 1);
  CHECK(one.records[0].rank == 2);
  CHECK(std::fabs(one.records[0].true_probability - 0.3) < 1e-12);

  // Zeroing out a non-true guess's prior mass must not move the truth's
  // rank past the remaining higher-mass guess.
  AttributeScenario sc_zero = sc;
  sc_zero.prior = {0.6, 0.4, 0.0};
  auto post_zero = posterior_over_guesses(rel, table, data, gs, sc_zero);
  CHECK(post_zero[2] == 0.0);
  AttributeRiskResult z = run_attribute_risk(rel, data, sc_zero, cfg, {});
  CHECK(z.records[0].rank == 2);
}

TEST_CASE("uniform posterior over 35 guesses: rank 1, probability 1/35") {
  std::vector<std::size_t> cards = {2, 4, 6, 4, 5, 2, 7, 3, 3, 2, 2, 3, 3, 2};
  std::vector<VariableDef> vars;
  for (std::size_t j = 0; j < cards.size(); ++j)
    vars.push_back(cat("v" + std::to_string(j), cards[j], true, false));
  auto schema = testutil::make_schema(vars);
  std::vector<Cell> row;
  for (std::size_t j = 0; j < cards.size(); ++j) row.push_back(Cell{0});
  Dataset data = testutil::make_dataset(schema, {row});
  MixtureDraw d = uniform_draw(cards);
  SyntheticRelease rel = hand_release(data, {d}, 1);
  AttributeRiskResult res = run_attribute_risk(rel, data, AttributeScenario{},
                                               GuessConfig{}, {});
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].posterior.size() == 35);
  CHECK(res.records[0].rank == 1);  // all tied at the minimum rank
  CHECK(std::fabs(res.records[0].true_probability - 1.0 / 35.0) < 1e-12);
  CHECK(res.summary.rank_counts.at(1) == 1);
}

TEST_CASE("rank summary aggregates counts and central probabilities") {
  std::vector<RecordPosterior> recs(3);
  recs[0].posterior = {0.6, 0.4};
  recs[0].true_position = 0;
  recs[0].rank = 1;
  recs[0].true_probability = 0.6;
  recs[1].posterior = {0.9, 0.1};
  recs[1].true_position = 1;
  recs[1].rank = 2;
  recs[1].true_probability = 0.1;
  recs[2].posterior = {0.5, 0.5};
  recs[2].true_position = 0;
  recs[2].rank = 1;
  recs[2].true_probability = 0.5;
  RankSummary rs = rank_summary(recs);
  CHECK(rs.rank_counts.at(1) == 2);
  CHECK(rs.rank_counts.at(2) == 1);
  CHECK(std::fabs(rs.mean_true_probability - 0.4) < 1e-12);
  CHECK(std::fabs(rs.median_true_probability - 0.5) < 1e-12);
}

TEST_CASE("known-subset scenarios zero out conflicting guesses") {
  auto schema = testutil::make_schema(
      {cat("a", 2, true, true), cat("b", 3, true, false)});
  Dataset data = testutil::make_dataset(schema, {{Cell{1}, Cell{2}},
                                                 {Cell{0}, Cell{0}}});
  MixtureDraw d;
  d.weights = {1.0};
  d.probs = {{{0.4, 0.6}, {0.5, 0.3, 0.2}}};
  SyntheticRelease rel = hand_release(data, {d}, 1);
  ReleaseDensityTable table = compute_release_density(rel, data, {});
  GuessConfig cfg;
  cfg.mode = GuessMode::full_enumeration;
  GuessSet gs = build_guess_set(data, 0, cfg);
  AttributeScenario sc;
  sc.knowledge = Knowledge::known_subset;
  sc.known_subset = {0};  // intruder knows a = 1 for the target
  auto post = posterior_over_guesses(rel, table, data, gs, sc);
  REQUIRE(post.size() == 6);
  double sum = 0.0;
  for (std::size_t g = 0; g < 6; ++g) {
    if (cell_code(gs.guesses[g][0]) != 1) CHECK(post[g] == 0.0);
    sum += post[g];
  }
  CHECK(std::fabs(sum - 1.0) < 1e-9);
  // With a single known draw the consistent guesses split the mass by the
  // renormalized prior, here uniform over the 3 consistent cells.
  for (std::size_t g = 0; g < 6; ++g)
    if (cell_code(gs.guesses[g][0]) == 1)
      CHECK(std::fabs(post[g] - 1.0 / 3.0) < 1e-10);
}

TEST_CASE("draws that underflow the true record's density are dropped") {
  auto schema = testutil::make_schema({cat("a", 2, true, false)});
  Dataset data = testutil::make_dataset(schema, {{Cell{1}}});
  MixtureDraw good;
  good.weights = {1.0};
  good.probs = {{{0.5, 0.5}}};
  MixtureDraw bad;
  bad.weights = {1.0};
  bad.probs = {{{1.0, 0.0}}};  // true record has zero density
  SyntheticRelease rel = hand_release(data, {good, good, bad}, 1);
  ReleaseDensityTable table = compute_release_density(rel, data, {});
  GuessConfig cfg;
  GuessSet gs = build_guess_set(data, 0, cfg);
  std::size_t dropped = 0;
  auto post = posterior_over_guesses(rel, table, data, gs, AttributeScenario{},
                                     {}, &dropped);
  CHECK(dropped == 1);
  CHECK(std::fabs(post[0] + post[1] - 1.0) < 1e-9);

  // More than half degenerate: refuse.
  SyntheticRelease rel2 = hand_release(data, {bad, bad, good}, 1);
  ReleaseDensityTable table2 = compute_release_density(rel2, data, {});
  CHECK_THROWS_AS(posterior_over_guesses(rel2, table2, data, gs,
                                         AttributeScenario{}, {}, &dropped),
                  NumericalError);
}

TEST_CASE("importance sampling tracks a two-draw hand computation") {
  // Two draws, two releases; every quantity small enough to carry through
  // by hand in direct space.
  auto schema = testutil::make_schema({cat("a", 2, true, false)});
  Dataset z1 = testutil::make_dataset(schema, {{Cell{0}}});
  Dataset z2 = testutil::make_dataset(schema, {{Cell{1}}});
  MixtureDraw d1;
  d1.weights = {1.0};
  d1.probs = {{{0.8, 0.2}}};
  MixtureDraw d2;
  d2.weights = {1.0};
  d2.probs = {{{0.4, 0.6}}};
  SyntheticRelease rel;
  rel.datasets = {z1, z2};
  rel.draws = std::vector<MixtureDraw>{d1, d2};
  rel.provenance.synthesizer = "mixture";

  Dataset truth_data = testutil::make_dataset(schema, {{Cell{0}}});
  ReleaseDensityTable table = compute_release_density(rel, truth_data, {});
  GuessConfig cfg;
  GuessSet gs = build_guess_set(truth_data, 0, cfg);  // guesses {0}, {1}
  auto post = posterior_over_guesses(rel, table, truth_data, gs,
                                     AttributeScenario{});

  // Hand: weights r_h(y*) = f(y*|h)/f(0|h). For y* = 0: (1, 1).
  // For y* = 1: (0.2/0.8, 0.6/0.4) = (0.25, 1.5).
  // Release densities: p(Z1|h) = f(0|h) = (0.8, 0.4);
  //                    p(Z2|h) = f(1|h) = (0.2, 0.6).
  // y* = 0: per release (0.8+0.4)/2 = 0.6 and (0.2+0.6)/2 = 0.4 -> 0.24.
  // y* = 1: (0.25*0.8 + 1.5*0.4)/1.75 = 0.8/1.75 = 0.457142857...
  //         (0.25*0.2 + 1.5*0.6)/1.75 = 0.95/1.75 = 0.542857142...
  //         product = 0.2481632653...
  double l0 = 0.6 * 0.4;
  double l1 = (0.8 / 1.75) * (0.95 / 1.75);
  double e0 = l0 / (l0 + l1);
  double e1 = l1 / (l0 + l1);
  REQUIRE(post.size() == 2);
  CHECK(std::fabs(post[0] - e0) < 1e-12);
  CHECK(std::fabs(post[1] - e1) < 1e-12);
}

TEST_CASE("hybrid conditional weight under a known subset") {
  // Intruder knows variable a. The weight must hold a at its true value on
  // both sides, giving the conditional-density ratio of b given a.
  MixtureDraw d;
  d.weights = {0.6, 0.4};
  d.probs = {{{0.2, 0.8}, {0.7, 0.3}}, {{0.5, 0.5}, {0.9, 0.1}}};
  auto schema = testutil::make_schema(
      {cat("a", 2, true, true), cat("b", 2, true, false)});
  std::vector<Cell> truth = {Cell{0}, Cell{0}};
  std::vector<Cell> guess = {Cell{1}, Cell{1}};  // known coord overridden
  AttributeScenario sc;
  sc.knowledge = Knowledge::known_subset;
  sc.known_subset = {0};
  double w = importance_weight(*schema, d, guess, truth, sc);
  // Numerator: f(a=0, b=1) = 0.6 * 0.2 * 0.3 + 0.4 * 0.5 * 0.1 = 0.056.
  // Denominator: f(a=0, b=0) = 0.264. The f(a=0) marginal cancels.
  CHECK(std::fabs(w - 0.056 / 0.264) < 1e-12);
}

TEST_CASE("a guess set with an out-of-range true position is refused") {
  auto schema = testutil::make_schema({cat("a", 2, true, false)});
  Dataset data = testutil::make_dataset(schema, {{Cell{0}}});
  MixtureDraw d;
  d.weights = {1.0};
  d.probs = {{{0.5, 0.5}}};
  SyntheticRelease rel = hand_release(data, {d}, 1);
  ReleaseDensityTable table = compute_release_density(rel, data, {});
  GuessSet gs;
  gs.record = 0;
  gs.guesses = {{Cell{0}}, {Cell{1}}};
  gs.true_position = 5;
  CHECK_THROWS_AS(posterior_over_guesses(rel, table, data, gs,
                                         AttributeScenario{}),
                  ConfigError);
}
