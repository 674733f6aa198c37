#include "synrisk/attribute_risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <sstream>

#include "synrisk/error.hpp"
#include "synrisk/parallel.hpp"

namespace synrisk {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTieTol = 1e-12;
// Draws whose proposal density underflows past this are dropped.
const double kLogTiny = std::log(1e-300);

double log_sum_exp(std::span<const double> v) {
  double mx = kNegInf;
  for (double x : v)
    if (x > mx) mx = x;
  if (!(mx > kNegInf)) return kNegInf;
  double s = 0.0;
  for (double x : v)
    if (x > kNegInf) s += std::exp(x - mx);
  return mx + std::log(s);
}

bool cell_equal(const Cell& a, const Cell& b) {
  if (a.index() != b.index()) return false;
  return std::holds_alternative<std::int32_t>(a)
             ? cell_code(a) == cell_code(b)
             : cell_value(a) == cell_value(b);
}

std::string format_guess(const Schema& schema,
                         std::span<const std::size_t> synth,
                         std::span<const Cell> values) {
  std::ostringstream out;
  for (std::size_t p = 0; p < synth.size(); ++p) {
    if (p) out << ", ";
    const auto& var = schema.variable(synth[p]);
    out << var.name << "=";
    if (var.is_categorical())
      out << var.levels[static_cast<std::size_t>(cell_code(values[p]))];
    else
      out << cell_value(values[p]);
  }
  return out.str();
}

// Reorder map from schema-order synthesized positions to the tree
// synthesizer's stage order, plus the per-stage bin widths.
struct CartPlan {
  std::vector<std::size_t> src;  // src[stage] = synthesized-order position
  std::vector<double> stage_bins;
};

CartPlan make_cart_plan(const CartModel& model,
                        std::span<const std::size_t> synth,
                        std::span<const double> bins) {
  CartPlan plan;
  for (std::size_t var : model.order) {
    auto it = std::find(synth.begin(), synth.end(), var);
    if (it == synth.end())
      throw SchemaError("attribute_risk", "posterior_over_guesses",
                        "tree model synthesizes a variable the schema does "
                        "not mark synthesized");
    std::size_t pos = static_cast<std::size_t>(it - synth.begin());
    plan.src.push_back(pos);
    plan.stage_bins.push_back(pos < bins.size() ? bins[pos] : 0.0);
  }
  return plan;
}

// log f(values | draw h), values in schema-order synthesized positions.
double log_density(const SyntheticRelease& release, std::size_t h,
                   const Dataset& data, std::size_t record,
                   std::span<const Cell> values, const CartPlan* plan) {
  if (release.is_mixture())
    return log_predictive_density(release.mixture_draws()[h], values);
  const CartDrawSet& cd = release.cart_draws();
  std::vector<Cell> staged(plan->src.size(), Cell{std::int32_t{0}});
  for (std::size_t k = 0; k < plan->src.size(); ++k)
    staged[k] = values[plan->src[k]];
  return cart_log_density(cd.model, cd.draws[h], data, record, staged,
                          plan->stage_bins);
}

std::vector<std::size_t> known_positions(const Schema& schema,
                                         std::span<const std::size_t> synth,
                                         const AttributeScenario& scenario) {
  std::vector<std::size_t> pos;
  if (scenario.knowledge != Knowledge::known_subset) return pos;
  if (scenario.known_subset.empty())
    throw ConfigError("attribute_risk", "posterior_over_guesses",
                      "known-subset scenario with empty subset");
  for (std::size_t var : scenario.known_subset) {
    auto it = std::find(synth.begin(), synth.end(), var);
    if (it == synth.end())
      throw ConfigError("attribute_risk", "posterior_over_guesses",
                        "known-subset variable '" +
                            (var < schema.size() ? schema.variable(var).name
                                                 : std::to_string(var)) +
                            "' is not a synthesized variable");
    pos.push_back(static_cast<std::size_t>(it - synth.begin()));
  }
  std::sort(pos.begin(), pos.end());
  pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
  return pos;
}

void validate_prior(std::span<const double> prior, std::size_t guesses) {
  if (prior.empty()) return;
  if (prior.size() != guesses)
    throw ConfigError("attribute_risk", "posterior_over_guesses",
                      "prior has " + std::to_string(prior.size()) +
                          " entries for " + std::to_string(guesses) +
                          " guesses");
  double total = 0.0;
  for (double p : prior) {
    if (p < 0.0)
      throw ConfigError("attribute_risk", "posterior_over_guesses",
                        "negative prior probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("attribute_risk", "posterior_over_guesses",
                      "prior sums to " + std::to_string(total) + ", not 1");
}

struct EngineOut {
  std::vector<double> posterior;
  std::size_t dropped = 0;
};

// Self-normalized importance sampling over the retained draws, one weighted
// average per release, products across releases, all in log space. The
// denominator record is the true record; candidates agreeing with it get
// weight 1 automatically.
EngineOut engine(const SyntheticRelease& release,
                 const ReleaseDensityTable& table, const Dataset& data,
                 std::size_t record,
                 std::span<const std::vector<Cell>> candidates,
                 std::span<const Cell> true_values,
                 const AttributeScenario& scenario,
                 std::span<const double> bins) {
  const Schema& schema = data.schema();
  const Partition part = partition(schema);
  const std::size_t H = release.draw_count();
  const std::size_t m = release.releases();
  if (H == 0)
    throw ConfigError("attribute_risk", "posterior_over_guesses",
                      "release has no retained draws");
  if (table.log_density.size() != m)
    throw ConfigError("attribute_risk", "posterior_over_guesses",
                      "density table has " +
                          std::to_string(table.log_density.size()) +
                          " release rows, expected " + std::to_string(m));
  for (const auto& row : table.log_density)
    if (row.size() != H)
      throw ConfigError("attribute_risk", "posterior_over_guesses",
                        "density table row length does not match draw count");
  validate_prior(scenario.prior, candidates.size());
  const std::vector<std::size_t> known =
      known_positions(schema, part.synthesized, scenario);

  CartPlan plan;
  if (!release.is_mixture())
    plan = make_cart_plan(release.cart_draws().model, part.synthesized, bins);
  const CartPlan* planp = release.is_mixture() ? nullptr : &plan;

  EngineOut out;
  std::vector<double> lf_true(H);
  std::vector<std::size_t> kept;
  kept.reserve(H);
  for (std::size_t h = 0; h < H; ++h) {
    lf_true[h] = log_density(release, h, data, record, true_values, planp);
    if (lf_true[h] < kLogTiny)
      ++out.dropped;
    else
      kept.push_back(h);
  }
  if (out.dropped * 2 > H)
    throw NumericalError(
        "attribute_risk", "posterior_over_guesses",
        "proposal density underflowed for " + std::to_string(out.dropped) +
            " of " + std::to_string(H) + " draws at record " +
            std::to_string(data.row_id(record)));

  const std::size_t G = candidates.size();
  std::vector<double> logpost(G, kNegInf);
  std::vector<double> guess_peak(G, kNegInf);  // max log f over kept draws
  std::vector<double> lw(kept.size());
  std::vector<double> num(kept.size());
  for (std::size_t g = 0; g < G; ++g) {
    bool conflict = false;
    for (std::size_t p : known)
      if (!cell_equal(candidates[g][p], true_values[p])) {
        conflict = true;
        break;
      }
    if (conflict) continue;

    for (std::size_t j = 0; j < kept.size(); ++j) {
      std::size_t h = kept[j];
      double lf = log_density(release, h, data, record, candidates[g], planp);
      if (lf > guess_peak[g]) guess_peak[g] = lf;
      lw[j] = lf - lf_true[h];
    }
    double denom = log_sum_exp(lw);
    if (denom == kNegInf) continue;

    double acc = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
      const auto& row = table.log_density[l];
      for (std::size_t j = 0; j < kept.size(); ++j)
        num[j] = row[kept[j]] + lw[j];
      acc += log_sum_exp(num) - denom;
    }
    double lp = scenario.prior.empty() ? 0.0 : std::log(scenario.prior[g]);
    logpost[g] = lp + acc;
  }

  double norm = log_sum_exp(logpost);
  if (norm == kNegInf) {
    std::size_t worst = 0;
    for (std::size_t g = 1; g < G; ++g)
      if (guess_peak[g] < guess_peak[worst]) worst = g;
    throw NumericalError(
        "attribute_risk", "posterior_over_guesses",
        "all importance weights vanished for every guess at record " +
            std::to_string(data.row_id(record)) + "; most degenerate guess: " +
            format_guess(schema, part.synthesized, candidates[worst]));
  }
  out.posterior.resize(G);
  for (std::size_t g = 0; g < G; ++g)
    out.posterior[g] = logpost[g] == kNegInf ? 0.0 : std::exp(logpost[g] - norm);
  return out;
}

std::size_t rank_of(std::span<const double> posterior, std::size_t true_pos) {
  std::size_t rank = 1;
  double pt = posterior[true_pos];
  for (double p : posterior)
    if (p > pt + kTieTol) ++rank;
  return rank;
}

}  // namespace

GuessSet build_guess_set(const Dataset& data, std::size_t record,
                         const GuessConfig& config) {
  const Schema& schema = data.schema();
  const Partition part = partition(schema);
  if (record >= data.rows())
    throw RangeError("attribute_risk", "build_guess_set",
                     "record index " + std::to_string(record) +
                         " out of range for " + std::to_string(data.rows()) +
                         " rows");
  GuessSet out;
  out.record = record;
  out.mode = config.mode;
  std::vector<Cell> truth = data.gather(record, part.synthesized);

  auto require_categorical = [&](const char* what) {
    for (std::size_t j : part.synthesized)
      if (!schema.variable(j).is_categorical())
        throw SchemaError("attribute_risk", "build_guess_set",
                          std::string(what) +
                              " is unsupported for continuous synthesized "
                              "variable '" +
                              schema.variable(j).name + "'");
  };

  switch (config.mode) {
    case GuessMode::neighborhood: {
      require_categorical("neighborhood mode");
      out.guesses.push_back(truth);
      out.true_position = 0;
      for (std::size_t p = 0; p < part.synthesized.size(); ++p) {
        const auto& var = schema.variable(part.synthesized[p]);
        std::int32_t true_code = cell_code(truth[p]);
        for (std::int32_t k = 0;
             k < static_cast<std::int32_t>(var.cardinality()); ++k) {
          if (k == true_code) continue;
          std::vector<Cell> g = truth;
          g[p] = k;
          out.guesses.push_back(std::move(g));
        }
      }
      break;
    }
    case GuessMode::full_enumeration: {
      require_categorical("full enumeration");
      std::uint64_t total = 1;
      for (std::size_t j : part.synthesized) {
        std::uint64_t k = schema.variable(j).cardinality();
        if (total > std::numeric_limits<std::uint64_t>::max() / k)
          throw RangeError("attribute_risk", "build_guess_set",
                           "enumeration size exceeds 64-bit capacity");
        total *= k;
      }
      if (total > config.full_cap)
        throw RangeError("attribute_risk", "build_guess_set",
                         "full enumeration needs " + std::to_string(total) +
                             " guesses; cap is " +
                             std::to_string(config.full_cap));
      out.guesses.reserve(total);
      std::vector<std::int32_t> codes(part.synthesized.size(), 0);
      std::uint64_t true_index = 0;
      for (std::size_t p = 0; p < part.synthesized.size(); ++p)
        true_index = true_index *
                         schema.variable(part.synthesized[p]).cardinality() +
                     static_cast<std::uint64_t>(cell_code(truth[p]));
      for (std::uint64_t idx = 0; idx < total; ++idx) {
        std::vector<Cell> g(codes.size(), Cell{std::int32_t{0}});
        for (std::size_t p = 0; p < codes.size(); ++p) g[p] = codes[p];
        out.guesses.push_back(std::move(g));
        // Odometer, last variable fastest.
        for (std::size_t p = codes.size(); p-- > 0;) {
          if (++codes[p] <
              static_cast<std::int32_t>(
                  schema.variable(part.synthesized[p]).cardinality()))
            break;
          codes[p] = 0;
        }
      }
      out.true_position = static_cast<std::size_t>(true_index);
      break;
    }
    case GuessMode::explicit_list: {
      if (config.explicit_guesses.empty())
        throw ConfigError("attribute_risk", "build_guess_set",
                          "explicit mode with no guesses supplied");
      for (const auto& g : config.explicit_guesses) {
        if (g.size() != part.synthesized.size())
          throw ConfigError("attribute_risk", "build_guess_set",
                            "explicit guess has " + std::to_string(g.size()) +
                                " values; schema has " +
                                std::to_string(part.synthesized.size()) +
                                " synthesized variables");
        for (std::size_t p = 0; p < g.size(); ++p) {
          const auto& var = schema.variable(part.synthesized[p]);
          if (var.is_categorical()) {
            if (!std::holds_alternative<std::int32_t>(g[p]) ||
                cell_code(g[p]) < 0 ||
                cell_code(g[p]) >= static_cast<std::int32_t>(var.cardinality()))
              throw ConfigError("attribute_risk", "build_guess_set",
                                "explicit guess value invalid for '" +
                                    var.name + "'");
          } else if (!std::holds_alternative<double>(g[p])) {
            throw ConfigError("attribute_risk", "build_guess_set",
                              "explicit guess value invalid for '" + var.name +
                                  "'");
          }
        }
        out.guesses.push_back(g);
      }
      bool found = false;
      for (std::size_t g = 0; g < out.guesses.size(); ++g) {
        bool eq = true;
        for (std::size_t p = 0; p < truth.size(); ++p)
          if (!cell_equal(out.guesses[g][p], truth[p])) {
            eq = false;
            break;
          }
        if (eq) {
          if (found)
            throw ConfigError("attribute_risk", "build_guess_set",
                              "explicit guesses contain the true record twice");
          out.true_position = g;
          found = true;
        }
      }
      if (!found) {
        out.true_position = out.guesses.size();
        out.guesses.push_back(truth);
      }
      break;
    }
  }

  // Pairwise distinctness; sort-based to stay cheap for full enumerations.
  std::vector<std::size_t> order(out.guesses.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.guesses[a] < out.guesses[b];
  });
  for (std::size_t i = 0; i + 1 < order.size(); ++i)
    if (out.guesses[order[i]] == out.guesses[order[i + 1]])
      throw ConfigError("attribute_risk", "build_guess_set",
                        "guess set contains duplicates");
  return out;
}

ReleaseDensityTable compute_release_density(const SyntheticRelease& release,
                                            const Dataset& data,
                                            std::span<const double> bins,
                                            unsigned jobs) {
  const std::size_t m = release.releases();
  const std::size_t H = release.draw_count();
  const Partition part = partition(data.schema());
  CartPlan plan;
  if (!release.is_mixture())
    plan = make_cart_plan(release.cart_draws().model, part.synthesized, bins);
  const CartPlan* planp = release.is_mixture() ? nullptr : &plan;

  ReleaseDensityTable table;
  table.log_density.assign(m, std::vector<double>(H, 0.0));
  parallel_for(m * H, jobs == 0 ? default_jobs() : jobs, [&](std::size_t t) {
    std::size_t l = t / H, h = t % H;
    const Dataset& z = release.datasets[l];
    double acc = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) {
      std::vector<Cell> row = z.gather(i, part.synthesized);
      acc += log_density(release, h, data, i, row, planp);
    }
    table.log_density[l][h] = acc;
  });
  return table;
}

double importance_weight(const Schema& schema, const MixtureDraw& draw,
                         std::span<const Cell> guess,
                         std::span<const Cell> true_record,
                         const AttributeScenario& scenario) {
  const Partition part = partition(schema);
  if (guess.size() != part.synthesized.size() ||
      true_record.size() != part.synthesized.size())
    throw ConfigError("attribute_risk", "importance_weight",
                      "value vector length does not match the synthesized "
                      "variable count");
  if (scenario.knowledge == Knowledge::worst_case) {
    double num = log_predictive_density(draw, guess);
    double den = log_predictive_density(draw, true_record);
    if (den < kLogTiny)
      throw NumericalError("attribute_risk", "importance_weight",
                           "proposal density is zero at the true record");
    return std::exp(num - den);
  }
  const std::vector<std::size_t> known =
      known_positions(schema, part.synthesized, scenario);
  std::vector<bool> mask(part.synthesized.size(), false);
  for (std::size_t p : known) mask[p] = true;
  // Known coordinates are held at their true values on both sides, so this
  // is the conditional-density ratio of the unknown coordinates.
  std::vector<Cell> hybrid(guess.begin(), guess.end());
  for (std::size_t p : known) hybrid[p] = true_record[p];
  std::vector<Cell> truth(true_record.begin(), true_record.end());
  double num = log_conditional_density(draw, hybrid, mask);
  double den = log_conditional_density(draw, truth, mask);
  if (den < kLogTiny)
    throw NumericalError("attribute_risk", "importance_weight",
                         "conditional proposal density is zero at the true "
                         "record");
  return std::exp(num - den);
}

std::vector<double> posterior_over_guesses(const SyntheticRelease& release,
                                           const ReleaseDensityTable& table,
                                           const Dataset& data,
                                           const GuessSet& guess_set,
                                           const AttributeScenario& scenario,
                                           std::span<const double> bins,
                                           std::size_t* dropped_draws) {
  if (guess_set.guesses.empty())
    throw ConfigError("attribute_risk", "posterior_over_guesses",
                      "empty guess set");
  if (guess_set.true_position >= guess_set.guesses.size())
    throw ConfigError("attribute_risk", "posterior_over_guesses",
                      "true_position out of range");
  EngineOut res =
      engine(release, table, data, guess_set.record, guess_set.guesses,
             guess_set.guesses[guess_set.true_position], scenario, bins);
  if (dropped_draws) *dropped_draws = res.dropped;
  return res.posterior;
}

RankSummary rank_summary(std::span<const RecordPosterior> records) {
  RankSummary s;
  if (records.empty()) return s;
  std::vector<double> probs;
  probs.reserve(records.size());
  double total = 0.0;
  for (const auto& r : records) {
    ++s.rank_counts[r.rank];
    probs.push_back(r.true_probability);
    total += r.true_probability;
  }
  s.mean_true_probability = total / static_cast<double>(records.size());
  std::sort(probs.begin(), probs.end());
  std::size_t n = probs.size();
  s.median_true_probability =
      n % 2 ? probs[n / 2] : 0.5 * (probs[n / 2 - 1] + probs[n / 2]);
  return s;
}

AttributeRiskResult run_attribute_risk(const SyntheticRelease& release,
                                       const Dataset& data,
                                       const AttributeScenario& scenario,
                                       const GuessConfig& guess_config,
                                       std::span<const std::size_t> records,
                                       unsigned jobs) {
  const Partition part = partition(data.schema());
  for (std::size_t j : part.synthesized)
    if (!data.schema().variable(j).is_categorical())
      throw ConfigError("attribute_risk", "run_attribute_risk",
                        "continuous synthesized variable '" +
                            data.schema().variable(j).name +
                            "'; use the geographic grid pipeline");

  std::vector<std::size_t> all;
  if (records.empty()) {
    all.resize(data.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    records = all;
  }
  for (std::size_t r : records)
    if (r >= data.rows())
      throw RangeError("attribute_risk", "run_attribute_risk",
                       "record index " + std::to_string(r) + " out of range");

  ReleaseDensityTable table = compute_release_density(release, data, {}, jobs);

  AttributeRiskResult out;
  out.records.resize(records.size());
  parallel_for(records.size(), jobs == 0 ? default_jobs() : jobs,
               [&](std::size_t idx) {
                 std::size_t rec = records[idx];
                 GuessSet gs = build_guess_set(data, rec, guess_config);
                 RecordPosterior rp;
                 rp.record = rec;
                 rp.row_id = data.row_id(rec);
                 rp.posterior = posterior_over_guesses(
                     release, table, data, gs, scenario, {}, &rp.dropped_draws);
                 rp.true_position = gs.true_position;
                 rp.rank = rank_of(rp.posterior, gs.true_position);
                 rp.true_probability = rp.posterior[gs.true_position];
                 out.records[idx] = std::move(rp);
               });
  for (const auto& r : out.records) out.total_dropped_draws += r.dropped_draws;
  out.summary = rank_summary(out.records);
  return out;
}

std::vector<GridPoint> grid_points(const GeoGrid& grid) {
  if (grid.x_steps == 0 || grid.y_steps == 0)
    throw ConfigError("attribute_risk", "grid_points", "empty grid");
  if (!(grid.x_min < grid.x_max) || !(grid.y_min < grid.y_max))
    throw ConfigError("attribute_risk", "grid_points",
                      "grid bounds must satisfy min < max");
  double dx = (grid.x_max - grid.x_min) / static_cast<double>(grid.x_steps);
  double dy = (grid.y_max - grid.y_min) / static_cast<double>(grid.y_steps);
  std::vector<GridPoint> pts;
  pts.reserve(grid.x_steps * grid.y_steps);
  for (std::size_t row = 0; row < grid.y_steps; ++row)
    for (std::size_t col = 0; col < grid.x_steps; ++col)
      pts.push_back({grid.x_min + (static_cast<double>(col) + 0.5) * dx,
                     grid.y_min + (static_cast<double>(row) + 0.5) * dy});
  return pts;
}

std::optional<std::size_t> grid_cell_of(const GeoGrid& grid, double x,
                                        double y) {
  if (x < grid.x_min || x > grid.x_max || y < grid.y_min || y > grid.y_max)
    return std::nullopt;
  double dx = (grid.x_max - grid.x_min) / static_cast<double>(grid.x_steps);
  double dy = (grid.y_max - grid.y_min) / static_cast<double>(grid.y_steps);
  auto clamp_index = [](double v, double lo, double step, std::size_t n) {
    auto i = static_cast<std::size_t>((v - lo) / step);
    return std::min(i, n - 1);
  };
  std::size_t col = clamp_index(x, grid.x_min, dx, grid.x_steps);
  std::size_t row = clamp_index(y, grid.y_min, dy, grid.y_steps);
  return row * grid.x_steps + col;
}

GeoSummary geo_risk_summaries(std::span<const double> posterior,
                              std::span<const GridPoint> grid,
                              GridPoint true_location,
                              std::span<const GridPoint> record_locations) {
  if (grid.empty() || posterior.size() != grid.size())
    throw ConfigError("attribute_risk", "geo_risk_summaries",
                      "posterior and grid sizes differ or grid is empty");
  GeoSummary s;
  double best = kNegInf;
  for (double p : posterior) best = std::max(best, p);
  bool first = true;
  for (std::size_t g = 0; g < posterior.size(); ++g) {
    if (posterior[g] >= best - kTieTol) {
      if (first) {
        s.mode_index = g;
        first = false;
      } else {
        s.tie = true;
      }
    }
  }
  double mx = grid[s.mode_index].x - true_location.x;
  double my = grid[s.mode_index].y - true_location.y;
  double r1_sq = mx * mx + my * my;
  s.r1 = std::sqrt(r1_sq);
  for (const auto& loc : record_locations) {
    double ax = loc.x - true_location.x;
    double ay = loc.y - true_location.y;
    if (ax * ax + ay * ay <= r1_sq) ++s.r2;
  }
  return s;
}

MapSummary map_match_summaries(const std::vector<bool>& map_correct,
                               const std::vector<bool>& unique_pattern,
                               std::span<const double> mode_distance) {
  if (map_correct.size() != unique_pattern.size() ||
      map_correct.size() != mode_distance.size())
    throw ConfigError("attribute_risk", "map_match_summaries",
                      "input spans have different lengths");
  MapSummary s;
  if (map_correct.empty()) return s;
  std::size_t correct = 0, correct_unique = 0;
  double dist = 0.0;
  for (std::size_t i = 0; i < map_correct.size(); ++i) {
    if (map_correct[i]) {
      ++correct;
      if (unique_pattern[i]) ++correct_unique;
    }
    dist += mode_distance[i];
  }
  double n = static_cast<double>(map_correct.size());
  s.pct_map_correct = 100.0 * static_cast<double>(correct) / n;
  s.pct_map_correct_unique = 100.0 * static_cast<double>(correct_unique) / n;
  s.mean_mode_distance = dist / n;
  return s;
}

std::vector<bool> unique_patterns(const Dataset& data) {
  const Partition part = partition(data.schema());
  std::vector<std::string> keys(data.rows());
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    std::string key;
    for (std::size_t j : part.unsynthesized) {
      if (data.schema().variable(j).is_categorical()) {
        key += std::to_string(data.code(i, j));
      } else {
        double v = data.value(i, j);
        char buf[sizeof(double)];
        std::memcpy(buf, &v, sizeof(double));
        key.append(buf, sizeof(double));
      }
      key += '\x1f';
    }
    ++counts[key];
    keys[i] = std::move(key);
  }
  std::vector<bool> unique(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i)
    unique[i] = counts[keys[i]] == 1;
  return unique;
}

GeoRiskResult run_geo_risk(const SyntheticRelease& release, const Dataset& data,
                           const AttributeScenario& scenario,
                           const GeoGrid& grid,
                           std::span<const std::size_t> records,
                           unsigned jobs) {
  const Schema& schema = data.schema();
  const Partition part = partition(schema);
  if (part.synthesized.size() != 2)
    throw ConfigError("attribute_risk", "run_geo_risk",
                      "geographic mode needs exactly two synthesized "
                      "variables; schema has " +
                          std::to_string(part.synthesized.size()));
  for (std::size_t j : {grid.x_var, grid.y_var}) {
    if (j >= schema.size() || !schema.variable(j).synthesized ||
        schema.variable(j).is_categorical())
      throw ConfigError("attribute_risk", "run_geo_risk",
                        "grid coordinates must be continuous synthesized "
                        "variables");
  }
  if (grid.x_var == grid.y_var)
    throw ConfigError("attribute_risk", "run_geo_risk",
                      "grid coordinates must be two distinct variables");

  const std::size_t x_pos = part.synthesized[0] == grid.x_var ? 0 : 1;
  const std::size_t y_pos = 1 - x_pos;
  if (part.synthesized[x_pos] != grid.x_var ||
      part.synthesized[y_pos] != grid.y_var)
    throw ConfigError("attribute_risk", "run_geo_risk",
                      "grid coordinates must be the two synthesized "
                      "variables");

  std::vector<GridPoint> pts = grid_points(grid);
  double dx = (grid.x_max - grid.x_min) / static_cast<double>(grid.x_steps);
  double dy = (grid.y_max - grid.y_min) / static_cast<double>(grid.y_steps);
  std::vector<double> bins(2, 0.0);
  bins[x_pos] = dx;
  bins[y_pos] = dy;

  std::vector<std::vector<Cell>> candidates(pts.size());
  for (std::size_t g = 0; g < pts.size(); ++g) {
    std::vector<Cell> c(2, Cell{0.0});
    c[x_pos] = pts[g].x;
    c[y_pos] = pts[g].y;
    candidates[g] = std::move(c);
  }

  std::vector<std::size_t> all;
  if (records.empty()) {
    all.resize(data.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    records = all;
  }
  for (std::size_t r : records)
    if (r >= data.rows())
      throw RangeError("attribute_risk", "run_geo_risk",
                       "record index " + std::to_string(r) + " out of range");

  std::vector<GridPoint> locations(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i)
    locations[i] = {data.value(i, grid.x_var), data.value(i, grid.y_var)};
  std::vector<bool> unique = unique_patterns(data);

  ReleaseDensityTable table =
      compute_release_density(release, data, bins, jobs);

  GeoRiskResult out;
  out.records.resize(records.size());
  parallel_for(records.size(), jobs == 0 ? default_jobs() : jobs,
               [&](std::size_t idx) {
                 std::size_t rec = records[idx];
                 std::vector<Cell> truth(2, Cell{0.0});
                 truth[x_pos] = locations[rec].x;
                 truth[y_pos] = locations[rec].y;
                 EngineOut res = engine(release, table, data, rec, candidates,
                                        truth, scenario, bins);
                 GeoSummary gs = geo_risk_summaries(res.posterior, pts,
                                                    locations[rec], locations);
                 GeoRecordRisk rr;
                 rr.record = rec;
                 rr.row_id = data.row_id(rec);
                 rr.r1 = gs.r1;
                 rr.r2 = gs.r2;
                 rr.tie = gs.tie;
                 rr.mode = pts[gs.mode_index];
                 rr.dropped_draws = res.dropped;
                 double best = kNegInf;
                 for (double p : res.posterior) best = std::max(best, p);
                 auto cell = grid_cell_of(grid, locations[rec].x,
                                          locations[rec].y);
                 rr.map_correct =
                     cell.has_value() && res.posterior[*cell] >= best - kTieTol;
                 out.records[idx] = std::move(rr);
               });
  std::vector<bool> correct(records.size());
  std::vector<bool> uniq(records.size());
  std::vector<double> dist(records.size());
  for (std::size_t idx = 0; idx < out.records.size(); ++idx) {
    const auto& r = out.records[idx];
    out.total_dropped_draws += r.dropped_draws;
    correct[idx] = r.map_correct;
    uniq[idx] = unique[r.record];
    dist[idx] = r.r1;
  }
  out.map_summary = map_match_summaries(correct, uniq, dist);
  return out;
}

}  // namespace synrisk
