#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synrisk/dataset.hpp"
#include "synrisk/release.hpp"

namespace synrisk {

enum class GuessMode { neighborhood, explicit_list, full_enumeration };

// Candidate original values y* for one record, each a value-vector over the
// synthesized variables in schema order. The true record appears exactly
// once, at true_position.
struct GuessSet {
  std::size_t record = 0;  // 0-based row index
  std::vector<std::vector<Cell>> guesses;
  std::size_t true_position = 0;
  GuessMode mode = GuessMode::neighborhood;
};

struct GuessConfig {
  GuessMode mode = GuessMode::neighborhood;
  // Full enumeration refuses above this many cells.
  std::uint64_t full_cap = 1000000;
  std::vector<std::vector<Cell>> explicit_guesses;
};

// neighborhood: the true record plus every single-variable variant,
// size 1 + sum(K_j - 1). full_enumeration: all value combinations, size
// prod K_j, refused above the cap. explicit_list: the caller's guesses with
// the true record appended when absent.
GuessSet build_guess_set(const Dataset& data, std::size_t record,
                         const GuessConfig& config);

enum class Knowledge { worst_case, known_subset };

// What the intruder is assumed to hold: every other record's synthesized
// values (worst case), optionally plus a subset of the target's own values
// (known_subset). The prior is over the guess set; empty means uniform.
struct AttributeScenario {
  Knowledge knowledge = Knowledge::worst_case;
  std::vector<std::size_t> known_subset;  // schema indexes, synthesized only
  std::vector<double> prior;
  bool synthesizer_known = true;
};

// log p(Z_l | draw_h) for every release l and retained draw h. Independent
// of the record under assessment, so computed once per run and shared.
struct ReleaseDensityTable {
  std::vector<std::vector<double>> log_density;  // [release][draw]
};

// `bins` supplies a per-synthesized-variable bin width (schema order) for
// continuous densities under the tree synthesizer; ignored for categorical
// variables and for the mixture synthesizer.
ReleaseDensityTable compute_release_density(const SyntheticRelease& release,
                                            const Dataset& data,
                                            std::span<const double> bins,
                                            unsigned jobs = 0);

// r = f(guess | draw) / f(true_record | draw); known_subset scenarios use
// the conditional density of the unknown coordinates given the known ones.
// Value-vectors are over the synthesized variables in schema order.
// Throws when the denominator density is zero.
double importance_weight(const Schema& schema, const MixtureDraw& draw,
                         std::span<const Cell> guess,
                         std::span<const Cell> true_record,
                         const AttributeScenario& scenario);

// Posterior over the guess set by self-normalized importance sampling
// across the retained draws, multiplied over releases, in log space.
// Draws where the true record's density underflows are dropped (count
// reported via dropped_draws); more than half dropped is an error, as is a
// guess set whose every member has zero weight under every kept draw.
std::vector<double> posterior_over_guesses(const SyntheticRelease& release,
                                           const ReleaseDensityTable& table,
                                           const Dataset& data,
                                           const GuessSet& guess_set,
                                           const AttributeScenario& scenario,
                                           std::span<const double> bins = {},
                                           std::size_t* dropped_draws = nullptr);

struct RecordPosterior {
  std::size_t record = 0;
  std::int64_t row_id = 0;
  std::vector<double> posterior;
  std::size_t true_position = 0;
  std::size_t rank = 1;  // 1 = highest posterior; ties share the minimum
  double true_probability = 0.0;
  std::size_t dropped_draws = 0;
};

struct RankSummary {
  std::map<std::size_t, std::size_t> rank_counts;
  double mean_true_probability = 0.0;
  double median_true_probability = 0.0;
};

RankSummary rank_summary(std::span<const RecordPosterior> records);

struct AttributeRiskResult {
  std::vector<RecordPosterior> records;
  RankSummary summary;
  std::size_t total_dropped_draws = 0;
};

// Full per-record pipeline: density table once, then parallel over records.
// `records` holds 0-based row indexes; empty means all rows.
AttributeRiskResult run_attribute_risk(const SyntheticRelease& release,
                                       const Dataset& data,
                                       const AttributeScenario& scenario,
                                       const GuessConfig& guess_config,
                                       std::span<const std::size_t> records,
                                       unsigned jobs = 0);

// Uniform grid over a rectangle, used as the guess set when the synthesized
// variables are a pair of continuous coordinates. Guesses are cell centers,
// x fastest: index = row * x_steps + col. The cell edge doubles as the bin
// width for density evaluation.
struct GeoGrid {
  std::size_t x_var = 0;  // schema indexes of the coordinate variables
  std::size_t y_var = 0;
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
  std::size_t x_steps = 100;
  std::size_t y_steps = 100;
};

struct GridPoint {
  double x = 0.0;
  double y = 0.0;
};

std::vector<GridPoint> grid_points(const GeoGrid& grid);

// Grid index of the cell containing (x, y); nullopt outside the bounds.
std::optional<std::size_t> grid_cell_of(const GeoGrid& grid, double x, double y);

struct GeoSummary {
  double r1 = 0.0;        // distance from the modal guess to the truth
  std::uint64_t r2 = 0;   // records in the closed disc of radius r1 at truth
  std::size_t mode_index = 0;
  bool tie = false;       // posterior mode not unique; lowest index reported
};

GeoSummary geo_risk_summaries(std::span<const double> posterior,
                              std::span<const GridPoint> grid,
                              GridPoint true_location,
                              std::span<const GridPoint> record_locations);

struct MapSummary {
  double pct_map_correct = 0.0;         // truth attains the posterior max
  double pct_map_correct_unique = 0.0;  // ... and the record's pattern is unique
  double mean_mode_distance = 0.0;
};

// Percentages are over all records; unique_pattern marks records whose
// un-synthesized value combination no other record shares.
MapSummary map_match_summaries(const std::vector<bool>& map_correct,
                               const std::vector<bool>& unique_pattern,
                               std::span<const double> mode_distance);

// Flags records whose un-synthesized value combination is unshared.
std::vector<bool> unique_patterns(const Dataset& data);

struct GeoRecordRisk {
  std::size_t record = 0;
  std::int64_t row_id = 0;
  double r1 = 0.0;
  std::uint64_t r2 = 0;
  bool tie = false;
  bool map_correct = false;
  GridPoint mode;
  std::size_t dropped_draws = 0;
};

struct GeoRiskResult {
  std::vector<GeoRecordRisk> records;
  MapSummary map_summary;
  std::size_t total_dropped_draws = 0;
};

// Geographic pipeline: requires the synthesized variables to be exactly
// {grid.x_var, grid.y_var}, both continuous.
GeoRiskResult run_geo_risk(const SyntheticRelease& release, const Dataset& data,
                           const AttributeScenario& scenario,
                           const GeoGrid& grid,
                           std::span<const std::size_t> records,
                           unsigned jobs = 0);

}  // namespace synrisk
