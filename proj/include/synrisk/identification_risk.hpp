#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "synrisk/dataset.hpp"
#include "synrisk/release.hpp"
#include "synrisk/targets.hpp"

namespace synrisk {

// Matching rule for one continuous synthesized variable. absolute:
// |z - t| <= radius; relative: |z - t| <= radius * |t|. Every continuous
// synthesized intruder-known variable must have one; there is no default.
struct RadiusSpec {
  enum class Metric { absolute, relative };
  Metric metric = Metric::absolute;
  double radius = 0.0;
};

enum class PopulationSource { none, constant, table };

struct MatchConfig {
  // true: every target is assumed present in the release, matches split
  // 1/n_t. false: matches get 1/N_t and the remainder goes to "not in
  // release", which requires a population size per target.
  bool in_sample = true;
  PopulationSource population_source = PopulationSource::none;
  std::uint64_t population_constant = 0;
  std::map<std::int64_t, std::uint64_t> population_table;  // target_id -> N_t
  std::map<std::size_t, RadiusSpec> radius;  // schema index -> rule
  std::size_t iterations = 100;              // h
  // true: the intruder re-samples plausible originals from the retained
  // draws; false: they treat the releases' own synthesized columns as the
  // plausible draws.
  bool s_known = true;
};

// Throws ConfigError on any violation (bad radius, missing population
// source, missing radius for a continuous known synthesized variable, ...).
void validate_match_config(const MatchConfig& config, const Schema& schema);

// Per-target match probabilities, stored sparsely: rows lists the records
// that can match the target's un-synthesized constraints, probs aligns with
// it, and every unlisted record has probability exactly 0.
struct TargetMatch {
  std::int64_t target_id = 0;
  std::vector<std::size_t> rows;  // ascending 0-based row indexes
  std::vector<double> probs;
  double not_in_release = 0.0;  // mass on index n+1
  double max_prob = 0.0;        // maximum over records 1..n
  std::size_t c = 0;            // records attaining the maximum
  bool has_truth = false;       // true_row_id supplied
  bool t_bit = false;           // truth among the maximizers
  bool k_bit = false;           // c * T == 1
  bool f_bit = false;           // c * (1 - T) == 1
};

// Expands the sparse vector to indexes 1..n+1 (position n holds "not in
// release").
std::vector<double> dense_probabilities(const TargetMatch& t, std::size_t n);

struct RiskSummary {
  double expected_match_risk = 0.0;  // sum of T_i / c_i
  double true_match_rate = 0.0;      // sum of K_i over N
  double false_match_rate = 0.0;     // sum of F_i over s
  std::size_t unique_matches = 0;    // s = targets with c_i == 1
  bool false_rate_undefined = false; // s == 0; rate reported as 0
  std::size_t evaluated_targets = 0;
  std::size_t excluded_targets = 0;  // targets without true_row_id
};

struct MatchResult {
  std::vector<TargetMatch> targets;
  RiskSummary summary;
};

// One matching pass against fixed candidate originals. `originals` holds,
// per record, the values of the known synthesized variables in schema
// order. Un-synthesized known variables are compared exactly against the
// release values; synthesized ones against `originals` under the radius
// rules. Returns the dense vector over 1..n+1.
std::vector<double> match_given_originals(
    const Target& target, const Dataset& release_data,
    const std::vector<std::vector<Cell>>& originals, const MatchConfig& config);

// One draw of plausible original values for the known synthesized
// variables, per record. s_known = true samples from a uniformly chosen
// retained draw's posterior predictive; s_known = false copies the columns
// of a uniformly chosen release. `data` supplies the tree synthesizer's
// routing context and donor values.
std::vector<std::vector<Cell>> draw_plausible_originals(
    const SyntheticRelease& release, const Dataset& data, bool s_known,
    std::uint64_t seed);

// Averages match_given_originals over config.iterations independent draws,
// then derives c/T/K/F per target and the file summary. Deterministic for a
// fixed seed: iteration (target_id, iter) has its own derived sub-seed, and
// only records matching the target's un-synthesized constraints are ever
// sampled, which leaves the estimate's distribution unchanged.
MatchResult monte_carlo_identification(const TargetFile& targets,
                                       const SyntheticRelease& release,
                                       const Dataset& data,
                                       const MatchConfig& config,
                                       std::uint64_t seed, unsigned jobs = 0);

// File summaries from per-target bits; N is the evaluated-target count used
// as the true-match-rate denominator. Targets without truth contribute to
// nothing but excluded_targets.
RiskSummary summarize_risks(std::span<const TargetMatch> targets,
                            std::size_t N);

}  // namespace synrisk
