#include "synrisk/identification_risk.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <unordered_map>

#include "synrisk/error.hpp"
#include "synrisk/parallel.hpp"

namespace synrisk {

namespace {

constexpr double kTieTol = 1e-12;

void append_key(std::string& key, const Cell& value) {
  if (std::holds_alternative<std::int32_t>(value)) {
    key += std::to_string(cell_code(value));
  } else {
    double v = cell_value(value);
    char buf[sizeof(double)];
    std::memcpy(buf, &v, sizeof(double));
    key.append(buf, sizeof(double));
  }
  key += '\x1f';
}

bool cell_exact_equal(const Cell& a, const Cell& b) {
  if (a.index() != b.index()) return false;
  return std::holds_alternative<std::int32_t>(a)
             ? cell_code(a) == cell_code(b)
             : cell_value(a) == cell_value(b);
}

bool synth_matches(const Schema& schema, std::size_t var, const Cell& candidate,
                   const Cell& t, const MatchConfig& config) {
  if (schema.variable(var).is_categorical())
    return cell_code(candidate) == cell_code(t);
  const RadiusSpec& spec = config.radius.at(var);
  double bound = spec.metric == RadiusSpec::Metric::absolute
                     ? spec.radius
                     : spec.radius * std::abs(cell_value(t));
  return std::abs(cell_value(candidate) - cell_value(t)) <= bound;
}

std::uint64_t resolve_population(const Target& target,
                                 const MatchConfig& config) {
  std::uint64_t n_pop = 0;
  if (config.population_source == PopulationSource::constant) {
    n_pop = config.population_constant;
  } else {
    auto it = config.population_table.find(target.target_id);
    if (it == config.population_table.end())
      throw ConfigError("identification_risk", "match_given_originals",
                        "no population count for target " +
                            std::to_string(target.target_id));
    n_pop = it->second;
  }
  if (n_pop == 0)
    throw ConfigError("identification_risk", "match_given_originals",
                      "population count for target " +
                          std::to_string(target.target_id) + " is zero");
  return n_pop;
}

[[noreturn]] void throw_population_inconsistent(std::int64_t target_id,
                                                std::size_t n_t,
                                                std::uint64_t n_pop) {
  throw RangeError("identification_risk", "match_given_originals",
                   "target " + std::to_string(target_id) + " matches " +
                       std::to_string(n_t) +
                       " records, more than its population count " +
                       std::to_string(n_pop));
}

// Split of one target's constraints by synthesized / un-synthesized side.
struct TargetPlan {
  std::vector<std::pair<std::size_t, Cell>> unsynth;  // exact matching
  std::vector<std::pair<std::size_t, Cell>> synth;    // radius matching
};

TargetPlan plan_target(const Target& target, const Schema& schema) {
  TargetPlan plan;
  for (const auto& [var, value] : target.known_values) {
    if (schema.variable(var).synthesized)
      plan.synth.emplace_back(var, value);
    else
      plan.unsynth.emplace_back(var, value);
  }
  return plan;
}

}  // namespace

void validate_match_config(const MatchConfig& config, const Schema& schema) {
  if (config.iterations < 1)
    throw ConfigError("identification_risk", "validate_match_config",
                      "iterations must be >= 1");
  if (!config.in_sample && config.population_source == PopulationSource::none)
    throw ConfigError("identification_risk", "validate_match_config",
                      "population mode needs a population size source");
  if (config.in_sample && config.population_source != PopulationSource::none)
    throw ConfigError("identification_risk", "validate_match_config",
                      "in-sample mode does not take a population source");
  if (config.population_source == PopulationSource::constant &&
      config.population_constant == 0)
    throw ConfigError("identification_risk", "validate_match_config",
                      "population constant must be >= 1");
  for (const auto& [var, spec] : config.radius) {
    if (var >= schema.size())
      throw ConfigError("identification_risk", "validate_match_config",
                        "radius rule for unknown variable index " +
                            std::to_string(var));
    const auto& def = schema.variable(var);
    if (def.is_categorical() || !def.synthesized)
      throw ConfigError("identification_risk", "validate_match_config",
                        "radius rule for '" + def.name +
                            "', which is not a continuous synthesized "
                            "variable");
    if (!(spec.radius > 0.0))
      throw ConfigError("identification_risk", "validate_match_config",
                        "radius for '" + def.name + "' must be > 0");
  }
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& def = schema.variable(j);
    if (def.synthesized && def.intruder_known && !def.is_categorical() &&
        config.radius.find(j) == config.radius.end())
      throw ConfigError("identification_risk", "validate_match_config",
                        "continuous synthesized variable '" + def.name +
                            "' is intruder-known but has no radius rule");
  }
}

std::vector<double> dense_probabilities(const TargetMatch& t, std::size_t n) {
  std::vector<double> out(n + 1, 0.0);
  for (std::size_t k = 0; k < t.rows.size(); ++k) out[t.rows[k]] = t.probs[k];
  out[n] = t.not_in_release;
  return out;
}

std::vector<double> match_given_originals(
    const Target& target, const Dataset& release_data,
    const std::vector<std::vector<Cell>>& originals,
    const MatchConfig& config) {
  const Schema& schema = release_data.schema();
  const Partition part = partition(schema);
  const std::size_t n = release_data.rows();
  if (originals.size() != n)
    throw ConfigError("identification_risk", "match_given_originals",
                      "originals hold " + std::to_string(originals.size()) +
                          " records for " + std::to_string(n) + " rows");
  const TargetPlan plan = plan_target(target, schema);

  std::vector<std::size_t> matches;
  for (std::size_t i = 0; i < n; ++i) {
    bool ok = true;
    for (const auto& [var, value] : plan.unsynth)
      if (!cell_exact_equal(release_data.cell(i, var), value)) {
        ok = false;
        break;
      }
    if (!ok) continue;
    for (const auto& [var, value] : plan.synth) {
      auto it = std::find(part.known_synthesized.begin(),
                          part.known_synthesized.end(), var);
      std::size_t pos =
          static_cast<std::size_t>(it - part.known_synthesized.begin());
      if (!synth_matches(schema, var, originals[i][pos], value, config)) {
        ok = false;
        break;
      }
    }
    if (ok) matches.push_back(i);
  }

  std::vector<double> out(n + 1, 0.0);
  const std::size_t n_t = matches.size();
  if (config.in_sample) {
    if (n_t == 0) {
      out[n] = 1.0;
    } else {
      for (std::size_t i : matches) out[i] = 1.0 / static_cast<double>(n_t);
    }
  } else {
    std::uint64_t n_pop = resolve_population(target, config);
    if (n_t > n_pop)
      throw_population_inconsistent(target.target_id, n_t, n_pop);
    for (std::size_t i : matches) out[i] = 1.0 / static_cast<double>(n_pop);
    out[n] = static_cast<double>(n_pop - n_t) / static_cast<double>(n_pop);
  }
  return out;
}

std::vector<std::vector<Cell>> draw_plausible_originals(
    const SyntheticRelease& release, const Dataset& data, bool s_known,
    std::uint64_t seed) {
  const Partition part = partition(data.schema());
  const std::size_t n = data.rows();
  Rng rng = make_rng(seed);
  std::vector<std::vector<Cell>> out(n);

  if (!s_known) {
    std::uniform_int_distribution<std::size_t> pick(0,
                                                    release.releases() - 1);
    const Dataset& z = release.datasets[pick(rng)];
    for (std::size_t i = 0; i < n; ++i)
      out[i] = z.gather(i, part.known_synthesized);
    return out;
  }

  std::uniform_int_distribution<std::size_t> pick(0, release.draw_count() - 1);
  const std::size_t h = pick(rng);
  if (release.is_mixture()) {
    const MixtureDraw& draw = release.mixture_draws()[h];
    // Positions of the known variables within the synthesized list.
    std::vector<std::size_t> pos;
    for (std::size_t var : part.known_synthesized) {
      auto it = std::find(part.synthesized.begin(), part.synthesized.end(), var);
      pos.push_back(static_cast<std::size_t>(it - part.synthesized.begin()));
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::int32_t> rec = sample_record(draw, rng);
      std::vector<Cell> vals;
      vals.reserve(pos.size());
      for (std::size_t p : pos) vals.emplace_back(rec[p]);
      out[i] = std::move(vals);
    }
    return out;
  }

  const CartDrawSet& cd = release.cart_draws();
  std::vector<std::size_t> stage;
  std::size_t last = 0;
  for (std::size_t var : part.known_synthesized) {
    auto it = std::find(cd.model.order.begin(), cd.model.order.end(), var);
    if (it == cd.model.order.end())
      throw SchemaError("identification_risk", "draw_plausible_originals",
                        "tree model does not synthesize a known variable");
    stage.push_back(static_cast<std::size_t>(it - cd.model.order.begin()));
    last = std::max(last, stage.back() + 1);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Cell> rec =
        cart_synthesize_prefix(cd.model, cd.draws[h], data, i, last, rng);
    std::vector<Cell> vals;
    vals.reserve(stage.size());
    for (std::size_t s : stage) vals.push_back(rec[s]);
    out[i] = std::move(vals);
  }
  return out;
}

namespace {

// Per-target constraint view resolved to sampling positions.
struct SynthConstraint {
  std::size_t var = 0;        // schema index
  std::size_t synth_pos = 0;  // position among synthesized variables
  std::size_t stage = 0;      // tree stage (tree synthesizer only)
  Cell value;
};

struct PreparedTarget {
  const Target* target = nullptr;
  const std::vector<std::size_t>* bucket = nullptr;  // candidate rows
  std::vector<SynthConstraint> synth;
  std::uint64_t population = 0;  // population mode only
};

const std::vector<std::size_t> kEmptyBucket;

}  // namespace

MatchResult monte_carlo_identification(const TargetFile& targets,
                                       const SyntheticRelease& release,
                                       const Dataset& data,
                                       const MatchConfig& config,
                                       std::uint64_t seed, unsigned jobs) {
  const Schema& schema = data.schema();
  const Partition part = partition(schema);
  validate_match_config(config, schema);
  const std::size_t n = data.rows();
  const std::size_t draws =
      config.s_known ? release.draw_count() : release.releases();
  if (draws == 0)
    throw ConfigError("identification_risk", "monte_carlo_identification",
                      "release has no draws to sample from");

  for (const auto& t : targets.targets())
    if (t.true_row_id &&
        (*t.true_row_id < 1 || *t.true_row_id > static_cast<std::int64_t>(n)))
      throw RangeError("identification_risk", "monte_carlo_identification",
                       "target " + std::to_string(t.target_id) +
                           " has true_row_id " +
                           std::to_string(*t.true_row_id) +
                           " outside 1.." + std::to_string(n));

  // Candidate rows per target: only records agreeing with the target on
  // every constrained un-synthesized variable can ever match, so buckets
  // are built once per distinct constrained-variable set and the Monte
  // Carlo loop samples synthesized values for bucket rows only.
  const Dataset& unsynth_source = release.datasets.front();
  std::map<std::vector<std::size_t>,
           std::unordered_map<std::string, std::vector<std::size_t>>>
      buckets;
  std::vector<PreparedTarget> prepared(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Target& target = targets.targets()[t];
    PreparedTarget& pt = prepared[t];
    pt.target = &target;
    TargetPlan plan = plan_target(target, schema);
    std::sort(plan.unsynth.begin(), plan.unsynth.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::size_t> sig;
    for (const auto& [var, value] : plan.unsynth) sig.push_back(var);
    auto [it, fresh] = buckets.try_emplace(sig);
    if (fresh) {
      auto& by_key = it->second;
      std::string key;
      for (std::size_t i = 0; i < n; ++i) {
        key.clear();
        for (std::size_t var : sig)
          append_key(key, unsynth_source.cell(i, var));
        by_key[key].push_back(i);
      }
    }
    std::string key;
    for (const auto& [var, value] : plan.unsynth) append_key(key, value);
    auto rows = it->second.find(key);
    pt.bucket = rows == it->second.end() ? &kEmptyBucket : &rows->second;

    for (const auto& [var, value] : plan.synth) {
      SynthConstraint c;
      c.var = var;
      c.value = value;
      auto sp = std::find(part.synthesized.begin(), part.synthesized.end(), var);
      c.synth_pos = static_cast<std::size_t>(sp - part.synthesized.begin());
      if (!release.is_mixture()) {
        const auto& order = release.cart_draws().model.order;
        auto st = std::find(order.begin(), order.end(), var);
        if (st == order.end())
          throw SchemaError("identification_risk",
                            "monte_carlo_identification",
                            "tree model does not synthesize known variable '" +
                                schema.variable(var).name + "'");
        c.stage = static_cast<std::size_t>(st - order.begin());
      }
      pt.synth.push_back(std::move(c));
    }
    if (!config.in_sample) pt.population = resolve_population(target, config);
  }

  MatchResult out;
  out.targets.resize(targets.size());
  const double h_total = static_cast<double>(config.iterations);
  parallel_for(targets.size(), jobs == 0 ? default_jobs() : jobs,
               [&](std::size_t t) {
    const PreparedTarget& pt = prepared[t];
    const Target& target = *pt.target;
    const std::vector<std::size_t>& bucket = *pt.bucket;
    std::size_t max_stage = 0;
    for (const auto& c : pt.synth) max_stage = std::max(max_stage, c.stage + 1);

    std::vector<double> probs(bucket.size(), 0.0);
    double nir = 0.0;
    std::vector<std::size_t> matched;
    matched.reserve(bucket.size());
    std::vector<Cell> sampled(pt.synth.size(), Cell{std::int32_t{0}});

    for (std::size_t iter = 0; iter < config.iterations; ++iter) {
      Rng rng = make_rng(derive_seed(
          seed, static_cast<std::uint64_t>(target.target_id), iter));
      std::uniform_int_distribution<std::size_t> pick(0, draws - 1);
      const std::size_t d = pick(rng);
      matched.clear();

      for (std::size_t b = 0; b < bucket.size(); ++b) {
        const std::size_t row = bucket[b];
        if (!pt.synth.empty()) {
          if (!config.s_known) {
            const Dataset& z = release.datasets[d];
            for (std::size_t k = 0; k < pt.synth.size(); ++k)
              sampled[k] = z.cell(row, pt.synth[k].var);
          } else if (release.is_mixture()) {
            const MixtureDraw& draw = release.mixture_draws()[d];
            std::size_t cls = sample_index(draw.weights, rng);
            for (std::size_t k = 0; k < pt.synth.size(); ++k)
              sampled[k] = static_cast<std::int32_t>(sample_index(
                  draw.probs[cls][pt.synth[k].synth_pos], rng));
          } else {
            const CartDrawSet& cd = release.cart_draws();
            std::vector<Cell> rec = cart_synthesize_prefix(
                cd.model, cd.draws[d], data, row, max_stage, rng);
            for (std::size_t k = 0; k < pt.synth.size(); ++k)
              sampled[k] = rec[pt.synth[k].stage];
          }
        }
        bool ok = true;
        for (std::size_t k = 0; k < pt.synth.size(); ++k)
          if (!synth_matches(schema, pt.synth[k].var, sampled[k],
                             pt.synth[k].value, config)) {
            ok = false;
            break;
          }
        if (ok) matched.push_back(b);
      }

      const std::size_t n_t = matched.size();
      if (config.in_sample) {
        if (n_t == 0) {
          nir += 1.0;
        } else {
          double share = 1.0 / static_cast<double>(n_t);
          for (std::size_t b : matched) probs[b] += share;
        }
      } else {
        if (n_t > pt.population)
          throw_population_inconsistent(target.target_id, n_t, pt.population);
        double share = 1.0 / static_cast<double>(pt.population);
        for (std::size_t b : matched) probs[b] += share;
        nir += static_cast<double>(pt.population - n_t) /
               static_cast<double>(pt.population);
      }
    }

    TargetMatch tm;
    tm.target_id = target.target_id;
    tm.rows = bucket;
    tm.probs = std::move(probs);
    for (double& p : tm.probs) p /= h_total;
    tm.not_in_release = nir / h_total;

    for (double p : tm.probs) tm.max_prob = std::max(tm.max_prob, p);
    if (tm.max_prob > kTieTol) {
      for (double p : tm.probs)
        if (p >= tm.max_prob - kTieTol) ++tm.c;
    } else {
      // Every record trivially attains a zero maximum.
      tm.c = n;
    }
    tm.has_truth = target.true_row_id.has_value();
    if (tm.has_truth) {
      const std::size_t truth =
          static_cast<std::size_t>(*target.true_row_id - 1);
      double p_truth = 0.0;
      auto it = std::lower_bound(tm.rows.begin(), tm.rows.end(), truth);
      if (it != tm.rows.end() && *it == truth)
        p_truth = tm.probs[static_cast<std::size_t>(it - tm.rows.begin())];
      tm.t_bit = p_truth >= tm.max_prob - kTieTol;
      tm.k_bit = tm.c == 1 && tm.t_bit;
      tm.f_bit = tm.c == 1 && !tm.t_bit;
    }
    out.targets[t] = std::move(tm);
  });

  std::size_t evaluated = 0;
  for (const auto& tm : out.targets)
    if (tm.has_truth) ++evaluated;
  out.summary = summarize_risks(out.targets, evaluated);
  return out;
}

RiskSummary summarize_risks(std::span<const TargetMatch> targets,
                            std::size_t N) {
  RiskSummary s;
  s.evaluated_targets = N;
  for (const auto& tm : targets) {
    if (!tm.has_truth) {
      ++s.excluded_targets;
      continue;
    }
    if (tm.t_bit) s.expected_match_risk += 1.0 / static_cast<double>(tm.c);
    if (tm.c == 1) ++s.unique_matches;
    if (tm.k_bit) s.true_match_rate += 1.0;
    if (tm.f_bit) s.false_match_rate += 1.0;
  }
  if (N > 0) s.true_match_rate /= static_cast<double>(N);
  if (s.unique_matches > 0) {
    s.false_match_rate /= static_cast<double>(s.unique_matches);
  } else {
    s.false_match_rate = 0.0;
    s.false_rate_undefined = true;
  }
  return s;
}

}  // namespace synrisk
