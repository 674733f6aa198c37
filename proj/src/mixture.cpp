#include "synrisk/mixture.hpp"

#include <cmath>
#include <limits>

#include "synrisk/error.hpp"

namespace synrisk {

namespace {

// Synthesized variable indexes, all required categorical.
std::vector<std::size_t> synth_categorical(const Schema& schema,
                                           const char* op) {
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& v = schema.variable(j);
    if (!v.synthesized) continue;
    if (!v.is_categorical())
      throw SchemaError("synthesis", op,
                        "synthesized variable '" + v.name +
                            "' is continuous; the mixture synthesizer "
                            "supports categorical only");
    idx.push_back(j);
  }
  return idx;
}

}  // namespace

std::vector<MixtureDraw> fit_mixture(const Dataset& data,
                                     const GibbsConfig& config,
                                     std::uint64_t seed) {
  const Schema& schema = data.schema();
  auto synth = synth_categorical(schema, "fit_mixture");
  const std::size_t n = data.rows();
  const std::size_t C = config.classes;
  const std::size_t p = synth.size();
  if (n == 0)
    throw SchemaError("synthesis", "fit_mixture", "dataset has no rows");
  if (C < 1 || config.draws < 1 || config.thin < 1)
    throw ConfigError("synthesis", "fit_mixture",
                      "classes, draws and thin must all be >= 1");

  std::vector<std::size_t> card(p);
  for (std::size_t v = 0; v < p; ++v)
    card[v] = schema.variable(synth[v]).cardinality();

  // Codes in a flat row-major copy for cache-friendly sweeps.
  std::vector<std::int32_t> codes(n * p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t v = 0; v < p; ++v) codes[i * p + v] = data.code(i, synth[v]);

  Rng rng = make_rng(derive_seed(seed, 0x666974 /* "fit" */));

  std::vector<std::size_t> assign(n);
  {
    std::uniform_int_distribution<std::size_t> u(0, C - 1);
    for (auto& z : assign) z = u(rng);
  }

  MixtureDraw draw;
  draw.weights.assign(C, 1.0 / static_cast<double>(C));
  draw.probs.assign(C, {});
  for (std::size_t c = 0; c < C; ++c) {
    draw.probs[c].resize(p);
    for (std::size_t v = 0; v < p; ++v)
      draw.probs[c][v].assign(card[v], 1.0 / static_cast<double>(card[v]));
  }

  std::vector<double> class_alpha(C), class_prob(C);
  std::vector<double> level_alpha;

  auto sweep = [&] {
    // (1) weights | assignments: Dirichlet(1 + n_c).
    std::vector<std::size_t> counts(C, 0);
    for (std::size_t z : assign) ++counts[z];
    for (std::size_t c = 0; c < C; ++c)
      class_alpha[c] = 1.0 + static_cast<double>(counts[c]);
    draw.weights = sample_dirichlet(class_alpha, rng);

    // (2) per-class multinomials | assignments: Dirichlet(1 + counts).
    for (std::size_t v = 0; v < p; ++v) {
      std::vector<std::vector<std::size_t>> lv(C,
                                               std::vector<std::size_t>(card[v], 0));
      for (std::size_t i = 0; i < n; ++i)
        ++lv[assign[i]][static_cast<std::size_t>(codes[i * p + v])];
      for (std::size_t c = 0; c < C; ++c) {
        level_alpha.assign(card[v], 1.0);
        for (std::size_t k = 0; k < card[v]; ++k)
          level_alpha[k] += static_cast<double>(lv[c][k]);
        draw.probs[c][v] = sample_dirichlet(level_alpha, rng);
      }
    }

    // (3) assignments | parameters.
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < C; ++c) {
        double w = draw.weights[c];
        for (std::size_t v = 0; v < p; ++v)
          w *= draw.probs[c][v][static_cast<std::size_t>(codes[i * p + v])];
        class_prob[c] = w;
      }
      assign[i] = sample_index(class_prob, rng);
    }
  };

  for (std::size_t s = 0; s < config.burn_in; ++s) sweep();

  std::vector<MixtureDraw> draws;
  draws.reserve(config.draws);
  for (std::size_t h = 0; h < config.draws; ++h) {
    for (std::size_t s = 0; s < config.thin; ++s) sweep();
    draws.push_back(draw);
  }
  return draws;
}

double log_predictive_density(const MixtureDraw& draw,
                              std::span<const Cell> values) {
  return std::log(predictive_density(draw, values));
}

double predictive_density(const MixtureDraw& draw,
                          std::span<const Cell> values) {
  double total = 0.0;
  for (std::size_t c = 0; c < draw.classes(); ++c) {
    double term = draw.weights[c];
    for (std::size_t v = 0; v < values.size(); ++v)
      term *= draw.probs[c][v][static_cast<std::size_t>(cell_code(values[v]))];
    total += term;
  }
  return total;
}

double log_conditional_density(const MixtureDraw& draw,
                               std::span<const Cell> values,
                               const std::vector<bool>& known_mask) {
  // p(unknown | known) = p(all) / p(known); both are mixture sums with the
  // per-class product restricted to the respective coordinates.
  double joint = 0.0;
  double marginal = 0.0;
  for (std::size_t c = 0; c < draw.classes(); ++c) {
    double all = draw.weights[c];
    double known = draw.weights[c];
    for (std::size_t v = 0; v < values.size(); ++v) {
      double q = draw.probs[c][v][static_cast<std::size_t>(cell_code(values[v]))];
      all *= q;
      if (known_mask[v]) known *= q;
    }
    joint += all;
    marginal += known;
  }
  if (marginal <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(joint) - std::log(marginal);
}

std::vector<std::int32_t> sample_record(const MixtureDraw& draw, Rng& rng) {
  std::size_t c = sample_index(draw.weights, rng);
  std::vector<std::int32_t> out(draw.probs[c].size());
  for (std::size_t v = 0; v < out.size(); ++v)
    out[v] = static_cast<std::int32_t>(sample_index(draw.probs[c][v], rng));
  return out;
}

}  // namespace synrisk
