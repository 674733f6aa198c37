#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "synrisk/dataset.hpp"
#include "synrisk/rng.hpp"
#include "synrisk/schema.hpp"

namespace synrisk {

// One posterior draw of the latent-class synthesizer parameters: class
// weights over C components and, per class and synthesized categorical
// variable, a multinomial over its levels. Vectors sum to 1 within 1e-9.
struct MixtureDraw {
  std::vector<double> weights;  // size C
  // probs[c][v][k]: v indexes the synthesized variables in schema order.
  std::vector<std::vector<std::vector<double>>> probs;

  std::size_t classes() const { return weights.size(); }
};

struct GibbsConfig {
  std::size_t classes = 20;
  std::size_t burn_in = 500;
  std::size_t thin = 5;
  std::size_t draws = 100;  // H
};

// Gibbs sampler for the finite mixture of products of multinomials over the
// synthesized variables, symmetric Dirichlet(1) priors on the class weights
// and on every per-class multinomial. Returns H post-burn-in draws taken
// every `thin` sweeps.
std::vector<MixtureDraw> fit_mixture(const Dataset& data,
                                     const GibbsConfig& config,
                                     std::uint64_t seed);

// Joint predictive density of one value-vector over the synthesized
// variables: sum_c w_c prod_v P(level_v | c). `values` is aligned with the
// schema's synthesized variable list.
double predictive_density(const MixtureDraw& draw, std::span<const Cell> values);
double log_predictive_density(const MixtureDraw& draw,
                              std::span<const Cell> values);

// Conditional density of the unknown coordinates given the known ones,
// exact mixture conditioning: p(values restricted to !known_mask | values
// restricted to known_mask). known_mask is aligned with `values`.
double log_conditional_density(const MixtureDraw& draw,
                               std::span<const Cell> values,
                               const std::vector<bool>& known_mask);

// Sample one value-vector over the synthesized variables (class, then one
// level per variable).
std::vector<std::int32_t> sample_record(const MixtureDraw& draw, Rng& rng);

}  // namespace synrisk
