#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "synrisk/dataset.hpp"
#include "synrisk/rng.hpp"
#include "synrisk/schema.hpp"

namespace synrisk {

// Binary tree node. Internal nodes test value(split_var) <= threshold
// (categorical predictors compare on their level code); leaves hold the
// confidential donor rows that reached them.
struct CartNode {
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::size_t split_var = 0;
  double threshold = 0.0;
  std::vector<std::size_t> donors;  // leaf only, never empty
  std::int32_t leaf_index = -1;     // dense index among leaves, -1 internal

  bool is_leaf() const { return left < 0; }
};

struct CartTree {
  std::size_t target = 0;                // schema index being synthesized
  std::vector<std::size_t> predictors;   // schema indexes usable for splits
  std::vector<CartNode> nodes;           // nodes[0] is the root
  std::size_t leaf_count = 0;
};

// Sequential CART synthesizer: tree k predicts order[k] from all
// un-synthesized variables plus order[0..k-1].
struct CartModel {
  std::vector<std::size_t> order;  // synthesized variables in synthesis order
  std::vector<CartTree> trees;
  std::size_t min_leaf = 5;
};

// One Bayesian-bootstrap snapshot: Dirichlet(1,...,1) weights over each
// leaf's donors, drawn once per release and retained as the Theta-like draw.
struct CartDraw {
  // weights[tree][leaf][donor position]
  std::vector<std::vector<std::vector<double>>> leaf_weights;
};

struct CartConfig {
  std::vector<std::string> order;  // synthesized variable names
  std::size_t min_leaf = 5;
};

CartModel fit_cart(const Dataset& data, const CartConfig& config);

// Reads a predictor value during routing; categorical values are the level
// code cast to double.
using ValueFn = std::function<double(std::size_t var)>;

// Leaf reached by routing a record down `tree`.
const CartNode& route(const CartTree& tree, const ValueFn& value);

CartDraw sample_cart_draw(const CartModel& model, Rng& rng);

// Synthesize the ordered variables for one record: route down each tree
// using un-synthesized values from `data` row `row` and already-synthesized
// values from earlier stages, then draw a donor by the snapshot weights.
std::vector<Cell> cart_synthesize_record(const CartModel& model,
                                         const CartDraw& draw,
                                         const Dataset& data, std::size_t row,
                                         Rng& rng);

// Same, but stops after the first `stages` trees (later stages depend on
// earlier ones, so a prefix is the cheapest self-contained draw).
std::vector<Cell> cart_synthesize_prefix(const CartModel& model,
                                         const CartDraw& draw,
                                         const Dataset& data, std::size_t row,
                                         std::size_t stages, Rng& rng);

// Log density of a value-vector over the model's ordered variables, under a
// snapshot, with routing context taken from `context` row `row` for
// un-synthesized predictors. Continuous stages use a bin of width
// `bins[stage]` centered at the guessed value (donor mass inside the bin);
// categorical stages match donor codes exactly. Returns -inf off support.
double cart_log_density(const CartModel& model, const CartDraw& draw,
                        const Dataset& context, std::size_t row,
                        std::span<const Cell> values,
                        std::span<const double> bins);

}  // namespace synrisk
