#include "synrisk/cart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "synrisk/error.hpp"

namespace synrisk {

namespace {

constexpr double kMinGain = 1e-12;

double predictor_value(const Dataset& data, std::size_t row, std::size_t var) {
  return data.schema().variable(var).is_categorical()
             ? static_cast<double>(data.code(row, var))
             : data.value(row, var);
}

// Candidate split chosen by exhaustive scan; ties resolved toward the
// lowest predictor index, then the lowest threshold.
struct BestSplit {
  bool found = false;
  std::size_t var = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

struct TargetView {
  bool categorical = false;
  std::size_t cardinality = 0;
  const Dataset* data = nullptr;
  std::size_t var = 0;

  double numeric(std::size_t row) const { return data->value(row, var); }
  std::size_t code(std::size_t row) const {
    return static_cast<std::size_t>(data->code(row, var));
  }
};

double gini_from_counts(std::span<const std::size_t> counts, double n) {
  double g = 1.0;
  for (std::size_t c : counts) {
    double f = static_cast<double>(c) / n;
    g -= f * f;
  }
  return g;
}

BestSplit find_best_split(const Dataset& data, const TargetView& target,
                          std::span<const std::size_t> predictors,
                          std::span<const std::size_t> rows,
                          std::size_t min_leaf) {
  BestSplit best;
  const std::size_t n = rows.size();
  if (n < 2 * min_leaf) return best;

  const double nn = static_cast<double>(n);
  double parent_impurity = 0.0;
  std::vector<std::size_t> total_counts;
  double total_sum = 0.0, total_sq = 0.0;
  if (target.categorical) {
    total_counts.assign(target.cardinality, 0);
    for (std::size_t r : rows) ++total_counts[target.code(r)];
    parent_impurity = gini_from_counts(total_counts, nn);
  } else {
    for (std::size_t r : rows) {
      double y = target.numeric(r);
      total_sum += y;
      total_sq += y * y;
    }
    parent_impurity = total_sq / nn - (total_sum / nn) * (total_sum / nn);
  }

  std::vector<std::pair<double, std::size_t>> ordered(n);
  std::vector<std::size_t> left_counts;
  for (std::size_t var : predictors) {
    for (std::size_t i = 0; i < n; ++i)
      ordered[i] = {predictor_value(data, rows[i], var), rows[i]};
    std::sort(ordered.begin(), ordered.end());
    if (ordered.front().first == ordered.back().first) continue;

    double left_sum = 0.0, left_sq = 0.0;
    if (target.categorical) left_counts.assign(target.cardinality, 0);

    for (std::size_t i = 0; i + 1 < n; ++i) {
      std::size_t r = ordered[i].second;
      if (target.categorical) {
        ++left_counts[target.code(r)];
      } else {
        double y = target.numeric(r);
        left_sum += y;
        left_sq += y * y;
      }
      if (ordered[i].first == ordered[i + 1].first) continue;
      std::size_t nl = i + 1, nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;

      double gain;
      const double dl = static_cast<double>(nl), dr = static_cast<double>(nr);
      if (target.categorical) {
        double gl = gini_from_counts(left_counts, dl);
        double gr;
        {
          double g = 1.0;
          for (std::size_t c = 0; c < target.cardinality; ++c) {
            double f = static_cast<double>(total_counts[c] - left_counts[c]) / dr;
            g -= f * f;
          }
          gr = g;
        }
        gain = parent_impurity - (dl / nn) * gl - (dr / nn) * gr;
      } else {
        double rs = total_sum - left_sum, rq = total_sq - left_sq;
        double vl = left_sq / dl - (left_sum / dl) * (left_sum / dl);
        double vr = rq / dr - (rs / dr) * (rs / dr);
        gain = parent_impurity - (dl / nn) * vl - (dr / nn) * vr;
      }
      if (gain > best.gain + kMinGain) {
        best.found = true;
        best.var = var;
        best.threshold = 0.5 * (ordered[i].first + ordered[i + 1].first);
        best.gain = gain;
      }
    }
  }
  if (best.gain <= kMinGain) best.found = false;
  return best;
}

void grow(const Dataset& data, const TargetView& target, CartTree& tree,
          std::size_t node_index, std::vector<std::size_t> rows,
          std::size_t min_leaf) {
  BestSplit split =
      find_best_split(data, target, tree.predictors, rows, min_leaf);
  if (!split.found) {
    tree.nodes[node_index].donors = std::move(rows);
    return;
  }
  std::vector<std::size_t> left_rows, right_rows;
  for (std::size_t r : rows) {
    if (predictor_value(data, r, split.var) <= split.threshold)
      left_rows.push_back(r);
    else
      right_rows.push_back(r);
  }
  tree.nodes[node_index].split_var = split.var;
  tree.nodes[node_index].threshold = split.threshold;
  std::int32_t left = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  std::int32_t right = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes[node_index].left = left;
  tree.nodes[node_index].right = right;
  grow(data, target, tree, static_cast<std::size_t>(left), std::move(left_rows),
       min_leaf);
  grow(data, target, tree, static_cast<std::size_t>(right),
       std::move(right_rows), min_leaf);
}

}  // namespace

CartModel fit_cart(const Dataset& data, const CartConfig& config) {
  const Schema& schema = data.schema();
  if (config.order.empty())
    throw ConfigError("synthesis", "fit_cart", "synthesis order is empty");
  if (config.min_leaf < 1 || config.min_leaf > data.rows())
    throw ConfigError("synthesis", "fit_cart",
                      "min_leaf must be in [1, n]; got " +
                          std::to_string(config.min_leaf) + " with n = " +
                          std::to_string(data.rows()));

  CartModel model;
  model.min_leaf = config.min_leaf;
  for (const auto& name : config.order) {
    std::size_t j = schema.index_of(name);
    if (!schema.variable(j).synthesized)
      throw ConfigError("synthesis", "fit_cart",
                        "variable '" + name + "' is not synthesized");
    if (std::find(model.order.begin(), model.order.end(), j) !=
        model.order.end())
      throw ConfigError("synthesis", "fit_cart",
                        "variable '" + name + "' repeated in order");
    model.order.push_back(j);
  }

  std::vector<std::size_t> base_predictors;
  for (std::size_t j = 0; j < schema.size(); ++j)
    if (!schema.variable(j).synthesized) base_predictors.push_back(j);

  std::vector<std::size_t> all_rows(data.rows());
  std::iota(all_rows.begin(), all_rows.end(), std::size_t{0});

  for (std::size_t k = 0; k < model.order.size(); ++k) {
    CartTree tree;
    tree.target = model.order[k];
    tree.predictors = base_predictors;
    tree.predictors.insert(tree.predictors.end(), model.order.begin(),
                           model.order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(tree.predictors.begin(), tree.predictors.end());

    TargetView target;
    target.data = &data;
    target.var = tree.target;
    target.categorical = schema.variable(tree.target).is_categorical();
    target.cardinality =
        target.categorical ? schema.variable(tree.target).cardinality() : 0;

    tree.nodes.emplace_back();
    if (tree.predictors.empty()) {
      tree.nodes[0].donors = all_rows;
    } else {
      grow(data, target, tree, 0, all_rows, config.min_leaf);
    }
    for (auto& node : tree.nodes)
      if (node.is_leaf())
        node.leaf_index = static_cast<std::int32_t>(tree.leaf_count++);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

const CartNode& route(const CartTree& tree, const ValueFn& value) {
  const CartNode* node = &tree.nodes[0];
  while (!node->is_leaf()) {
    node = value(node->split_var) <= node->threshold
               ? &tree.nodes[static_cast<std::size_t>(node->left)]
               : &tree.nodes[static_cast<std::size_t>(node->right)];
  }
  return *node;
}

CartDraw sample_cart_draw(const CartModel& model, Rng& rng) {
  CartDraw draw;
  draw.leaf_weights.resize(model.trees.size());
  std::vector<double> ones;
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const CartTree& tree = model.trees[t];
    draw.leaf_weights[t].resize(tree.leaf_count);
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) continue;
      ones.assign(node.donors.size(), 1.0);
      draw.leaf_weights[t][static_cast<std::size_t>(node.leaf_index)] =
          sample_dirichlet(ones, rng);
    }
  }
  return draw;
}

namespace {

// Routing context mixing un-synthesized values from the dataset with values
// synthesized so far in this record.
ValueFn make_context(const CartModel& model, const Dataset& data,
                     std::size_t row, const std::vector<Cell>& synthesized,
                     std::size_t stage) {
  return [&model, &data, row, &synthesized, stage](std::size_t var) -> double {
    for (std::size_t k = 0; k < stage; ++k) {
      if (model.order[k] == var) {
        const Cell& c = synthesized[k];
        return std::holds_alternative<std::int32_t>(c)
                   ? static_cast<double>(cell_code(c))
                   : cell_value(c);
      }
    }
    return predictor_value(data, row, var);
  };
}

}  // namespace

std::vector<Cell> cart_synthesize_record(const CartModel& model,
                                         const CartDraw& draw,
                                         const Dataset& data, std::size_t row,
                                         Rng& rng) {
  return cart_synthesize_prefix(model, draw, data, row, model.trees.size(),
                                rng);
}

std::vector<Cell> cart_synthesize_prefix(const CartModel& model,
                                         const CartDraw& draw,
                                         const Dataset& data, std::size_t row,
                                         std::size_t stages, Rng& rng) {
  std::vector<Cell> out;
  out.reserve(stages);
  for (std::size_t t = 0; t < stages && t < model.trees.size(); ++t) {
    const CartTree& tree = model.trees[t];
    const CartNode& leaf = route(tree, make_context(model, data, row, out, t));
    const auto& weights =
        draw.leaf_weights[t][static_cast<std::size_t>(leaf.leaf_index)];
    std::size_t pick = sample_index(weights, rng);
    std::size_t donor = leaf.donors[pick];
    out.push_back(data.cell(donor, tree.target));
  }
  return out;
}

double cart_log_density(const CartModel& model, const CartDraw& draw,
                        const Dataset& context, std::size_t row,
                        std::span<const Cell> values,
                        std::span<const double> bins) {
  double log_total = 0.0;
  std::vector<Cell> prefix;
  prefix.reserve(values.size());
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const CartTree& tree = model.trees[t];
    const CartNode& leaf =
        route(tree, make_context(model, context, row, prefix, t));
    const auto& weights =
        draw.leaf_weights[t][static_cast<std::size_t>(leaf.leaf_index)];
    double mass = 0.0;
    const Cell& want = values[t];
    if (std::holds_alternative<std::int32_t>(want)) {
      std::int32_t code = cell_code(want);
      for (std::size_t d = 0; d < leaf.donors.size(); ++d)
        if (context.code(leaf.donors[d], tree.target) == code) mass += weights[d];
    } else {
      double center = cell_value(want);
      double half = 0.5 * (t < bins.size() ? bins[t] : 0.0);
      for (std::size_t d = 0; d < leaf.donors.size(); ++d) {
        double v = context.value(leaf.donors[d], tree.target);
        if (std::abs(v - center) <= half) mass += weights[d];
      }
    }
    if (mass <= 0.0) return -std::numeric_limits<double>::infinity();
    log_total += std::log(mass);
    prefix.push_back(want);
  }
  return log_total;
}

}  // namespace synrisk
