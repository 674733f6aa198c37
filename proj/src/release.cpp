#include "synrisk/release.hpp"

#include <fstream>
#include <utility>

#include "synrisk/error.hpp"
#include "synrisk/parallel.hpp"

namespace synrisk {

namespace {

constexpr int kManifestVersion = 1;
constexpr int kDrawsVersion = 1;

std::vector<Dataset::Column> copy_columns(const Dataset& data) {
  std::vector<Dataset::Column> cols;
  cols.reserve(data.schema().size());
  for (std::size_t j = 0; j < data.schema().size(); ++j)
    cols.push_back(data.column(j));
  return cols;
}

}  // namespace

SyntheticRelease generate_mixture_release(std::vector<MixtureDraw> draws,
                                          const Dataset& data, std::size_t m,
                                          std::uint64_t seed, unsigned jobs) {
  if (draws.empty())
    throw ConfigError("synthesis", "generate_mixture_release",
                      "no retained draws");
  if (m < 1)
    throw ConfigError("synthesis", "generate_mixture_release", "m must be >= 1");
  const Schema& schema = data.schema();
  const Partition part = partition(schema);
  for (std::size_t j : part.synthesized)
    if (!schema.variable(j).is_categorical())
      throw SchemaError("synthesis", "generate_mixture_release",
                        "synthesized variable '" + schema.variable(j).name +
                            "' is continuous; the mixture synthesizer is "
                            "categorical-only");

  SyntheticRelease out;
  out.provenance.synthesizer = "mixture";
  out.provenance.seed = seed;
  out.provenance.hyperparams = {{"m", m}, {"draw_count", draws.size()}};

  const std::size_t n = data.rows();
  std::vector<std::vector<Dataset::Column>> release_cols(m);
  parallel_for(m, jobs == 0 ? default_jobs() : jobs, [&](std::size_t l) {
    Rng rng = make_rng(derive_seed(seed, l));
    const MixtureDraw& draw = draws[l % draws.size()];
    auto cols = copy_columns(data);
    std::vector<std::vector<std::int32_t>> synth(part.synthesized.size());
    for (auto& col : synth) col.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::int32_t> rec = sample_record(draw, rng);
      for (std::size_t v = 0; v < rec.size(); ++v) synth[v][i] = rec[v];
    }
    for (std::size_t v = 0; v < part.synthesized.size(); ++v)
      cols[part.synthesized[v]] = std::move(synth[v]);
    release_cols[l] = std::move(cols);
  });

  out.datasets.reserve(m);
  for (std::size_t l = 0; l < m; ++l)
    out.datasets.emplace_back(data.schema_ptr(), std::move(release_cols[l]));
  out.draws = std::move(draws);
  return out;
}

SyntheticRelease cart_generate(const CartModel& model, const Dataset& data,
                               std::size_t m, std::uint64_t seed,
                               unsigned jobs) {
  if (m < 1) throw ConfigError("synthesis", "cart_generate", "m must be >= 1");
  if (model.trees.empty())
    throw ConfigError("synthesis", "cart_generate", "model has no trees");

  const Schema& schema = data.schema();
  const std::size_t n = data.rows();

  SyntheticRelease out;
  out.provenance.synthesizer = "cart";
  out.provenance.seed = seed;
  out.provenance.hyperparams = {{"m", m}, {"min_leaf", model.min_leaf}};

  std::vector<std::vector<Dataset::Column>> release_cols(m);
  std::vector<CartDraw> snapshots(m);
  parallel_for(m, jobs == 0 ? default_jobs() : jobs, [&](std::size_t l) {
    Rng rng = make_rng(derive_seed(seed, l));
    CartDraw snapshot = sample_cart_draw(model, rng);
    auto cols = copy_columns(data);
    // Staged columns in synthesis order; written back to schema positions
    // after the release is fully sampled.
    std::vector<Dataset::Column> synth(model.order.size());
    for (std::size_t k = 0; k < model.order.size(); ++k) {
      if (schema.variable(model.order[k]).is_categorical())
        synth[k] = Dataset::CatColumn(n);
      else
        synth[k] = Dataset::NumColumn(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<Cell> rec = cart_synthesize_record(model, snapshot, data, i, rng);
      for (std::size_t k = 0; k < rec.size(); ++k) {
        if (std::holds_alternative<std::int32_t>(rec[k]))
          std::get<Dataset::CatColumn>(synth[k])[i] = cell_code(rec[k]);
        else
          std::get<Dataset::NumColumn>(synth[k])[i] = cell_value(rec[k]);
      }
    }
    for (std::size_t k = 0; k < model.order.size(); ++k)
      cols[model.order[k]] = std::move(synth[k]);
    release_cols[l] = std::move(cols);
    snapshots[l] = std::move(snapshot);
  });

  out.datasets.reserve(m);
  for (std::size_t l = 0; l < m; ++l)
    out.datasets.emplace_back(data.schema_ptr(), std::move(release_cols[l]));
  out.draws = CartDrawSet{model, std::move(snapshots)};
  return out;
}

namespace {

nlohmann::json mixture_draw_to_json(const MixtureDraw& d) {
  return {{"weights", d.weights}, {"probs", d.probs}};
}

MixtureDraw mixture_draw_from_json(const nlohmann::json& j) {
  MixtureDraw d;
  d.weights = j.at("weights").get<std::vector<double>>();
  d.probs =
      j.at("probs").get<std::vector<std::vector<std::vector<double>>>>();
  return d;
}

nlohmann::json cart_model_to_json(const CartModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& node : tree.nodes) {
      nodes.push_back({{"left", node.left},
                       {"right", node.right},
                       {"split_var", node.split_var},
                       {"threshold", node.threshold},
                       {"leaf_index", node.leaf_index},
                       {"donors", node.donors}});
    }
    trees.push_back({{"target", tree.target},
                     {"predictors", tree.predictors},
                     {"leaf_count", tree.leaf_count},
                     {"nodes", std::move(nodes)}});
  }
  return {{"order", model.order},
          {"min_leaf", model.min_leaf},
          {"trees", std::move(trees)}};
}

CartModel cart_model_from_json(const nlohmann::json& j) {
  CartModel model;
  model.order = j.at("order").get<std::vector<std::size_t>>();
  model.min_leaf = j.at("min_leaf").get<std::size_t>();
  for (const auto& jt : j.at("trees")) {
    CartTree tree;
    tree.target = jt.at("target").get<std::size_t>();
    tree.predictors = jt.at("predictors").get<std::vector<std::size_t>>();
    tree.leaf_count = jt.at("leaf_count").get<std::size_t>();
    for (const auto& jn : jt.at("nodes")) {
      CartNode node;
      node.left = jn.at("left").get<std::int32_t>();
      node.right = jn.at("right").get<std::int32_t>();
      node.split_var = jn.at("split_var").get<std::size_t>();
      node.threshold = jn.at("threshold").get<double>();
      node.leaf_index = jn.at("leaf_index").get<std::int32_t>();
      node.donors = jn.at("donors").get<std::vector<std::size_t>>();
      tree.nodes.push_back(std::move(node));
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

nlohmann::json load_json_file(const std::filesystem::path& path,
                              const char* operation) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("synthesis", operation,
                     "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("synthesis", operation,
                     path.string() + ": " + e.what());
  }
  return j;
}

void check_format(const nlohmann::json& j, const std::string& expect_format,
                  int expect_version, const std::filesystem::path& path,
                  const char* operation) {
  if (j.value("format", std::string()) != expect_format)
    throw ParseError("synthesis", operation,
                     path.string() + ": expected format '" + expect_format +
                         "'");
  if (j.value("version", 0) != expect_version)
    throw ParseError("synthesis", operation,
                     path.string() + ": unsupported version " +
                         j.value("version", nlohmann::json()).dump());
}

}  // namespace

std::filesystem::path write_release(const SyntheticRelease& release,
                                    const std::filesystem::path& dir,
                                    const std::string& name) {
  std::filesystem::create_directories(dir);

  std::vector<std::string> csv_names;
  for (std::size_t l = 0; l < release.datasets.size(); ++l) {
    std::string csv = name + "_release_" + std::to_string(l + 1) + ".csv";
    write_dataset(release.datasets[l], dir / csv);
    csv_names.push_back(std::move(csv));
  }

  nlohmann::json draws_json = {{"format", "synthesizer-draws"},
                               {"version", kDrawsVersion},
                               {"synthesizer", release.provenance.synthesizer}};
  if (release.is_mixture()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : release.mixture_draws())
      arr.push_back(mixture_draw_to_json(d));
    draws_json["draws"] = std::move(arr);
  } else {
    const CartDrawSet& cd = release.cart_draws();
    draws_json["model"] = cart_model_to_json(cd.model);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& d : cd.draws)
      arr.push_back({{"leaf_weights", d.leaf_weights}});
    draws_json["draws"] = std::move(arr);
  }
  std::string draws_name = name + "_draws.json";
  {
    std::ofstream out(dir / draws_name);
    out << draws_json.dump(2) << '\n';
  }

  nlohmann::json manifest = {{"format", "synthetic-release"},
                             {"version", kManifestVersion},
                             {"synthesizer", release.provenance.synthesizer},
                             {"seed", release.provenance.seed},
                             {"hyperparams", release.provenance.hyperparams},
                             {"releases", csv_names},
                             {"draws", draws_name}};
  std::filesystem::path manifest_path = dir / (name + ".json");
  {
    std::ofstream out(manifest_path);
    out << manifest.dump(2) << '\n';
  }
  return manifest_path;
}

SyntheticRelease load_release(const std::filesystem::path& manifest_path,
                              std::shared_ptr<const Schema> schema) {
  nlohmann::json manifest = load_json_file(manifest_path, "load_release");
  check_format(manifest, "synthetic-release", kManifestVersion, manifest_path,
               "load_release");
  const std::filesystem::path dir = manifest_path.parent_path();

  SyntheticRelease out;
  out.provenance.synthesizer = manifest.at("synthesizer").get<std::string>();
  out.provenance.seed = manifest.value("seed", std::uint64_t{0});
  out.provenance.hyperparams =
      manifest.value("hyperparams", nlohmann::json::object());

  for (const auto& rel : manifest.at("releases"))
    out.datasets.push_back(load_dataset(dir / rel.get<std::string>(), schema));
  if (out.datasets.empty())
    throw ParseError("synthesis", "load_release",
                     manifest_path.string() + ": no release datasets listed");

  std::filesystem::path draws_path =
      dir / manifest.at("draws").get<std::string>();
  nlohmann::json draws_json = load_json_file(draws_path, "load_release");
  check_format(draws_json, "synthesizer-draws", kDrawsVersion, draws_path,
               "load_release");
  std::string kind = draws_json.at("synthesizer").get<std::string>();
  if (kind != out.provenance.synthesizer)
    throw ParseError("synthesis", "load_release",
                     "manifest synthesizer '" + out.provenance.synthesizer +
                         "' does not match draws file '" + kind + "'");

  if (kind == "mixture") {
    std::vector<MixtureDraw> draws;
    for (const auto& jd : draws_json.at("draws"))
      draws.push_back(mixture_draw_from_json(jd));
    if (draws.empty())
      throw ParseError("synthesis", "load_release",
                       draws_path.string() + ": no draws");
    out.draws = std::move(draws);
  } else if (kind == "cart") {
    CartDrawSet cd;
    cd.model = cart_model_from_json(draws_json.at("model"));
    for (const auto& jd : draws_json.at("draws")) {
      CartDraw d;
      d.leaf_weights =
          jd.at("leaf_weights")
              .get<std::vector<std::vector<std::vector<double>>>>();
      cd.draws.push_back(std::move(d));
    }
    if (cd.draws.empty())
      throw ParseError("synthesis", "load_release",
                       draws_path.string() + ": no draws");
    out.draws = std::move(cd);
  } else {
    throw ParseError("synthesis", "load_release",
                     "unknown synthesizer '" + kind + "'");
  }
  return out;
}

}  // namespace synrisk
