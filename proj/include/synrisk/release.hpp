#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "synrisk/cart.hpp"
#include "synrisk/dataset.hpp"
#include "synrisk/mixture.hpp"

namespace synrisk {

// Tree synthesizer parameters: the fitted model plus one leaf-weight
// snapshot per release.
struct CartDrawSet {
  CartModel model;
  std::vector<CartDraw> draws;
};

struct Provenance {
  std::string synthesizer;  // "mixture" or "cart"
  std::uint64_t seed = 0;
  nlohmann::json hyperparams = nlohmann::json::object();
};

// What the intruder sees plus what the risk estimators need: m synthetic
// datasets over the confidential schema (un-synthesized columns copied
// verbatim) and the retained parameter draws that generated them.
struct SyntheticRelease {
  std::vector<Dataset> datasets;
  std::variant<std::vector<MixtureDraw>, CartDrawSet> draws;
  Provenance provenance;

  std::size_t releases() const { return datasets.size(); }
  bool is_mixture() const {
    return std::holds_alternative<std::vector<MixtureDraw>>(draws);
  }
  const std::vector<MixtureDraw>& mixture_draws() const {
    return std::get<std::vector<MixtureDraw>>(draws);
  }
  const CartDrawSet& cart_draws() const { return std::get<CartDrawSet>(draws); }
  std::size_t draw_count() const {
    return is_mixture() ? mixture_draws().size() : cart_draws().draws.size();
  }
};

// Generates m releases from retained mixture draws, cycling through the
// draws (release l uses draw l mod H). Parallel over releases; release l's
// engine is seeded from (seed, l), so output does not depend on job count.
// jobs = 0 means one worker per hardware thread.
SyntheticRelease generate_mixture_release(std::vector<MixtureDraw> draws,
                                          const Dataset& data, std::size_t m,
                                          std::uint64_t seed,
                                          unsigned jobs = 0);

// Generates m releases from a fitted tree model. Each release draws a fresh
// Bayesian-bootstrap snapshot (retained as that release's parameter draw),
// then synthesizes records in order. Same seeding scheme as above.
SyntheticRelease cart_generate(const CartModel& model, const Dataset& data,
                               std::size_t m, std::uint64_t seed,
                               unsigned jobs = 0);

// On-disk layout: <name>.json manifest referencing <name>_release_<l>.csv
// per dataset and <name>_draws.json for the parameter draws. References are
// relative to the manifest's directory. Returns the manifest path.
std::filesystem::path write_release(const SyntheticRelease& release,
                                    const std::filesystem::path& dir,
                                    const std::string& name);

SyntheticRelease load_release(const std::filesystem::path& manifest_path,
                              std::shared_ptr<const Schema> schema);

}  // namespace synrisk
