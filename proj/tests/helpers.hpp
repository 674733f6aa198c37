#pragma once

// Fixture builders and independent oracles shared by the unit and
// acceptance suites. Oracles deliberately use direct-space arithmetic (no
// log-sum-exp) so they share no numerical path with the library.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "synrisk/dataset.hpp"
#include "synrisk/mixture.hpp"
#include "synrisk/schema.hpp"

namespace testutil {

inline synrisk::VariableDef cat(const std::string& name, std::size_t levels,
                                bool synthesized, bool known) {
  synrisk::VariableDef v;
  v.name = name;
  v.kind = synrisk::VarKind::categorical;
  for (std::size_t k = 0; k < levels; ++k)
    v.levels.push_back("L" + std::to_string(k));
  v.synthesized = synthesized;
  v.intruder_known = known;
  return v;
}

inline synrisk::VariableDef cont(const std::string& name, double lower,
                                 double upper, bool synthesized, bool known) {
  synrisk::VariableDef v;
  v.name = name;
  v.kind = synrisk::VarKind::continuous;
  v.lower = lower;
  v.upper = upper;
  v.synthesized = synthesized;
  v.intruder_known = known;
  return v;
}

inline std::shared_ptr<const synrisk::Schema> make_schema(
    std::vector<synrisk::VariableDef> vars) {
  return std::make_shared<const synrisk::Schema>(std::move(vars));
}

// Rows given in row-major cells; converted to the column-major Dataset.
inline synrisk::Dataset make_dataset(
    std::shared_ptr<const synrisk::Schema> schema,
    const std::vector<std::vector<synrisk::Cell>>& rows) {
  std::vector<synrisk::Dataset::Column> cols;
  for (std::size_t j = 0; j < schema->size(); ++j) {
    if (schema->variable(j).is_categorical()) {
      synrisk::Dataset::CatColumn col;
      for (const auto& r : rows) col.push_back(synrisk::cell_code(r[j]));
      cols.emplace_back(std::move(col));
    } else {
      synrisk::Dataset::NumColumn col;
      for (const auto& r : rows) col.push_back(synrisk::cell_value(r[j]));
      cols.emplace_back(std::move(col));
    }
  }
  return synrisk::Dataset(std::move(schema), std::move(cols));
}

// Unique scratch directory under the system temp root; removed on
// destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<unsigned> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("synrisk_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

// Direct-space mixture density of one value-vector over the synthesized
// variables (independent of the library's log-space path).
inline double oracle_density(const synrisk::MixtureDraw& draw,
                             const std::vector<std::int32_t>& codes) {
  double total = 0.0;
  for (std::size_t c = 0; c < draw.classes(); ++c) {
    double term = draw.weights[c];
    for (std::size_t v = 0; v < codes.size(); ++v)
      term *= draw.probs[c][v][static_cast<std::size_t>(codes[v])];
    total += term;
  }
  return total;
}

// Direct-space density of a whole dataset's synthesized columns under one
// draw: prod_rows oracle_density(row).
inline double oracle_dataset_density(
    const synrisk::MixtureDraw& draw, const synrisk::Dataset& data,
    const std::vector<std::size_t>& synth_cols) {
  double total = 1.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    std::vector<std::int32_t> codes;
    for (std::size_t j : synth_cols) codes.push_back(data.code(i, j));
    total *= oracle_density(draw, codes);
  }
  return total;
}

// Every assignment of level codes over the given cardinalities, last
// variable fastest.
inline std::vector<std::vector<std::int32_t>> all_assignments(
    const std::vector<std::size_t>& cards) {
  std::vector<std::vector<std::int32_t>> out;
  std::vector<std::int32_t> cur(cards.size(), 0);
  while (true) {
    out.push_back(cur);
    std::size_t j = cards.size();
    while (j > 0) {
      --j;
      if (++cur[j] < static_cast<std::int32_t>(cards[j])) break;
      cur[j] = 0;
      if (j == 0) return out;
    }
  }
}

inline double total_variation(const std::vector<double>& a,
                              const std::vector<double>& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::fabs(a[i] - b[i]);
  return 0.5 * tv;
}

}  // namespace testutil
