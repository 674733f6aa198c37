#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <variant>
#include <vector>

#include "synrisk/schema.hpp"

namespace synrisk {

// One cell value: level code for categorical, raw value for continuous.
using Cell = std::variant<std::int32_t, double>;

inline std::int32_t cell_code(const Cell& c) { return std::get<std::int32_t>(c); }
inline double cell_value(const Cell& c) { return std::get<double>(c); }

// Column-major rectangular data. Categorical cells are stored as integer
// level codes (labels live in the schema); rows are identified by the dense
// surrogate row_id = row index + 1. Immutable after construction.
class Dataset {
 public:
  using CatColumn = std::vector<std::int32_t>;
  using NumColumn = std::vector<double>;
  using Column = std::variant<CatColumn, NumColumn>;

  Dataset(std::shared_ptr<const Schema> schema, std::vector<Column> columns);

  // Empty dataset (n = 0) over the schema.
  static Dataset empty(std::shared_ptr<const Schema> schema);

  const Schema& schema() const { return *schema_; }
  std::shared_ptr<const Schema> schema_ptr() const { return schema_; }
  std::size_t rows() const { return rows_; }
  std::int64_t row_id(std::size_t i) const { return static_cast<std::int64_t>(i) + 1; }

  std::int32_t code(std::size_t row, std::size_t col) const {
    return std::get<CatColumn>(cols_[col])[row];
  }
  double value(std::size_t row, std::size_t col) const {
    return std::get<NumColumn>(cols_[col])[row];
  }
  Cell cell(std::size_t row, std::size_t col) const;
  const Column& column(std::size_t col) const { return cols_[col]; }

  // Cells of one row restricted to the given variable indexes.
  std::vector<Cell> gather(std::size_t row, std::span<const std::size_t> cols) const;

 private:
  std::shared_ptr<const Schema> schema_;
  std::vector<Column> cols_;
  std::size_t rows_ = 0;
};

// CSV IO: UTF-8, header row of variable names (any order, exact set), one
// record per line. Categorical cells hold level labels; continuous cells
// round-trip at full double precision.
Dataset load_dataset(const std::filesystem::path& path,
                     std::shared_ptr<const Schema> schema);
void write_dataset(const Dataset& data, const std::filesystem::path& path);

}  // namespace synrisk
