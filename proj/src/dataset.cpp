#include "synrisk/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "synrisk/error.hpp"

namespace synrisk {

Dataset::Dataset(std::shared_ptr<const Schema> schema,
                 std::vector<Column> columns)
    : schema_(std::move(schema)), cols_(std::move(columns)) {
  if (cols_.size() != schema_->size())
    throw SchemaError("core_data", "dataset",
                      "column count does not match schema");
  for (std::size_t j = 0; j < cols_.size(); ++j) {
    const auto& v = schema_->variable(j);
    std::size_t n = std::visit([](const auto& c) { return c.size(); }, cols_[j]);
    if (j == 0) rows_ = n;
    if (n != rows_)
      throw SchemaError("core_data", "dataset",
                        "column '" + v.name + "' has inconsistent length");
    bool is_cat = std::holds_alternative<CatColumn>(cols_[j]);
    if (is_cat != v.is_categorical())
      throw SchemaError("core_data", "dataset",
                        "column '" + v.name + "' has wrong storage kind");
    if (is_cat) {
      const auto& c = std::get<CatColumn>(cols_[j]);
      const auto k = static_cast<std::int32_t>(v.cardinality());
      for (std::size_t i = 0; i < c.size(); ++i)
        if (c[i] < 0 || c[i] >= k)
          throw SchemaError("core_data", "dataset",
                            "row " + std::to_string(i + 1) + ", column '" +
                                v.name + "': level code out of range");
    } else {
      const auto& c = std::get<NumColumn>(cols_[j]);
      for (std::size_t i = 0; i < c.size(); ++i)
        if (!(c[i] >= v.lower && c[i] <= v.upper))
          throw RangeError("core_data", "dataset",
                           "row " + std::to_string(i + 1) + ", column '" +
                               v.name + "': value out of declared bounds");
    }
  }
}

Dataset Dataset::empty(std::shared_ptr<const Schema> schema) {
  std::vector<Column> cols;
  for (const auto& v : schema->variables()) {
    if (v.is_categorical())
      cols.emplace_back(CatColumn{});
    else
      cols.emplace_back(NumColumn{});
  }
  return Dataset(std::move(schema), std::move(cols));
}

Cell Dataset::cell(std::size_t row, std::size_t col) const {
  if (std::holds_alternative<CatColumn>(cols_[col]))
    return Cell{std::get<CatColumn>(cols_[col])[row]};
  return Cell{std::get<NumColumn>(cols_[col])[row]};
}

std::vector<Cell> Dataset::gather(std::size_t row,
                                  std::span<const std::size_t> cols) const {
  std::vector<Cell> out;
  out.reserve(cols.size());
  for (std::size_t j : cols) out.push_back(cell(row, j));
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  // Minimal CSV: fields separated by commas, double-quote escaping.
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += "\"";
  return out;
}

double parse_double(const std::string& field, std::size_t row,
                    const std::string& col) {
  const char* first = field.data();
  const char* last = first + field.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw ParseError("core_data", "load_dataset",
                     "row " + std::to_string(row) + ", column '" + col +
                         "': cannot parse number from '" + field + "'");
  return value;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path,
                     std::shared_ptr<const Schema> schema) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("core_data", "load_dataset",
                     "cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("core_data", "load_dataset",
                     "'" + path.string() + "': missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  if (header.size() != schema->size())
    throw ParseError("core_data", "load_dataset",
                     "'" + path.string() + "': header has " +
                         std::to_string(header.size()) + " columns, schema has " +
                         std::to_string(schema->size()));
  // Header may permute the schema order; map file column -> schema index.
  std::vector<std::size_t> col_map(header.size());
  std::vector<bool> used(schema->size(), false);
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto j = schema->find(header[c]);
    if (!j)
      throw SchemaError("core_data", "load_dataset",
                        "header column '" + header[c] +
                            "' is not a schema variable");
    if (used[*j])
      throw SchemaError("core_data", "load_dataset",
                        "duplicate header column '" + header[c] + "'");
    used[*j] = true;
    col_map[c] = *j;
  }

  std::vector<Dataset::Column> cols;
  for (const auto& v : schema->variables()) {
    if (v.is_categorical())
      cols.emplace_back(Dataset::CatColumn{});
    else
      cols.emplace_back(Dataset::NumColumn{});
  }

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    ++row;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw ParseError("core_data", "load_dataset",
                       "row " + std::to_string(row) + ": has " +
                           std::to_string(fields.size()) + " fields, expected " +
                           std::to_string(header.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      std::size_t j = col_map[c];
      const auto& v = schema->variable(j);
      if (fields[c].empty())
        throw ParseError("core_data", "load_dataset",
                         "row " + std::to_string(row) + ", column '" + v.name +
                             "': missing value (complete data required)");
      if (v.is_categorical()) {
        auto code = schema->level_code(j, fields[c]);
        if (!code)
          throw SchemaError("core_data", "load_dataset",
                            "row " + std::to_string(row) + ", column '" +
                                v.name + "': level '" + fields[c] +
                                "' not declared in schema");
        std::get<Dataset::CatColumn>(cols[j]).push_back(*code);
      } else {
        double x = parse_double(fields[c], row, v.name);
        if (!(x >= v.lower && x <= v.upper))
          throw RangeError("core_data", "load_dataset",
                           "row " + std::to_string(row) + ", column '" +
                               v.name + "': value " + fields[c] +
                               " outside [" + std::to_string(v.lower) + ", " +
                               std::to_string(v.upper) + "]");
        std::get<Dataset::NumColumn>(cols[j]).push_back(x);
      }
    }
  }
  return Dataset(std::move(schema), std::move(cols));
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw ParseError("core_data", "write_dataset",
                     "cannot open '" + path.string() + "' for writing");
  const Schema& schema = data.schema();
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (j) out << ',';
    out << csv_escape(schema.variable(j).name);
  }
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      if (j) out << ',';
      const auto& v = schema.variable(j);
      if (v.is_categorical()) {
        out << csv_escape(v.levels[static_cast<std::size_t>(data.code(i, j))]);
      } else {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), data.value(i, j));
        out.write(buf, ptr - buf);
        (void)ec;
      }
    }
    out << '\n';
  }
}

}  // namespace synrisk
