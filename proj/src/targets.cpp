#include "synrisk/targets.hpp"

#include <charconv>
#include <fstream>
#include <unordered_set>

#include "synrisk/error.hpp"

namespace synrisk {

TargetFile::TargetFile(std::vector<Target> targets)
    : targets_(std::move(targets)) {
  std::unordered_set<std::int64_t> ids;
  for (const auto& t : targets_)
    if (!ids.insert(t.target_id).second)
      throw SchemaError("core_data", "targets",
                        "duplicate target_id " + std::to_string(t.target_id));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::int64_t parse_int(const std::string& s, std::size_t row,
                       const std::string& what) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError("core_data", "load_targets",
                     "row " + std::to_string(row) + ": cannot parse " + what +
                         " from '" + s + "'");
  return v;
}

}  // namespace

TargetFile load_targets(const std::filesystem::path& path,
                        const Schema& schema) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("core_data", "load_targets",
                     "cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("core_data", "load_targets",
                     "'" + path.string() + "': missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_line(line);

  constexpr std::size_t kIdCol = static_cast<std::size_t>(-1);
  constexpr std::size_t kTrueRowCol = static_cast<std::size_t>(-2);
  std::vector<std::size_t> col_map;
  bool has_id = false;
  for (const auto& name : header) {
    if (name == "target_id") {
      col_map.push_back(kIdCol);
      has_id = true;
    } else if (name == "true_row_id") {
      col_map.push_back(kTrueRowCol);
    } else {
      auto j = schema.find(name);
      if (!j)
        throw SchemaError("core_data", "load_targets",
                          "header column '" + name + "' is not a schema variable");
      if (!schema.variable(*j).intruder_known)
        throw SchemaError("core_data", "load_targets",
                          "variable '" + name + "' is not intruder_known");
      col_map.push_back(*j);
    }
  }

  std::vector<Target> targets;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    auto fields = split_line(line);
    if (fields.size() != header.size())
      throw ParseError("core_data", "load_targets",
                       "row " + std::to_string(row) + ": has " +
                           std::to_string(fields.size()) +
                           " fields, expected " + std::to_string(header.size()));
    Target t;
    t.target_id = static_cast<std::int64_t>(row);
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string& f = fields[c];
      if (f.empty()) continue;  // not known for this target
      if (col_map[c] == kIdCol) {
        t.target_id = parse_int(f, row, "target_id");
      } else if (col_map[c] == kTrueRowCol) {
        t.true_row_id = parse_int(f, row, "true_row_id");
      } else {
        std::size_t j = col_map[c];
        const auto& v = schema.variable(j);
        if (v.is_categorical()) {
          auto code = schema.level_code(j, f);
          if (!code)
            throw SchemaError("core_data", "load_targets",
                              "row " + std::to_string(row) + ", column '" +
                                  v.name + "': level '" + f +
                                  "' not declared in schema");
          t.known_values.emplace_back(j, Cell{*code});
        } else {
          double x = 0.0;
          auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), x);
          if (ec != std::errc{} || ptr != f.data() + f.size())
            throw ParseError("core_data", "load_targets",
                             "row " + std::to_string(row) + ", column '" +
                                 v.name + "': cannot parse number from '" + f +
                                 "'");
          t.known_values.emplace_back(j, Cell{x});
        }
      }
    }
    targets.push_back(std::move(t));
  }
  (void)has_id;
  return TargetFile(std::move(targets));
}

TargetFile targets_from_records(const Dataset& data,
                                const std::vector<std::size_t>& rows) {
  const Schema& schema = data.schema();
  std::vector<std::size_t> known;
  for (std::size_t j = 0; j < schema.size(); ++j)
    if (schema.variable(j).intruder_known) known.push_back(j);
  std::vector<Target> targets;
  targets.reserve(rows.size());
  std::int64_t id = 0;
  for (std::size_t i : rows) {
    Target t;
    t.target_id = ++id;
    t.true_row_id = data.row_id(i);
    for (std::size_t j : known) t.known_values.emplace_back(j, data.cell(i, j));
    targets.push_back(std::move(t));
  }
  return TargetFile(std::move(targets));
}

}  // namespace synrisk
