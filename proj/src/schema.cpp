#include "synrisk/schema.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "synrisk/error.hpp"

namespace synrisk {

Schema::Schema(std::vector<VariableDef> variables) : vars_(std::move(variables)) {
  if (vars_.empty())
    throw SchemaError("core_data", "schema", "schema has no variables");
  std::unordered_set<std::string> seen;
  bool any_synth = false;
  for (const auto& v : vars_) {
    if (v.name.empty())
      throw SchemaError("core_data", "schema", "variable with empty name");
    if (!seen.insert(v.name).second)
      throw SchemaError("core_data", "schema",
                        "duplicate variable name '" + v.name + "'");
    if (v.kind == VarKind::categorical) {
      if (v.levels.size() < 2)
        throw SchemaError("core_data", "schema",
                          "categorical variable '" + v.name +
                              "' needs cardinality >= 2");
      std::unordered_set<std::string> lv;
      for (const auto& l : v.levels)
        if (!lv.insert(l).second)
          throw SchemaError("core_data", "schema",
                            "duplicate level '" + l + "' in variable '" +
                                v.name + "'");
    } else {
      if (!(v.lower < v.upper))
        throw SchemaError("core_data", "schema",
                          "continuous variable '" + v.name +
                              "' needs lower < upper");
    }
    any_synth = any_synth || v.synthesized;
  }
  if (!any_synth)
    throw SchemaError("core_data", "schema",
                      "no synthesized variable; nothing to assess");
}

std::size_t Schema::index_of(const std::string& name) const {
  if (auto j = find(name)) return *j;
  throw SchemaError("core_data", "schema", "unknown variable '" + name + "'");
}

std::optional<std::size_t> Schema::find(const std::string& name) const {
  for (std::size_t j = 0; j < vars_.size(); ++j)
    if (vars_[j].name == name) return j;
  return std::nullopt;
}

std::optional<std::int32_t> Schema::level_code(std::size_t j,
                                               const std::string& label) const {
  const auto& levels = vars_[j].levels;
  for (std::size_t k = 0; k < levels.size(); ++k)
    if (levels[k] == label) return static_cast<std::int32_t>(k);
  return std::nullopt;
}

Partition partition(const Schema& schema) {
  Partition p;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& v = schema.variable(j);
    if (v.synthesized) {
      p.synthesized.push_back(j);
      if (v.intruder_known) p.known_synthesized.push_back(j);
    } else {
      p.unsynthesized.push_back(j);
      if (v.intruder_known) p.known_unsynthesized.push_back(j);
    }
  }
  p.fully_synthetic = p.unsynthesized.empty();
  return p;
}

std::uint64_t enumerate_cells(const Schema& schema) {
  std::uint64_t product = 1;
  for (const auto& v : schema.variables()) {
    if (v.kind != VarKind::categorical)
      throw SchemaError("core_data", "enumerate_cells",
                        "continuous variable '" + v.name +
                            "' has no finite cell count");
    std::uint64_t k = v.cardinality();
    if (product > std::numeric_limits<std::uint64_t>::max() / k)
      throw RangeError("core_data", "enumerate_cells",
                       "cell count exceeds 64-bit integer capacity");
    product *= k;
  }
  return product;
}

namespace {

using nlohmann::json;

VariableDef variable_from_json(const json& jv, const std::string& origin) {
  VariableDef v;
  if (!jv.contains("name") || !jv["name"].is_string())
    throw ParseError("core_data", "load_schema",
                     origin + ": variable missing string field 'name'");
  v.name = jv["name"].get<std::string>();
  const std::string kind = jv.value("kind", std::string{});
  if (kind == "categorical") {
    v.kind = VarKind::categorical;
    if (!jv.contains("levels") || !jv["levels"].is_array())
      throw ParseError("core_data", "load_schema",
                       origin + ": categorical variable '" + v.name +
                           "' missing 'levels' array");
    for (const auto& l : jv["levels"]) v.levels.push_back(l.get<std::string>());
  } else if (kind == "continuous") {
    v.kind = VarKind::continuous;
    if (!jv.contains("lower") || !jv.contains("upper"))
      throw ParseError("core_data", "load_schema",
                       origin + ": continuous variable '" + v.name +
                           "' missing 'lower'/'upper'");
    v.lower = jv["lower"].get<double>();
    v.upper = jv["upper"].get<double>();
  } else {
    throw ParseError("core_data", "load_schema",
                     origin + ": variable '" + v.name + "' has unknown kind '" +
                         kind + "'");
  }
  v.synthesized = jv.value("synthesized", false);
  v.intruder_known = jv.value("intruder_known", false);
  return v;
}

}  // namespace

Schema schema_from_json_text(const std::string& text,
                             const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("core_data", "load_schema",
                     origin + ": " + std::string(e.what()));
  }
  const json* vars = nullptr;
  if (doc.is_array())
    vars = &doc;
  else if (doc.is_object() && doc.contains("variables"))
    vars = &doc["variables"];
  else
    throw ParseError("core_data", "load_schema",
                     origin + ": expected array or {\"variables\": [...]}");
  std::vector<VariableDef> out;
  for (const auto& jv : *vars) out.push_back(variable_from_json(jv, origin));
  return Schema(std::move(out));
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("core_data", "load_schema",
                     "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return schema_from_json_text(buf.str(), path.string());
}

void write_schema(const Schema& schema, const std::filesystem::path& path) {
  json vars = json::array();
  for (const auto& v : schema.variables()) {
    json jv;
    jv["name"] = v.name;
    if (v.kind == VarKind::categorical) {
      jv["kind"] = "categorical";
      jv["levels"] = v.levels;
    } else {
      jv["kind"] = "continuous";
      jv["lower"] = v.lower;
      jv["upper"] = v.upper;
    }
    jv["synthesized"] = v.synthesized;
    jv["intruder_known"] = v.intruder_known;
    vars.push_back(jv);
  }
  json doc;
  doc["variables"] = vars;
  std::ofstream out(path);
  if (!out)
    throw ParseError("core_data", "write_schema",
                     "cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << "\n";
}

}  // namespace synrisk
