#include "synrisk/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "synrisk/error.hpp"
#include "synrisk/parallel.hpp"
#include "synrisk/release.hpp"
#include "synrisk/rng.hpp"

namespace synrisk {

namespace {

using nlohmann::json;

// Stage tags keep the per-phase engines on disjoint sub-seed streams.
constexpr std::uint64_t kGenerateTag = 0x67656e;  // release generation
constexpr std::uint64_t kMatchTag = 0x6d617463;   // identification sampling

const std::set<std::string> kPipelines = {"synthesize", "attribute-risk",
                                          "identification-risk", "full"};

bool wants_synthesis(const std::string& p) {
  return p == "synthesize" || p == "full";
}
bool wants_attribute(const std::string& p) {
  return p == "attribute-risk" || p == "full";
}
bool wants_identification(const std::string& p) {
  return p == "identification-risk" || p == "full";
}

// --- validation helpers ----------------------------------------------------

struct Check {
  const json& doc;
  std::string scope;  // "" or "attribute." etc., for messages
  std::vector<std::string>& out;

  void bad(const std::string& msg) { out.push_back(msg); }

  bool has(const char* key) const { return doc.contains(key); }

  std::string str(const char* key, const std::string& dflt) {
    if (!doc.contains(key)) return dflt;
    if (!doc[key].is_string()) {
      bad("field '" + scope + key + "' must be a string");
      return dflt;
    }
    return doc[key].get<std::string>();
  }

  std::uint64_t uint(const char* key, std::uint64_t dflt) {
    if (!doc.contains(key)) return dflt;
    const nlohmann::json& v = doc[key];
    // Documents built in code carry non-negative values as signed integers;
    // accept those too.
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    bad("field '" + scope + key + "' must be a non-negative integer");
    return dflt;
  }

  double num(const char* key, double dflt) {
    if (!doc.contains(key)) return dflt;
    if (!doc[key].is_number()) {
      bad("field '" + scope + key + "' must be a number");
      return dflt;
    }
    return doc[key].get<double>();
  }

  bool boolean(const char* key, bool dflt) {
    if (!doc.contains(key)) return dflt;
    if (!doc[key].is_boolean()) {
      bad("field '" + scope + key + "' must be a boolean");
      return dflt;
    }
    return doc[key].get<bool>();
  }

  void unknown_keys(const std::set<std::string>& known) {
    for (const auto& item : doc.items())
      if (known.find(item.key()) == known.end())
        bad("unknown field '" + scope + item.key() + "'");
  }
};

void check_path_field(const json& doc, const char* key,
                      const std::string& pipeline, bool required,
                      std::filesystem::path& into,
                      std::vector<std::string>& out) {
  if (doc.contains(key) && doc[key].is_string())
    into = doc[key].get<std::string>();
  if (!required) return;
  if (into.empty()) {
    out.push_back("pipeline '" + pipeline + "' requires field '" +
                  std::string(key) + "'");
    return;
  }
  if (!std::filesystem::exists(into))
    out.push_back("file not found for '" + std::string(key) +
                  "': " + into.string());
}

json grid_to_json(const GridConfig& g) {
  return {{"x", g.x},         {"y", g.y},         {"x_min", g.x_min},
          {"x_max", g.x_max}, {"y_min", g.y_min}, {"y_max", g.y_max},
          {"x_steps", g.x_steps}, {"y_steps", g.y_steps}};
}

json normalized_config(const RunConfig& c) {
  json prior = c.prior.empty() ? json("uniform") : json(c.prior);
  json records = c.records.empty() ? json("all") : json(c.records);
  json radius = json::object();
  for (const auto& [name, spec] : c.radius)
    radius[name] = {
        {"metric",
         spec.metric == RadiusSpec::Metric::absolute ? "absolute" : "relative"},
        {"radius", spec.radius}};
  json table = json::object();
  for (const auto& [id, count] : c.population_table) table[id] = count;
  return {
      {"pipeline", c.pipeline},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"out_dir", c.out_dir.string()},
      {"report_path", c.report_path.string()},
      {"summary_only", c.summary_only},
      {"data", c.data.string()},
      {"schema", c.schema_path.string()},
      {"targets", c.targets.string()},
      {"release_manifest", c.release_manifest.string()},
      {"synthesizer",
       {{"kind", c.synthesizer},
        {"releases", c.releases},
        {"classes", c.gibbs.classes},
        {"burn_in", c.gibbs.burn_in},
        {"thin", c.gibbs.thin},
        {"draws", c.gibbs.draws},
        {"order", c.cart_order},
        {"min_leaf", c.cart_min_leaf}}},
      {"attribute",
       {{"knowledge", c.knowledge},
        {"known_subset", c.known_subset},
        {"prior", prior},
        {"synthesizer_known", c.synthesizer_known},
        {"guess_mode", c.guess_mode},
        {"full_cap", c.full_cap},
        {"explicit_guesses", c.explicit_guesses},
        {"records", records},
        {"grid", c.grid ? grid_to_json(*c.grid) : json(nullptr)}}},
      {"identification",
       {{"in_sample", c.in_sample},
        {"population",
         {{"source", c.population_source},
          {"value", c.population_constant},
          {"table", table}}},
        {"radius", radius},
        {"iterations", c.iterations},
        {"s_known", c.s_known}}}};
}

// Cross-checks that need the schema; each failure is one violation.
void schema_cross_checks(const RunConfig& c, const Schema& schema,
                         std::vector<std::string>& out) {
  const Partition part = partition(schema);
  auto is_synth = [&](std::size_t j) { return schema.variable(j).synthesized; };

  for (const auto& name : c.known_subset) {
    auto j = schema.find(name);
    if (!j)
      out.push_back("known_subset variable '" + name + "' is not in the schema");
    else if (!is_synth(*j))
      out.push_back("known_subset variable '" + name + "' is not synthesized");
  }
  for (const auto& [name, spec] : c.radius) {
    auto j = schema.find(name);
    if (!j) {
      out.push_back("radius rule for unknown variable '" + name + "'");
      continue;
    }
    if (schema.variable(*j).is_categorical() || !is_synth(*j))
      out.push_back("radius rule for '" + name +
                    "', which is not a continuous synthesized variable");
    if (!(spec.radius > 0.0))
      out.push_back("radius for '" + name + "' must be > 0");
  }
  if (wants_identification(c.pipeline)) {
    for (std::size_t j : part.known_synthesized) {
      const auto& def = schema.variable(j);
      if (!def.is_categorical() && c.radius.find(def.name) == c.radius.end())
        out.push_back("continuous synthesized variable '" + def.name +
                      "' is intruder-known but has no radius rule");
    }
  }
  if (c.grid) {
    for (const auto& name : {c.grid->x, c.grid->y}) {
      auto j = schema.find(name);
      if (!j)
        out.push_back("grid variable '" + name + "' is not in the schema");
      else if (schema.variable(*j).is_categorical() || !is_synth(*j))
        out.push_back("grid variable '" + name +
                      "' must be a continuous synthesized variable");
    }
    if (!(c.grid->x_min < c.grid->x_max) || !(c.grid->y_min < c.grid->y_max))
      out.push_back("grid bounds must satisfy min < max");
    if (c.grid->x_steps == 0 || c.grid->y_steps == 0)
      out.push_back("grid steps must be >= 1");
  } else if (wants_attribute(c.pipeline)) {
    for (std::size_t j : part.synthesized)
      if (!schema.variable(j).is_categorical())
        out.push_back("attribute assessment of continuous synthesized "
                      "variable '" +
                      schema.variable(j).name + "' needs a grid");
  }
  if (wants_synthesis(c.pipeline)) {
    if (c.synthesizer == "mixture") {
      for (std::size_t j : part.synthesized)
        if (!schema.variable(j).is_categorical())
          out.push_back("mixture synthesizer cannot synthesize continuous "
                        "variable '" +
                        schema.variable(j).name + "'");
    } else {
      for (const auto& name : c.cart_order) {
        auto j = schema.find(name);
        if (!j)
          out.push_back("cart order variable '" + name +
                        "' is not in the schema");
        else if (!is_synth(*j))
          out.push_back("cart order variable '" + name +
                        "' is not synthesized");
      }
    }
  }
}

}  // namespace

std::string config_hash(const json& normalized) {
  const std::string dump = normalized.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setfill('0') << std::setw(16) << h;
  return out.str();
}

ConfigValidation validate_config_json(const json& doc) {
  ConfigValidation v;
  auto& out = v.violations;
  if (!doc.is_object()) {
    out.push_back("config root must be a JSON object");
    return v;
  }
  RunConfig& c = v.config;
  Check top{doc, "", out};
  top.unknown_keys({"pipeline", "seed", "jobs", "out_dir", "report_path",
                    "summary_only", "data", "schema", "targets",
                    "release_manifest", "synthesizer", "attribute",
                    "identification"});

  c.pipeline = top.str("pipeline", c.pipeline);
  if (kPipelines.find(c.pipeline) == kPipelines.end())
    out.push_back("pipeline must be one of synthesize, attribute-risk, "
                  "identification-risk, full; got '" +
                  c.pipeline + "'");
  if (!doc.contains("seed"))
    out.push_back("seed required (reproducibility; no entropy default)");
  else
    c.seed = top.uint("seed", 0);
  c.jobs = static_cast<unsigned>(top.uint("jobs", 0));
  c.out_dir = top.str("out_dir", c.out_dir.string());
  c.report_path = top.str("report_path", "");
  c.summary_only = top.boolean("summary_only", false);

  const bool synth = wants_synthesis(c.pipeline);
  const bool attr = wants_attribute(c.pipeline);
  const bool ident = wants_identification(c.pipeline);
  check_path_field(doc, "data", c.pipeline, true, c.data, out);
  check_path_field(doc, "schema", c.pipeline, true, c.schema_path, out);
  check_path_field(doc, "targets", c.pipeline, ident, c.targets, out);
  check_path_field(doc, "release_manifest", c.pipeline, (attr || ident) && !synth,
                   c.release_manifest, out);

  if (doc.contains("synthesizer")) {
    const json& s = doc["synthesizer"];
    if (!s.is_object()) {
      out.push_back("field 'synthesizer' must be an object");
    } else {
      Check cs{s, "synthesizer.", out};
      cs.unknown_keys({"kind", "releases", "classes", "burn_in", "thin",
                       "draws", "order", "min_leaf"});
      c.synthesizer = cs.str("kind", c.synthesizer);
      if (c.synthesizer != "mixture" && c.synthesizer != "cart")
        out.push_back("synthesizer.kind must be 'mixture' or 'cart'");
      c.releases = cs.uint("releases", c.releases);
      c.gibbs.classes = cs.uint("classes", c.gibbs.classes);
      c.gibbs.burn_in = cs.uint("burn_in", c.gibbs.burn_in);
      c.gibbs.thin = cs.uint("thin", c.gibbs.thin);
      c.gibbs.draws = cs.uint("draws", c.gibbs.draws);
      c.cart_min_leaf = cs.uint("min_leaf", c.cart_min_leaf);
      if (s.contains("order")) {
        if (!s["order"].is_array())
          out.push_back("synthesizer.order must be an array of names");
        else
          for (const auto& e : s["order"]) {
            if (!e.is_string()) {
              out.push_back("synthesizer.order entries must be strings");
              break;
            }
            c.cart_order.push_back(e.get<std::string>());
          }
      }
      if (synth) {
        if (c.releases < 1) out.push_back("synthesizer.releases must be >= 1");
        if (c.gibbs.classes < 1) out.push_back("synthesizer.classes must be >= 1");
        if (c.gibbs.draws < 1) out.push_back("synthesizer.draws must be >= 1");
        if (c.gibbs.thin < 1) out.push_back("synthesizer.thin must be >= 1");
        if (c.cart_min_leaf < 1) out.push_back("synthesizer.min_leaf must be >= 1");
      }
    }
  }

  if (doc.contains("attribute")) {
    const json& a = doc["attribute"];
    if (!a.is_object()) {
      out.push_back("field 'attribute' must be an object");
    } else {
      Check ca{a, "attribute.", out};
      ca.unknown_keys({"knowledge", "known_subset", "prior",
                       "synthesizer_known", "guess_mode", "full_cap",
                       "explicit_guesses", "records", "grid"});
      c.knowledge = ca.str("knowledge", c.knowledge);
      if (c.knowledge != "worst_case" && c.knowledge != "known_subset")
        out.push_back("attribute.knowledge must be 'worst_case' or "
                      "'known_subset'");
      if (a.contains("known_subset")) {
        if (!a["known_subset"].is_array())
          out.push_back("attribute.known_subset must be an array of names");
        else
          for (const auto& e : a["known_subset"])
            if (e.is_string())
              c.known_subset.push_back(e.get<std::string>());
            else
              out.push_back("attribute.known_subset entries must be strings");
      }
      if (c.knowledge == "known_subset" && c.known_subset.empty())
        out.push_back("attribute.known_subset must be non-empty for "
                      "known_subset knowledge");
      if (a.contains("prior") && !(a["prior"].is_string() &&
                                   a["prior"].get<std::string>() == "uniform")) {
        if (!a["prior"].is_array())
          out.push_back("attribute.prior must be 'uniform' or an array");
        else
          for (const auto& e : a["prior"]) {
            if (!e.is_number()) {
              out.push_back("attribute.prior entries must be numbers");
              break;
            }
            c.prior.push_back(e.get<double>());
          }
      }
      c.synthesizer_known = ca.boolean("synthesizer_known", true);
      c.guess_mode = ca.str("guess_mode", c.guess_mode);
      if (c.guess_mode != "neighborhood" && c.guess_mode != "full_enumeration" &&
          c.guess_mode != "explicit")
        out.push_back("attribute.guess_mode must be neighborhood, "
                      "full_enumeration, or explicit");
      c.full_cap = ca.uint("full_cap", c.full_cap);
      if (c.full_cap < 1) out.push_back("attribute.full_cap must be >= 1");
      if (a.contains("explicit_guesses")) {
        if (!a["explicit_guesses"].is_array())
          out.push_back("attribute.explicit_guesses must be an array");
        else
          c.explicit_guesses = a["explicit_guesses"];
      }
      if (c.guess_mode == "explicit" && c.explicit_guesses.empty())
        out.push_back("attribute.explicit_guesses must be non-empty for "
                      "explicit guess mode");
      if (a.contains("records") && !(a["records"].is_string() &&
                                     a["records"].get<std::string>() == "all")) {
        if (!a["records"].is_array())
          out.push_back("attribute.records must be 'all' or an array of row "
                        "ids");
        else
          for (const auto& e : a["records"]) {
            if (!e.is_number_integer()) {
              out.push_back("attribute.records entries must be integers");
              break;
            }
            c.records.push_back(e.get<std::int64_t>());
          }
      }
      if (a.contains("grid") && !a["grid"].is_null()) {
        const json& g = a["grid"];
        if (!g.is_object()) {
          out.push_back("attribute.grid must be an object");
        } else {
          Check cg{g, "attribute.grid.", out};
          cg.unknown_keys({"x", "y", "x_min", "x_max", "y_min", "y_max",
                           "x_steps", "y_steps"});
          GridConfig grid;
          grid.x = cg.str("x", "");
          grid.y = cg.str("y", "");
          if (grid.x.empty() || grid.y.empty())
            out.push_back("attribute.grid needs variable names 'x' and 'y'");
          grid.x_min = cg.num("x_min", 0.0);
          grid.x_max = cg.num("x_max", 0.0);
          grid.y_min = cg.num("y_min", 0.0);
          grid.y_max = cg.num("y_max", 0.0);
          grid.x_steps = cg.uint("x_steps", grid.x_steps);
          grid.y_steps = cg.uint("y_steps", grid.y_steps);
          c.grid = grid;
        }
      }
    }
  }

  if (doc.contains("identification")) {
    const json& i = doc["identification"];
    if (!i.is_object()) {
      out.push_back("field 'identification' must be an object");
    } else {
      Check ci{i, "identification.", out};
      ci.unknown_keys({"in_sample", "population", "radius", "iterations",
                       "s_known"});
      c.in_sample = ci.boolean("in_sample", true);
      c.iterations = ci.uint("iterations", c.iterations);
      c.s_known = ci.boolean("s_known", true);
      if (ident && c.iterations < 1)
        out.push_back("identification.iterations must be >= 1");
      if (i.contains("population")) {
        const json& p = i["population"];
        if (!p.is_object()) {
          out.push_back("identification.population must be an object");
        } else {
          Check cp{p, "identification.population.", out};
          cp.unknown_keys({"source", "value", "table"});
          c.population_source = cp.str("source", c.population_source);
          if (c.population_source != "none" &&
              c.population_source != "constant" &&
              c.population_source != "table")
            out.push_back("identification.population.source must be none, "
                          "constant, or table");
          c.population_constant = cp.uint("value", 0);
          if (p.contains("table")) {
            if (!p["table"].is_object())
              out.push_back("identification.population.table must map target "
                            "ids to counts");
            else
              for (const auto& item : p["table"].items()) {
                const bool count_ok =
                    item.value().is_number_unsigned() ||
                    (item.value().is_number_integer() &&
                     item.value().get<std::int64_t>() >= 0);
                if (!count_ok) {
                  out.push_back("population count for target '" + item.key() +
                                "' must be a non-negative integer");
                  continue;
                }
                errno = 0;
                char* end = nullptr;
                (void)std::strtoll(item.key().c_str(), &end, 10);
                if (errno != 0 || end == item.key().c_str() || *end != '\0')
                  out.push_back("population table key '" + item.key() +
                                "' is not an integer target id");
                else
                  c.population_table[item.key()] =
                      item.value().get<std::uint64_t>();
              }
          }
        }
      }
      if (ident) {
        if (!c.in_sample && c.population_source == "none")
          out.push_back("population mode (in_sample = false) needs a "
                        "population source");
        if (c.in_sample && c.population_source != "none")
          out.push_back("in-sample mode does not take a population source");
        if (c.population_source == "constant" && c.population_constant == 0)
          out.push_back("identification.population.value must be >= 1");
        if (c.population_source == "table" && c.population_table.empty())
          out.push_back("identification.population.table is empty");
      }
      if (i.contains("radius")) {
        const json& r = i["radius"];
        if (!r.is_object()) {
          out.push_back("identification.radius must map variable names to "
                        "rules");
        } else {
          for (const auto& item : r.items()) {
            const json& rule = item.value();
            if (!rule.is_object()) {
              out.push_back("radius rule for '" + item.key() +
                            "' must be an object");
              continue;
            }
            Check cr{rule, "identification.radius.", out};
            cr.unknown_keys({"metric", "radius"});
            RadiusSpec spec;
            std::string metric = cr.str("metric", "absolute");
            if (metric == "absolute") {
              spec.metric = RadiusSpec::Metric::absolute;
            } else if (metric == "relative") {
              spec.metric = RadiusSpec::Metric::relative;
            } else {
              out.push_back("radius metric for '" + item.key() +
                            "' must be 'absolute' or 'relative'");
            }
            spec.radius = cr.num("radius", 0.0);
            if (!(spec.radius > 0.0))
              out.push_back("radius for '" + item.key() + "' must be > 0");
            c.radius[item.key()] = spec;
          }
        }
      }
    }
  }

  if (!c.schema_path.empty() && std::filesystem::exists(c.schema_path)) {
    try {
      Schema schema = load_schema(c.schema_path);
      schema_cross_checks(c, schema, out);
    } catch (const Error& e) {
      out.push_back(std::string("schema file invalid: ") + e.what());
    }
  }

  v.ok = out.empty();
  if (v.ok) v.normalized = normalized_config(c);
  return v;
}

json read_json_file(const std::filesystem::path& path,
                    std::vector<std::string>& violations) {
  std::ifstream in(path);
  if (!in) {
    violations.push_back("cannot open config file: " + path.string());
    return nullptr;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; turn it into line/column.
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    violations.push_back(path.string() + ":" + std::to_string(line) + ":" +
                         std::to_string(col) + ": " + e.what());
    return nullptr;
  }
}

ConfigValidation validate_config(const std::filesystem::path& path) {
  ConfigValidation v;
  json doc = read_json_file(path, v.violations);
  if (!v.violations.empty()) return v;
  return validate_config_json(doc);
}

namespace {

// --- pipeline helpers -------------------------------------------------------

std::size_t resolve_var(const Schema& schema, const std::string& name,
                        const char* what) {
  auto j = schema.find(name);
  if (!j)
    throw ConfigError("cli_report", "run",
                      std::string(what) + " variable '" + name +
                          "' is not in the schema");
  return *j;
}

AttributeScenario make_scenario(const RunConfig& c, const Schema& schema) {
  AttributeScenario s;
  s.knowledge = c.knowledge == "known_subset" ? Knowledge::known_subset
                                              : Knowledge::worst_case;
  for (const auto& name : c.known_subset)
    s.known_subset.push_back(resolve_var(schema, name, "known_subset"));
  s.prior = c.prior;
  s.synthesizer_known = c.synthesizer_known;
  return s;
}

GuessConfig make_guess_config(const RunConfig& c, const Dataset& data) {
  GuessConfig g;
  g.full_cap = c.full_cap;
  if (c.guess_mode == "neighborhood") {
    g.mode = GuessMode::neighborhood;
  } else if (c.guess_mode == "full_enumeration") {
    g.mode = GuessMode::full_enumeration;
  } else {
    g.mode = GuessMode::explicit_list;
    const Partition part = partition(data.schema());
    for (const auto& jg : c.explicit_guesses) {
      if (!jg.is_array() || jg.size() != part.synthesized.size())
        throw ConfigError("cli_report", "run",
                          "each explicit guess must list one value per "
                          "synthesized variable");
      std::vector<Cell> guess;
      for (std::size_t p = 0; p < part.synthesized.size(); ++p) {
        const auto& var = data.schema().variable(part.synthesized[p]);
        const json& val = jg[p];
        if (var.is_categorical()) {
          if (!val.is_string())
            throw ConfigError("cli_report", "run",
                              "explicit guess value for '" + var.name +
                                  "' must be a level label");
          auto code = data.schema().level_code(part.synthesized[p],
                                               val.get<std::string>());
          if (!code)
            throw ConfigError("cli_report", "run",
                              "unknown level '" + val.get<std::string>() +
                                  "' for variable '" + var.name + "'");
          guess.emplace_back(*code);
        } else {
          if (!val.is_number())
            throw ConfigError("cli_report", "run",
                              "explicit guess value for '" + var.name +
                                  "' must be a number");
          guess.emplace_back(val.get<double>());
        }
      }
      g.explicit_guesses.push_back(std::move(guess));
    }
  }
  return g;
}

MatchConfig make_match_config(const RunConfig& c, const Schema& schema) {
  MatchConfig m;
  m.in_sample = c.in_sample;
  if (c.population_source == "constant")
    m.population_source = PopulationSource::constant;
  else if (c.population_source == "table")
    m.population_source = PopulationSource::table;
  m.population_constant = c.population_constant;
  for (const auto& [key, count] : c.population_table)
    m.population_table[std::stoll(key)] = count;
  for (const auto& [name, spec] : c.radius)
    m.radius[resolve_var(schema, name, "radius")] = spec;
  m.iterations = c.iterations;
  m.s_known = c.s_known;
  return m;
}

std::vector<std::size_t> resolve_records(const RunConfig& c,
                                         const Dataset& data) {
  std::vector<std::size_t> rows;
  for (std::int64_t id : c.records) {
    if (id < 1 || id > static_cast<std::int64_t>(data.rows()))
      throw RangeError("cli_report", "run",
                       "record id " + std::to_string(id) + " outside 1.." +
                           std::to_string(data.rows()));
    rows.push_back(static_cast<std::size_t>(id - 1));
  }
  return rows;
}

SyntheticRelease make_release(const RunConfig& c, const Dataset& data,
                              unsigned jobs) {
  const std::uint64_t gen_seed = derive_seed(c.seed, kGenerateTag);
  if (c.synthesizer == "mixture") {
    std::vector<MixtureDraw> draws = fit_mixture(data, c.gibbs, c.seed);
    return generate_mixture_release(std::move(draws), data, c.releases,
                                    gen_seed, jobs);
  }
  CartConfig cc;
  cc.min_leaf = c.cart_min_leaf;
  cc.order = c.cart_order;
  if (cc.order.empty()) {
    const Partition part = partition(data.schema());
    for (std::size_t j : part.synthesized)
      cc.order.push_back(data.schema().variable(j).name);
  }
  CartModel model = fit_cart(data, cc);
  return cart_generate(model, data, c.releases, gen_seed, jobs);
}

// --- report assembly --------------------------------------------------------

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed(double v, int precision = 6) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

constexpr std::size_t kDigestRowCap = 10000;

void digest_attribute(std::ostringstream& t, const json& a, bool summary_only) {
  t << "attribute disclosure\n";
  t << "  mode                    " << a["mode"].get<std::string>() << "\n";
  t << "  records assessed        " << a["records"].get<std::size_t>() << "\n";
  if (a["mode"] == "categorical") {
    t << "  mean true probability   "
      << fixed(a["mean_true_probability"].get<double>()) << "\n";
    t << "  median true probability "
      << fixed(a["median_true_probability"].get<double>()) << "\n";
    t << "  rank distribution\n";
    t << "    " << std::setw(8) << "rank" << std::setw(10) << "records"
      << "\n";
    for (const auto& item : a["rank_distribution"].items())
      t << "    " << std::setw(8) << item.key() << std::setw(10)
        << item.value().get<std::size_t>() << "\n";
  } else {
    t << "  map correct             "
      << fixed(a["pct_map_correct"].get<double>(), 2) << "%\n";
    t << "  map correct and unique  "
      << fixed(a["pct_map_correct_unique"].get<double>(), 2) << "%\n";
    t << "  mean mode distance      "
      << fixed(a["mean_mode_distance"].get<double>()) << "\n";
  }
  if (summary_only || !a.contains("detail")) return;
  const json& detail = a["detail"];
  t << "  detail";
  if (detail.size() > kDigestRowCap)
    t << " (first " << kDigestRowCap << " of " << detail.size() << ")";
  t << "\n";
  if (a["mode"] == "categorical") {
    t << "    " << std::setw(10) << "row_id" << std::setw(8) << "rank"
      << std::setw(14) << "true_prob" << std::setw(9) << "dropped" << "\n";
    std::size_t shown = 0;
    for (const auto& row : detail) {
      if (shown++ >= kDigestRowCap) break;
      t << "    " << std::setw(10) << row["row_id"].get<std::int64_t>()
        << std::setw(8) << row["rank"].get<std::size_t>() << std::setw(14)
        << fixed(row["true_probability"].get<double>()) << std::setw(9)
        << row["dropped_draws"].get<std::size_t>() << "\n";
    }
  } else {
    t << "    " << std::setw(10) << "row_id" << std::setw(14) << "r1"
      << std::setw(8) << "r2" << std::setw(6) << "tie" << std::setw(5) << "map"
      << "\n";
    std::size_t shown = 0;
    for (const auto& row : detail) {
      if (shown++ >= kDigestRowCap) break;
      t << "    " << std::setw(10) << row["row_id"].get<std::int64_t>()
        << std::setw(14) << fixed(row["r1"].get<double>()) << std::setw(8)
        << row["r2"].get<std::uint64_t>() << std::setw(6)
        << (row["tie"].get<bool>() ? "yes" : "no") << std::setw(5)
        << (row["map_correct"].get<bool>() ? "yes" : "no") << "\n";
    }
  }
}

void digest_identification(std::ostringstream& t, const json& s,
                           bool summary_only) {
  const json& sum = s["summary"];
  t << "identification disclosure\n";
  t << "  targets                 " << s["targets"].get<std::size_t>() << "\n";
  t << "  expected match risk     "
    << fixed(sum["expected_match_risk"].get<double>()) << "\n";
  t << "  true match rate         "
    << fixed(sum["true_match_rate"].get<double>()) << "\n";
  t << "  false match rate        "
    << fixed(sum["false_match_rate"].get<double>());
  if (sum["false_rate_undefined"].get<bool>()) t << " (no unique matches)";
  t << "\n";
  t << "  unique matches          " << sum["unique_matches"].get<std::size_t>()
    << "\n";
  if (sum["excluded_targets"].get<std::size_t>() > 0)
    t << "  targets without truth   "
      << sum["excluded_targets"].get<std::size_t>() << "\n";
  if (summary_only || !s.contains("detail")) return;
  const json& detail = s["detail"];
  t << "  detail";
  if (detail.size() > kDigestRowCap)
    t << " (first " << kDigestRowCap << " of " << detail.size() << ")";
  t << "\n";
  t << "    " << std::setw(12) << "target_id" << std::setw(10) << "c"
    << std::setw(4) << "T" << std::setw(4) << "K" << std::setw(4) << "F"
    << std::setw(14) << "max_prob" << std::setw(14) << "not_in_rel" << "\n";
  std::size_t shown = 0;
  for (const auto& row : detail) {
    if (shown++ >= kDigestRowCap) break;
    t << "    " << std::setw(12) << row["target_id"].get<std::int64_t>()
      << std::setw(10) << row["c"].get<std::size_t>();
    if (row["has_truth"].get<bool>()) {
      t << std::setw(4) << row["t"].get<int>() << std::setw(4)
        << row["k"].get<int>() << std::setw(4) << row["f"].get<int>();
    } else {
      t << std::setw(4) << "-" << std::setw(4) << "-" << std::setw(4) << "-";
    }
    t << std::setw(14) << fixed(row["max_prob"].get<double>()) << std::setw(14)
      << fixed(row["not_in_release"].get<double>()) << "\n";
  }
}

std::string make_digest(const json& document, bool summary_only) {
  const json& body = document["body"];
  std::ostringstream t;
  t << "synthetic data disclosure risk report\n";
  t << "tool version " << document["header"]["tool_version"].get<std::string>()
    << "    config " << document["header"]["config_hash"].get<std::string>()
    << "\n\n";
  if (body.contains("synthesis")) {
    const json& s = body["synthesis"];
    t << "synthesis\n";
    t << "  synthesizer             " << s["synthesizer"].get<std::string>()
      << "\n";
    t << "  releases                " << s["releases"].get<std::size_t>()
      << "\n";
    t << "  retained draws          " << s["draws"].get<std::size_t>() << "\n";
    t << "  manifest                " << s["manifest"].get<std::string>()
      << "\n\n";
  }
  if (body.contains("attribute")) {
    digest_attribute(t, body["attribute"], summary_only);
    t << "\n";
  }
  if (body.contains("identification")) {
    digest_identification(t, body["identification"], summary_only);
    t << "\n";
  }
  const json& warnings = body["warnings"];
  if (!warnings.empty()) {
    t << "warnings\n";
    for (const auto& w : warnings)
      t << "  - " << w["message"].get<std::string>() << "\n";
  }
  return t.str();
}

json attribute_section(const AttributeRiskResult& res, bool summary_only) {
  json a;
  a["mode"] = "categorical";
  a["records"] = res.records.size();
  a["mean_true_probability"] = res.summary.mean_true_probability;
  a["median_true_probability"] = res.summary.median_true_probability;
  json ranks = json::object();
  for (const auto& [rank, count] : res.summary.rank_counts)
    ranks[std::to_string(rank)] = count;
  a["rank_distribution"] = std::move(ranks);
  a["dropped_draws"] = res.total_dropped_draws;
  if (!summary_only) {
    json detail = json::array();
    for (const auto& r : res.records)
      detail.push_back({{"row_id", r.row_id},
                        {"guesses", r.posterior.size()},
                        {"rank", r.rank},
                        {"true_probability", r.true_probability},
                        {"dropped_draws", r.dropped_draws}});
    a["detail"] = std::move(detail);
  }
  return a;
}

json geo_section(const GeoRiskResult& res, bool summary_only) {
  json a;
  a["mode"] = "geographic";
  a["records"] = res.records.size();
  a["pct_map_correct"] = res.map_summary.pct_map_correct;
  a["pct_map_correct_unique"] = res.map_summary.pct_map_correct_unique;
  a["mean_mode_distance"] = res.map_summary.mean_mode_distance;
  a["dropped_draws"] = res.total_dropped_draws;
  if (!summary_only) {
    json detail = json::array();
    for (const auto& r : res.records)
      detail.push_back({{"row_id", r.row_id},
                        {"r1", r.r1},
                        {"r2", r.r2},
                        {"tie", r.tie},
                        {"map_correct", r.map_correct},
                        {"mode_x", r.mode.x},
                        {"mode_y", r.mode.y},
                        {"dropped_draws", r.dropped_draws}});
    a["detail"] = std::move(detail);
  }
  return a;
}

json identification_section(const MatchResult& res, const Dataset& data,
                            bool summary_only) {
  json s;
  s["targets"] = res.targets.size();
  s["summary"] = {
      {"expected_match_risk", res.summary.expected_match_risk},
      {"true_match_rate", res.summary.true_match_rate},
      {"false_match_rate", res.summary.false_match_rate},
      {"unique_matches", res.summary.unique_matches},
      {"false_rate_undefined", res.summary.false_rate_undefined},
      {"evaluated_targets", res.summary.evaluated_targets},
      {"excluded_targets", res.summary.excluded_targets}};
  if (!summary_only) {
    json detail = json::array();
    for (const auto& tm : res.targets) {
      json matches = json::array();
      for (std::size_t k = 0; k < tm.rows.size(); ++k)
        if (tm.probs[k] > 0.0)
          matches.push_back({{"row_id", data.row_id(tm.rows[k])},
                             {"probability", tm.probs[k]}});
      json row = {{"target_id", tm.target_id},
                  {"c", tm.c},
                  {"max_prob", tm.max_prob},
                  {"not_in_release", tm.not_in_release},
                  {"has_truth", tm.has_truth},
                  {"matches", std::move(matches)}};
      if (tm.has_truth) {
        row["t"] = tm.t_bit ? 1 : 0;
        row["k"] = tm.k_bit ? 1 : 0;
        row["f"] = tm.f_bit ? 1 : 0;
      }
      detail.push_back(std::move(row));
    }
    s["detail"] = std::move(detail);
  }
  return s;
}

// Plot-ready tables next to the report; one row per record / target.
// Doubles use the same shortest round-trip form as the JSON report.
std::string csv_num(const json& v) { return v.dump(); }

void write_attribute_csv(const json& a, const std::filesystem::path& path) {
  std::ofstream out(path);
  const json& detail = a["detail"];
  if (a["mode"] == "categorical") {
    out << "row_id,rank,true_probability,guesses,dropped_draws\n";
    for (const auto& r : detail)
      out << r["row_id"].get<std::int64_t>() << ','
          << r["rank"].get<std::size_t>() << ','
          << csv_num(r["true_probability"]) << ','
          << r["guesses"].get<std::size_t>() << ','
          << r["dropped_draws"].get<std::size_t>() << '\n';
  } else {
    out << "row_id,r1,r2,tie,map_correct,mode_x,mode_y,dropped_draws\n";
    for (const auto& r : detail)
      out << r["row_id"].get<std::int64_t>() << ',' << csv_num(r["r1"]) << ','
          << r["r2"].get<std::uint64_t>() << ',' << (r["tie"].get<bool>() ? 1 : 0)
          << ',' << (r["map_correct"].get<bool>() ? 1 : 0) << ','
          << csv_num(r["mode_x"]) << ',' << csv_num(r["mode_y"]) << ','
          << r["dropped_draws"].get<std::size_t>() << '\n';
  }
}

void write_identification_csv(const json& s,
                              const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "target_id,c,t,k,f,max_prob,not_in_release\n";
  for (const auto& r : s["detail"]) {
    out << r["target_id"].get<std::int64_t>() << ','
        << r["c"].get<std::size_t>() << ',';
    if (r["has_truth"].get<bool>())
      out << r["t"].get<int>() << ',' << r["k"].get<int>() << ','
          << r["f"].get<int>() << ',';
    else
      out << ",,,";
    out << csv_num(r["max_prob"]) << ',' << csv_num(r["not_in_release"])
        << '\n';
  }
}

}  // namespace

RiskReport run(const RunConfig& config) {
  const unsigned jobs = config.jobs == 0 ? default_jobs() : config.jobs;
  auto schema = std::make_shared<const Schema>(load_schema(config.schema_path));
  Dataset data = load_dataset(config.data, schema);

  json body;
  json warnings = json::array();
  auto warn = [&](const std::string& code, const std::string& message) {
    warnings.push_back({{"code", code}, {"message", message}});
  };

  std::optional<SyntheticRelease> release;
  if (wants_synthesis(config.pipeline)) {
    release = make_release(config, data, jobs);
    std::filesystem::path manifest =
        write_release(*release, config.out_dir / "release", "synthetic");
    body["synthesis"] = {{"synthesizer", release->provenance.synthesizer},
                         {"seed", release->provenance.seed},
                         {"releases", release->releases()},
                         {"draws", release->draw_count()},
                         {"manifest", manifest.string()}};
  } else {
    release = load_release(config.release_manifest, schema);
  }

  if (wants_attribute(config.pipeline)) {
    AttributeScenario scenario = make_scenario(config, *schema);
    std::vector<std::size_t> rows = resolve_records(config, data);
    if (config.grid) {
      GeoGrid grid;
      grid.x_var = resolve_var(*schema, config.grid->x, "grid");
      grid.y_var = resolve_var(*schema, config.grid->y, "grid");
      grid.x_min = config.grid->x_min;
      grid.x_max = config.grid->x_max;
      grid.y_min = config.grid->y_min;
      grid.y_max = config.grid->y_max;
      grid.x_steps = config.grid->x_steps;
      grid.y_steps = config.grid->y_steps;
      GeoRiskResult res =
          run_geo_risk(*release, data, scenario, grid, rows, jobs);
      body["attribute"] = geo_section(res, config.summary_only);
      if (res.total_dropped_draws > 0)
        warn("dropped_draws",
             std::to_string(res.total_dropped_draws) +
                 " retained draws dropped across records (proposal density "
                 "underflow)");
      std::size_t ties = 0;
      for (const auto& r : res.records) ties += r.tie ? 1 : 0;
      if (ties > 0)
        warn("modal_ties", std::to_string(ties) +
                               " records had tied posterior modes; lowest "
                               "grid index reported");
    } else {
      GuessConfig gc = make_guess_config(config, data);
      AttributeRiskResult res =
          run_attribute_risk(*release, data, scenario, gc, rows, jobs);
      body["attribute"] = attribute_section(res, config.summary_only);
      if (res.total_dropped_draws > 0)
        warn("dropped_draws",
             std::to_string(res.total_dropped_draws) +
                 " retained draws dropped across records (proposal density "
                 "underflow)");
    }
  }

  if (wants_identification(config.pipeline)) {
    TargetFile targets = load_targets(config.targets, *schema);
    MatchConfig mc = make_match_config(config, *schema);
    MatchResult res =
        monte_carlo_identification(targets, *release, data, mc,
                                   derive_seed(config.seed, kMatchTag), jobs);
    body["identification"] =
        identification_section(res, data, config.summary_only);
    if (res.summary.false_rate_undefined)
      warn("no_unique_matches",
           "no target had a unique match (s = 0); false match rate reported "
           "as 0");
    if (res.summary.excluded_targets > 0)
      warn("targets_without_truth",
           std::to_string(res.summary.excluded_targets) +
               " targets lack true_row_id and are excluded from the T/K/F "
               "summaries");
  }

  body["warnings"] = std::move(warnings);
  const json normalized = normalized_config(config);
  body["config"] = normalized;

  RiskReport report;
  report.document = {{"format", "risk-report"},
                     {"version", kReportVersion},
                     {"header",
                      {{"tool_version", kToolVersion},
                       {"config_hash", config_hash(normalized)},
                       {"generated_at", utc_timestamp()}}},
                     {"body", std::move(body)}};
  report.text = make_digest(report.document, config.summary_only);

  std::filesystem::create_directories(config.out_dir);
  report.json_path = config.report_path.empty()
                         ? config.out_dir / "report.json"
                         : config.report_path;
  report.text_path = report.json_path;
  report.text_path.replace_extension(".txt");
  {
    std::ofstream out(report.json_path);
    if (!out)
      throw ConfigError("cli_report", "run",
                        "cannot write report to " + report.json_path.string());
    out << report.document.dump(2) << '\n';
  }
  {
    std::ofstream out(report.text_path);
    out << report.text;
  }
  const json& final_body = report.document["body"];
  if (!config.summary_only) {
    if (final_body.contains("attribute"))
      write_attribute_csv(final_body["attribute"],
                          config.out_dir / "attribute_detail.csv");
    if (final_body.contains("identification"))
      write_identification_csv(final_body["identification"],
                               config.out_dir / "identification_detail.csv");
  }
  return report;
}

}  // namespace synrisk
