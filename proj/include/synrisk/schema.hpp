#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace synrisk {

enum class VarKind { categorical, continuous };

struct VariableDef {
  std::string name;
  VarKind kind = VarKind::categorical;
  std::vector<std::string> levels;  // categorical only, cardinality >= 2
  double lower = 0.0;               // continuous only, lower < upper
  double upper = 0.0;
  bool synthesized = false;
  bool intruder_known = false;

  std::size_t cardinality() const { return levels.size(); }
  bool is_categorical() const { return kind == VarKind::categorical; }
};

// Variable definitions for a rectangular microdata file. Immutable after
// construction; the constructor enforces all invariants (unique names,
// cardinality >= 2, lower < upper, at least one synthesized variable).
class Schema {
 public:
  explicit Schema(std::vector<VariableDef> variables);

  const std::vector<VariableDef>& variables() const { return vars_; }
  const VariableDef& variable(std::size_t j) const { return vars_[j]; }
  std::size_t size() const { return vars_.size(); }

  // Index of a variable by name; throws SchemaError if absent.
  std::size_t index_of(const std::string& name) const;
  std::optional<std::size_t> find(const std::string& name) const;

  // Level code for a label of categorical variable j; nullopt if undeclared.
  std::optional<std::int32_t> level_code(std::size_t j,
                                         const std::string& label) const;

 private:
  std::vector<VariableDef> vars_;
};

// Index sets from the synthesized x intruder_known split. The first two are
// disjoint and exhaustive; the last two are their intruder-known subsets.
struct Partition {
  std::vector<std::size_t> synthesized;
  std::vector<std::size_t> unsynthesized;
  std::vector<std::size_t> known_synthesized;    // A_s
  std::vector<std::size_t> known_unsynthesized;  // A_us
  bool fully_synthetic = false;
};

Partition partition(const Schema& schema);

// Number of cells in the full contingency table (product of categorical
// cardinalities), exact and overflow-checked.
std::uint64_t enumerate_cells(const Schema& schema);

// JSON document IO. Per-variable keys: "name", "kind" ("categorical" |
// "continuous"), "levels" (categorical), "lower"/"upper" (continuous),
// "synthesized", "intruder_known".
Schema load_schema(const std::filesystem::path& path);
Schema schema_from_json_text(const std::string& text,
                             const std::string& origin = "<string>");
void write_schema(const Schema& schema, const std::filesystem::path& path);

}  // namespace synrisk
