#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "synrisk/dataset.hpp"
#include "synrisk/schema.hpp"

namespace synrisk {

// One intruder target: the externally known values plus, when the target is
// a sample record, the row_id of its true match.
struct Target {
  std::int64_t target_id = 0;
  // (variable index, value) pairs; every index is an intruder_known variable.
  std::vector<std::pair<std::size_t, Cell>> known_values;
  std::optional<std::int64_t> true_row_id;
};

class TargetFile {
 public:
  explicit TargetFile(std::vector<Target> targets);

  const std::vector<Target>& targets() const { return targets_; }
  std::size_t size() const { return targets_.size(); }

 private:
  std::vector<Target> targets_;
};

// CSV with header columns drawn from the intruder-known variable names plus
// optional "target_id" and "true_row_id". An empty cell means the value is
// not known for that target.
TargetFile load_targets(const std::filesystem::path& path, const Schema& schema);

// Build targets directly from sample records: known values are copied from
// the intruder-known columns and true_row_id is set.
TargetFile targets_from_records(const Dataset& data,
                                const std::vector<std::size_t>& rows);

}  // namespace synrisk
