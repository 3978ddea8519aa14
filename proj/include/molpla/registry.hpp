#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "molpla/chem.hpp"

namespace molpla {

// Bit b is 1 iff registry pattern b occurs in the R-group.
using ConditionVector = std::vector<std::uint8_t>;

struct RegistryEntry {
  int index = 0;
  std::string name;
  std::optional<std::string> pattern_smiles;  // nullopt for reserved slots
  nlohmann::json constraints = nlohmann::json::object();
  Pattern pattern;
};

class PatternRegistry {
 public:
  // The registry compiled into the library (data/patterns_v1.json).
  static const PatternRegistry& builtin();
  static PatternRegistry from_json(const nlohmann::json& doc);

  const std::string& version() const { return version_; }
  int size() const { return static_cast<int>(entries_.size()); }
  const std::vector<RegistryEntry>& entries() const { return entries_; }
  std::optional<int> index_of(const std::string& name) const;

  ConditionVector evaluate(const MolGraph& rgroup) const;
  // Names resolve to bits; throws MolError on unknown names.
  ConditionVector from_names(const std::vector<std::string>& names) const;
  std::vector<std::string> names_of(const ConditionVector& bits) const;

  nlohmann::json to_json() const;

 private:
  std::string version_;
  std::vector<RegistryEntry> entries_;
};

ConditionVector condition_vector(const MolGraph& rgroup);

}  // namespace molpla
