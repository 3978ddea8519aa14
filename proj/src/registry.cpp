#include "molpla/registry.hpp"

namespace molpla {

namespace detail {
extern const char* const kBuiltinPatternRegistry;
}

namespace {

Hybridization hybridization_from_name(const std::string& s) {
  if (s == "S") return Hybridization::S;
  if (s == "SP") return Hybridization::SP;
  if (s == "SP2") return Hybridization::SP2;
  if (s == "SP3") return Hybridization::SP3;
  if (s == "SP3D") return Hybridization::SP3D;
  if (s == "SP3D2") return Hybridization::SP3D2;
  throw MolError("unknown hybridization '" + s + "' in pattern registry");
}

void apply_constraints(Pattern& p, const nlohmann::json& constraints) {
  for (const auto& [key, c] : constraints.items()) {
    const int idx = std::stoi(key);
    if (idx < 0 || idx >= static_cast<int>(p.atoms.size())) {
      throw MolError("pattern constraint refers to atom " + key + " outside the pattern");
    }
    PatternAtom& a = p.atoms[idx];
    for (const auto& [field, v] : c.items()) {
      if (field == "degree") {
        a.degree = v.get<int>();
      } else if (field == "h_count") {
        a.h_count = v.get<int>();
      } else if (field == "in_ring") {
        a.in_ring = v.get<bool>();
      } else if (field == "hetero_degree") {
        a.hetero_degree = v.get<int>();
      } else if (field == "formal_charge") {
        a.formal_charge = v.get<int>();
      } else if (field == "aromatic") {
        if (v.is_null()) {
          a.aromatic.reset();
        } else {
          a.aromatic = v.get<bool>();
        }
      } else if (field == "hybridization") {
        a.hybridization = hybridization_from_name(v.get<std::string>());
      } else {
        throw MolError("unknown pattern constraint '" + field + "'");
      }
    }
  }
}

}  // namespace

const PatternRegistry& PatternRegistry::builtin() {
  static const PatternRegistry reg =
      from_json(nlohmann::json::parse(detail::kBuiltinPatternRegistry));
  return reg;
}

PatternRegistry PatternRegistry::from_json(const nlohmann::json& doc) {
  PatternRegistry reg;
  reg.version_ = doc.at("version").get<std::string>();
  const int size = doc.at("size").get<int>();
  for (const auto& e : doc.at("patterns")) {
    RegistryEntry entry;
    entry.index = e.at("index").get<int>();
    entry.name = e.at("name").get<std::string>();
    if (entry.index != static_cast<int>(reg.entries_.size())) {
      throw MolError("pattern registry indices must be dense and ordered");
    }
    if (!e.at("pattern_smiles").is_null()) {
      entry.pattern_smiles = e.at("pattern_smiles").get<std::string>();
      entry.pattern = Pattern::from_smiles(*entry.pattern_smiles);
      if (e.contains("constraints")) {
        entry.constraints = e.at("constraints");
        apply_constraints(entry.pattern, entry.constraints);
      }
    }
    reg.entries_.push_back(std::move(entry));
  }
  if (static_cast<int>(reg.entries_.size()) != size) {
    throw MolError("pattern registry size does not match its entries");
  }
  return reg;
}

std::optional<int> PatternRegistry::index_of(const std::string& name) const {
  for (const RegistryEntry& e : entries_) {
    if (e.name == name) return e.index;
  }
  return std::nullopt;
}

ConditionVector PatternRegistry::evaluate(const MolGraph& rgroup) const {
  ConditionVector bits(entries_.size(), 0);
  for (const RegistryEntry& e : entries_) {
    if (e.pattern_smiles && has_match(rgroup, e.pattern)) bits[e.index] = 1;
  }
  return bits;
}

ConditionVector PatternRegistry::from_names(const std::vector<std::string>& names) const {
  ConditionVector bits(entries_.size(), 0);
  for (const std::string& n : names) {
    const auto idx = index_of(n);
    if (!idx) throw MolError("unknown condition pattern '" + n + "'");
    bits[*idx] = 1;
  }
  return bits;
}

std::vector<std::string> PatternRegistry::names_of(const ConditionVector& bits) const {
  std::vector<std::string> out;
  for (size_t i = 0; i < bits.size() && i < entries_.size(); ++i) {
    if (bits[i]) out.push_back(entries_[i].name);
  }
  return out;
}

nlohmann::json PatternRegistry::to_json() const {
  nlohmann::json pats = nlohmann::json::array();
  for (const RegistryEntry& e : entries_) {
    pats.push_back({{"index", e.index},
                    {"name", e.name},
                    {"pattern_smiles", e.pattern_smiles ? nlohmann::json(*e.pattern_smiles) : nlohmann::json()},
                    {"constraints", e.constraints}});
  }
  return {{"version", version_}, {"size", size()}, {"patterns", pats}};
}

ConditionVector condition_vector(const MolGraph& rgroup) {
  return PatternRegistry::builtin().evaluate(rgroup);
}

}  // namespace molpla
