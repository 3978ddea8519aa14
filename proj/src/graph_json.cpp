#include "molpla/graph_json.hpp"

namespace molpla {

namespace {

using nlohmann::json;

json masked_or(bool masked, const json& value) { return masked ? json("MASK") : value; }

bool is_mask(const json& v) { return v.is_string() && v.get<std::string>() == "MASK"; }

int int_field(const json& obj, const char* key) {
  if (!obj.contains(key)) throw GraphError(std::string("graph JSON missing field '") + key + "'");
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw GraphError(std::string("graph JSON field '") + key + "' is not an integer");
  return v.get<int>();
}

Flag flag_field(const json& obj, const char* key) {
  const json& v = obj.at(key);
  if (is_mask(v)) return Flag::Mask;
  return v.get<bool>() ? Flag::Yes : Flag::No;
}

json flag_value(Flag f) {
  if (f == Flag::Mask) return "MASK";
  return f == Flag::Yes;
}

}  // namespace

json graph_to_json(const MolGraph& g) {
  json atoms = json::array();
  for (const AtomAttrs& a : g.atoms()) {
    const bool m = a.is_stub;
    atoms.push_back({
        {"atomic_number", masked_or(m, a.atomic_number)},
        {"formal_charge", masked_or(m, a.formal_charge)},
        {"chirality_tag", masked_or(m, static_cast<int>(a.chirality))},
        {"hybridization", masked_or(m, static_cast<int>(a.hybridization))},
        {"num_explicit_hs", masked_or(m, a.num_hs)},
        {"aromatic", flag_value(a.aromatic)},
        {"is_stub", a.is_stub},
    });
  }
  json bonds = json::array();
  for (const Bond& b : g.bonds()) {
    const bool m = b.attrs.is_masked();
    bonds.push_back({
        {"begin", b.begin},
        {"end", b.end},
        {"bond_type", masked_or(m, static_cast<int>(b.attrs.type))},
        {"bond_direction", masked_or(m, static_cast<int>(b.attrs.direction))},
        {"stereo", masked_or(m, static_cast<int>(b.attrs.stereo))},
        {"conjugated", flag_value(b.attrs.conjugated)},
        {"aromatic", flag_value(b.attrs.aromatic)},
    });
  }
  return {{"atoms", atoms}, {"bonds", bonds}};
}

MolGraph graph_from_json(const json& j) {
  MolGraph g;
  try {
    for (const json& a : j.at("atoms")) {
      if (a.value("is_stub", false)) {
        g.add_atom(AtomAttrs::stub());
        continue;
      }
      AtomAttrs attrs;
      attrs.atomic_number = int_field(a, "atomic_number");
      attrs.formal_charge = int_field(a, "formal_charge");
      attrs.chirality = static_cast<Chirality>(int_field(a, "chirality_tag"));
      attrs.hybridization = static_cast<Hybridization>(int_field(a, "hybridization"));
      attrs.num_hs = int_field(a, "num_explicit_hs");
      attrs.aromatic = flag_field(a, "aromatic");
      if (attrs.atomic_number < 1 || attrs.atomic_number > 118) throw GraphError("atomic_number out of range");
      if (attrs.formal_charge < -5 || attrs.formal_charge > 5) throw GraphError("formal_charge out of range");
      if (attrs.num_hs < 0 || attrs.num_hs > 8) throw GraphError("num_explicit_hs out of range");
      g.add_atom(attrs);
    }
    for (const json& b : j.at("bonds")) {
      BondAttrs attrs;
      if (is_mask(b.at("bond_type"))) {
        attrs = BondAttrs::masked();
      } else {
        attrs.type = static_cast<BondType>(int_field(b, "bond_type"));
        attrs.direction = static_cast<BondDirection>(int_field(b, "bond_direction"));
        attrs.stereo = static_cast<BondStereo>(int_field(b, "stereo"));
        attrs.conjugated = flag_field(b, "conjugated");
        attrs.aromatic = flag_field(b, "aromatic");
        if (static_cast<int>(attrs.type) >= vocab::kBondType - 1) throw GraphError("bond_type out of range");
      }
      g.add_bond(int_field(b, "begin"), int_field(b, "end"), attrs);
    }
  } catch (const json::exception& e) {
    throw GraphError(std::string("malformed graph JSON: ") + e.what());
  }
  return g;
}

}  // namespace molpla
