#pragma once

#include "json.hpp"

#include "molpla/molgraph.hpp"

namespace molpla {

// Line-JSON form {atoms: [...], bonds: [...]}. Masked attribute values are
// written as the string "MASK"; enum attributes as their integer codes.
nlohmann::json graph_to_json(const MolGraph& g);
MolGraph graph_from_json(const nlohmann::json& j);

}  // namespace molpla
