#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "molpla/molgraph.hpp"

namespace molpla {

// Parses the supported SMILES subset: organic subset and bracket atoms
// (isotopes ignored), ring closures including %nn, branches, '.',
// '*' stubs and '~' masked bonds, '@'/'@@' and '/'/'\' markers.
// Atoms are numbered in order of appearance. check_valence=false accepts
// query graphs such as substructure patterns.
MolGraph parse_smiles(std::string_view text, bool check_valence = true);

struct SmilesWriteOptions {
  bool canonical = false;      // order atoms by canonical rank
  bool include_stereo = true;  // chirality and bond directions
};

struct WrittenSmiles {
  std::string smiles;
  // order[k] = index in the source graph of the k-th atom written, which is
  // also its index after parsing the string back.
  std::vector<int> order;
};

std::string write_smiles(const MolGraph& g, const SmilesWriteOptions& opts = {});
WrittenSmiles write_smiles_ordered(const MolGraph& g, const SmilesWriteOptions& opts = {});

// Writes atoms following an explicit priority (lower value first).
WrittenSmiles write_smiles_ranked(const MolGraph& g, const std::vector<int>& ranks,
                                  bool include_stereo);

}  // namespace molpla
