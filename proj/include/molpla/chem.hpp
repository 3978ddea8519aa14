#pragma once

#include <optional>
#include <string>
#include <vector>

#include "molpla/molgraph.hpp"

namespace molpla {

// ---------------------------------------------------------------------------
// Rings
// ---------------------------------------------------------------------------

struct RingInfo {
  std::vector<std::vector<int>> rings;       // atom cycles, each in walk order
  std::vector<std::vector<int>> ring_bonds;  // bond indices per ring
  std::vector<bool> atom_in_ring;
  std::vector<bool> bond_in_ring;

  int num_rings() const { return static_cast<int>(rings.size()); }
};

// Minimum cycle basis (Horton candidates + GF(2) elimination).
RingInfo ring_info(const MolGraph& g);

// Ring membership only, via bridge detection. Cheaper than ring_info.
std::vector<bool> bonds_in_ring(const MolGraph& g);
std::vector<bool> atoms_in_ring(const MolGraph& g);

// ---------------------------------------------------------------------------
// Valence
// ---------------------------------------------------------------------------

struct ValenceViolation {
  int atom;
  double valence;
  int max_allowed;
};

// Allowed valences for an element/charge pair; empty if unknown.
std::vector<int> allowed_valences(int atomic_number, int formal_charge);

// Minimal valence of a non-stub atom: non-aromatic bond orders + one per
// aromatic bond + hydrogens. Masked bonds are skipped.
int min_valence(const MolGraph& g, int atom);

// Per-atom check on the minimal valence, then a Kekule test: aromatic atoms
// that need a pi bond must pair up along aromatic bonds. Atoms of a failing
// aromatic system are reported with a half-integer valence.
std::vector<ValenceViolation> valence_check(const MolGraph& g);

// ---------------------------------------------------------------------------
// Canonicalization
// ---------------------------------------------------------------------------

// Canonical atom ranks (a permutation of 0..n-1).
std::vector<int> canonical_ranks(const MolGraph& g);

// Canonical SMILES without stereo; identical for all atom orderings of a
// graph.
std::string canonical_key(const MolGraph& g);

// ---------------------------------------------------------------------------
// Substructure patterns
// ---------------------------------------------------------------------------

struct PatternAtom {
  std::optional<int> atomic_number;  // nullopt: any non-stub atom
  std::optional<bool> aromatic;
  std::optional<int> formal_charge;
  std::optional<int> degree;  // all neighbours, stub attachments included
  std::optional<int> h_count;
  std::optional<bool> in_ring;
  std::optional<Hybridization> hybridization;
  std::optional<int> hetero_degree;  // neighbours that are neither C nor stub
};

struct PatternBond {
  int begin = 0;
  int end = 0;
  std::optional<BondType> type;  // nullopt: any non-masked bond
};

struct Pattern {
  std::vector<PatternAtom> atoms;
  std::vector<PatternBond> bonds;

  // A pattern from SMILES: element, aromaticity and charge of every atom and
  // every written bond type are constrained; '*' and '~' are wildcards.
  static Pattern from_smiles(const std::string& smiles);
};

using AtomMapping = std::vector<int>;  // pattern atom -> graph atom

// All embeddings of a connected pattern, sorted lexicographically. Stubs and
// masked bonds never participate.
std::vector<AtomMapping> match_pattern(const MolGraph& g, const Pattern& p);
bool has_match(const MolGraph& g, const Pattern& p);

}  // namespace molpla
