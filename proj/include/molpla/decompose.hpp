#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "molpla/molgraph.hpp"

namespace molpla {

class NoRingError : public MolError {
 public:
  using MolError::MolError;
};

class MultiAttachmentError : public MolError {
 public:
  using MolError::MolError;
};

class EmptySubsetError : public MolError {
 public:
  using MolError::MolError;
};

// Which acyclic single bonds may be cut when enumerating putative cores.
struct RuleSet {
  bool ring_to_chain = true;  // ring atom - non-ring atom
  bool amide = true;          // C(=O)-N
  bool ester = true;          // C(=O)-O-C
  bool amine = true;          // C-N, N not acylated or sulfonylated
  bool ether = true;          // C-O-C, neither C a carbonyl
  bool sulfonamide = true;    // S(=O)(=O)-N
};

// Atoms remaining after iteratively deleting degree-1 non-ring atoms; empty
// when g is acyclic.
std::vector<int> murcko_atoms(const MolGraph& g);
MolGraph murcko_scaffold(const MolGraph& g);

std::vector<bool> cuttable_bonds(const MolGraph& g, const RuleSet& rules);

struct CoreCandidate {
  std::vector<int> atoms;  // sorted atom indices in g
  std::string key;         // canonical key of the induced core graph
  bool is_murcko = false;
};

inline constexpr int kDefaultMaxCores = 10;
inline constexpr int kMaxSubtreeEnumeration = 20000;

// Murcko scaffold first, then the remaining candidates in enumeration order.
// Throws NoRingError for acyclic input.
std::vector<CoreCandidate> enumerate_putative_cores(const MolGraph& g, const RuleSet& rules,
                                                    int max_cores = kDefaultMaxCores);

struct Branch {
  std::vector<int> atoms;  // sorted
  int cut_bond = -1;
  int core_atom = -1;
  int r_atom = -1;
};

// Branches ordered by their smallest atom index.
std::vector<Branch> identify_rgroups(const MolGraph& g, const std::vector<int>& core_atoms);

struct CutRecord {
  int core_atom = -1;  // in the original graph
  int r_atom = -1;     // in the original graph
  BondAttrs original_bond;
  int stub_q = -1;  // stub atom index in the query template
  int stub_r = -1;  // stub atom index in the R-group graph
  int linker_node_m = -1;
  int rgroup = -1;  // index into DecompositionInstance::rgroups
};

struct DecompositionInstance {
  MolGraph original;
  MolGraph query;
  std::vector<MolGraph> rgroups;
  std::vector<CutRecord> cuts;
  int core_id = 0;
  int subset_id = 0;
  // Atom provenance: original index per atom, -1 for stubs.
  std::vector<int> query_atom_map;
  std::vector<std::vector<int>> rgroup_atom_maps;
};

// Decouples the branches whose indices are listed in `subset`.
DecompositionInstance decompose(const MolGraph& g, const std::vector<int>& core_atoms,
                                const std::vector<Branch>& branches,
                                const std::vector<int>& subset);
DecompositionInstance decompose(const MolGraph& g, const std::vector<int>& core_atoms,
                                const std::vector<int>& subset);

// One instance per non-empty branch subset; subset_id is the bit mask
// (bit i selects branch i), in increasing order.
std::vector<DecompositionInstance> enumerate_decompositions(const MolGraph& g,
                                                            const std::vector<int>& core_atoms,
                                                            int core_id = 0);

// Deletes stubs and restores every cut bond with its original attributes.
MolGraph remerge(const DecompositionInstance& inst);

std::uint64_t fnv1a64(std::string_view s);

}  // namespace molpla
