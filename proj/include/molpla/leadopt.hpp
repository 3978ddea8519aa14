#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "molpla/decompose.hpp"
#include "molpla/encoder.hpp"
#include "molpla/retrieval.hpp"

namespace molpla {

class NoStubError : public MolError {
 public:
  using MolError::MolError;
};

class DegenerateError : public MolError {
 public:
  using MolError::MolError;
};

struct Descriptors {
  int heavy_atoms = 0;
  double mol_weight = 0;
  int rings = 0;
  int rotatable_bonds = 0;
  int hbd = 0;
  int hba = 0;

  nlohmann::json to_json() const;
};

Descriptors descriptor_report(const MolGraph& g);

struct ReattachOptions {
  // Also propose a bridging atom (C, N, O, S) between the two boundary atoms.
  bool enumerate_linker_element = false;
};

struct ReattachmentCandidate {
  MolGraph molecule;
  std::string smiles;
  std::string key;
  BondAttrs filled_bond;
  int linker_element = 0;  // atomic number of the inserted atom, 0 if none
  std::string source_rgroup_key;
  double score = 0;
  bool valid = false;
};

// Joins the template atom bonded to `stub_index` with the R-group atom bonded
// to its single stub. Bond types single/double/triple (aromatic when both
// boundary atoms are aromatic ring atoms) are enumerated together with the
// hydrogen counts each allowed valence implies; only valid, connected
// results survive, deduplicated by canonical key. `attempted`, when given,
// receives the number of enumerated graphs before the validity filter.
std::vector<ReattachmentCandidate> reattach(const MolGraph& tmpl, int stub_index, const MolGraph& rgroup,
                                            const ReattachOptions& opts = {}, int* attempted = nullptr);

struct NodeColoring {
  std::vector<double> scores;
  std::vector<double> loading;  // unit vector in embedding space
  double eigenvalue = 0;
  int iterations = 0;
  bool degenerate = false;  // all-identical node rows: scores are all zero
};

// First principal component of node vectors (rows of h), covariance 1/n.
NodeColoring pca_first_component(const Matrix& h);
NodeColoring node_pca_coloring(Model& m, const MolGraph& mol);

struct LeadCandidate {
  ReattachmentCandidate candidate;
  int retrieval_rank = 0;
  Descriptors after;
};

struct LeadReport {
  std::string original;
  std::string query_template;
  int stub_index = -1;
  int cut_bond = -1;
  ConditionVector condition;
  Descriptors before;
  std::vector<LeadCandidate> candidates;  // retrieval score descending
  int attempted = 0;
  int valid = 0;
  double valid_fraction() const { return attempted ? static_cast<double>(valid) / attempted : 0.0; }

  nlohmann::json to_json() const;
};

// Splits mol at an acyclic bond into (template side containing `core_atom`,
// R-group side) with stubs, the same way decompose does.
DecompositionInstance split_at_bond(const MolGraph& mol, int bond, int core_atom);

LeadReport optimize_lead(Model& m, const MolGraph& mol, int bond, int core_atom, const ConditionVector& cond,
                         const RGroupLibrary& lib, int k);

}  // namespace molpla
