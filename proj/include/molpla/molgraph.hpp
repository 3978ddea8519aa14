#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace molpla {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class MolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public MolError {
 public:
  using MolError::MolError;
};

class ValenceError : public MolError {
 public:
  using MolError::MolError;
};

class GraphError : public MolError {
 public:
  using MolError::MolError;
};

// ---------------------------------------------------------------------------
// Attribute vocabularies
//
// Every attribute is stored as its embedding-table index. The last index of
// each table is the MASK slot and never encodes a chemical value.
// ---------------------------------------------------------------------------

namespace vocab {
inline constexpr int kAtomicNumber = 128;
inline constexpr int kFormalCharge = 12;  // -5..+5, MASK
inline constexpr int kChirality = 9;
inline constexpr int kHybridization = 9;
inline constexpr int kNumHs = 10;  // 0..8, MASK
inline constexpr int kAtomAromatic = 3;

inline constexpr int kBondType = 22;
inline constexpr int kBondDirection = 7;
inline constexpr int kBondStereo = 6;
inline constexpr int kConjugated = 3;
inline constexpr int kBondAromatic = 3;

inline constexpr int kNumAtomFields = 6;
inline constexpr int kNumBondFields = 5;

inline constexpr int kAtomSizes[kNumAtomFields] = {
    kAtomicNumber, kFormalCharge, kChirality, kHybridization, kNumHs, kAtomAromatic};
inline constexpr int kBondSizes[kNumBondFields] = {
    kBondType, kBondDirection, kBondStereo, kConjugated, kBondAromatic};
inline constexpr const char* kAtomFieldNames[kNumAtomFields] = {
    "atomic_number", "formal_charge", "chirality_tag", "hybridization", "num_explicit_hs", "aromatic"};
inline constexpr const char* kBondFieldNames[kNumBondFields] = {
    "bond_type", "bond_direction", "stereo", "conjugated", "aromatic"};
}  // namespace vocab

enum class Chirality : std::uint8_t {
  Unspecified = 0,
  TetrahedralCW = 1,   // "@@"
  TetrahedralCCW = 2,  // "@"
  Other = 3,
  Mask = 8,
};

enum class Hybridization : std::uint8_t {
  Unspecified = 0,
  S = 1,
  SP = 2,
  SP2 = 3,
  SP3 = 4,
  SP3D = 5,
  SP3D2 = 6,
  Other = 7,
  Mask = 8,
};

// Numbering follows the common cheminformatics bond-type enumeration; slots
// without a name are reserved.
enum class BondType : std::uint8_t {
  Unspecified = 0,
  Single = 1,
  Double = 2,
  Triple = 3,
  Aromatic = 12,
  Dative = 17,
  Other = 20,
  Mask = 21,
};

enum class BondDirection : std::uint8_t {
  None = 0,
  BeginWedge = 1,
  BeginDash = 2,
  EndDownRight = 3,  // '\'
  EndUpRight = 4,    // '/'
  EitherDouble = 5,
  Mask = 6,
};

enum class BondStereo : std::uint8_t {
  None = 0,
  Any = 1,
  Z = 2,
  E = 3,
  Other = 4,
  Mask = 5,
};

enum class Flag : std::uint8_t { No = 0, Yes = 1, Mask = 2 };

inline constexpr int kMaskAtomicNumber = vocab::kAtomicNumber - 1;
inline constexpr int kMaskCharge = 127;
inline constexpr int kMaskNumHs = vocab::kNumHs - 1;

struct AtomAttrs {
  int atomic_number = 6;
  int formal_charge = 0;
  Chirality chirality = Chirality::Unspecified;
  Hybridization hybridization = Hybridization::Unspecified;
  int num_hs = 0;
  Flag aromatic = Flag::No;
  bool is_stub = false;

  static AtomAttrs stub();
  static AtomAttrs element(int z, bool aromatic = false, int charge = 0, int hs = 0);

  bool is_aromatic() const { return aromatic == Flag::Yes; }
  // Index into each of the six node embedding tables, in vocab order.
  std::array<int, vocab::kNumAtomFields> vocab_indices() const;

  friend bool operator==(const AtomAttrs&, const AtomAttrs&) = default;
};

struct BondAttrs {
  BondType type = BondType::Single;
  BondDirection direction = BondDirection::None;
  BondStereo stereo = BondStereo::None;
  Flag conjugated = Flag::No;
  Flag aromatic = Flag::No;

  static BondAttrs masked();
  static BondAttrs of(BondType t);

  bool is_masked() const { return type == BondType::Mask; }
  std::array<int, vocab::kNumBondFields> vocab_indices() const;

  friend bool operator==(const BondAttrs&, const BondAttrs&) = default;
};

struct Bond {
  int begin = 0;
  int end = 0;
  BondAttrs attrs;

  int other(int atom) const { return atom == begin ? end : begin; }
  friend bool operator==(const Bond&, const Bond&) = default;
};

struct Neighbor {
  int atom;
  int bond;
};

// Attributed, hydrogen-suppressed molecular graph. Possibly disconnected.
// Neighbour lists are ordered by bond insertion, which is the reference
// order for stored chirality tags.
class MolGraph {
 public:
  MolGraph() = default;

  int add_atom(const AtomAttrs& a);
  // Throws GraphError on invalid endpoints, self loops and duplicate bonds.
  int add_bond(int begin, int end, const BondAttrs& attrs);

  int num_atoms() const { return static_cast<int>(atoms_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }
  bool empty() const { return atoms_.empty(); }

  const AtomAttrs& atom(int i) const { return atoms_[i]; }
  AtomAttrs& atom(int i) { return atoms_[i]; }
  const Bond& bond(int i) const { return bonds_[i]; }
  BondAttrs& bond_attrs(int i) { return bonds_[i].attrs; }

  std::span<const AtomAttrs> atoms() const { return atoms_; }
  std::span<const Bond> bonds() const { return bonds_; }
  std::span<const Neighbor> neighbors(int atom) const { return adjacency_[atom]; }
  int degree(int atom) const { return static_cast<int>(adjacency_[atom].size()); }

  // Bond index between a and b, or -1.
  int find_bond(int a, int b) const;

  // Connected component label per atom, labels dense from 0 in order of
  // first appearance.
  std::vector<int> components() const;
  int num_components() const;

  std::vector<int> stub_atoms() const;
  int heavy_atom_count() const;  // non-stub atoms

  // Graph induced by `keep` (atom indices, any order). Atoms are renumbered in
  // ascending original index; bonds keep their relative order.
  MolGraph induced_subgraph(std::span<const int> keep) const;

  // Relabel atoms: new index of atom i is perm[i]. Bond order is preserved.
  MolGraph permuted(std::span<const int> perm) const;

  // Disjoint union, `other`'s atoms appended after this graph's.
  void append(const MolGraph& other);

  friend bool operator==(const MolGraph& a, const MolGraph& b) {
    return a.atoms_ == b.atoms_ && a.bonds_ == b.bonds_;
  }

 private:
  std::vector<AtomAttrs> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

// Element table helpers.
int element_from_symbol(std::string_view symbol);  // 0 if unknown
std::string element_symbol(int atomic_number);
double atomic_mass(int atomic_number);

// Sum of bond orders used for implicit-H derivation; masked bonds count 1.
double bond_order(BondType t);

// Recompute derived attributes (hybridization, bond conjugation) from the
// graph topology. Masked bonds and stubs are ignored.
void perceive(MolGraph& g);

}  // namespace molpla
