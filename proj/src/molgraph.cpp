#include "molpla/molgraph.hpp"

#include <algorithm>
#include <array>
#include <queue>

namespace molpla {

namespace {

constexpr std::array<const char*, 119> kSymbols = {
    "*",  "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg", "Al", "Si",
    "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu",
    "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru",
    "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr",
    "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W",
    "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac",
    "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf",
    "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

// Standard atomic weights, Z = 1..54.
constexpr std::array<double, 55> kMasses = {
    0.0,     1.008,   4.0026,  6.94,    9.0122,  10.81,   12.011,  14.007,  15.999,  18.998,
    20.180,  22.990,  24.305,  26.982,  28.085,  30.974,  32.06,   35.45,   39.948,  39.098,
    40.078,  44.956,  47.867,  50.942,  51.996,  54.938,  55.845,  58.933,  58.693,  63.546,
    65.38,   69.723,  72.630,  74.922,  78.971,  79.904,  83.798,  85.468,  87.62,   88.906,
    91.224,  92.906,  95.95,   98.0,    101.07,  102.91,  106.42,  107.87,  112.41,  114.82,
    118.71,  121.76,  127.60,  126.90,  131.29};

bool is_unsaturated(BondType t) {
  return t == BondType::Double || t == BondType::Triple || t == BondType::Aromatic;
}

}  // namespace

AtomAttrs AtomAttrs::stub() {
  AtomAttrs a;
  a.atomic_number = kMaskAtomicNumber;
  a.formal_charge = kMaskCharge;
  a.chirality = Chirality::Mask;
  a.hybridization = Hybridization::Mask;
  a.num_hs = kMaskNumHs;
  a.aromatic = Flag::Mask;
  a.is_stub = true;
  return a;
}

AtomAttrs AtomAttrs::element(int z, bool aromatic, int charge, int hs) {
  AtomAttrs a;
  a.atomic_number = z;
  a.formal_charge = charge;
  a.num_hs = hs;
  a.aromatic = aromatic ? Flag::Yes : Flag::No;
  return a;
}

std::array<int, vocab::kNumAtomFields> AtomAttrs::vocab_indices() const {
  if (is_stub) {
    return {vocab::kAtomicNumber - 1, vocab::kFormalCharge - 1, vocab::kChirality - 1,
            vocab::kHybridization - 1, vocab::kNumHs - 1, vocab::kAtomAromatic - 1};
  }
  return {atomic_number, formal_charge + 5, static_cast<int>(chirality),
          static_cast<int>(hybridization), num_hs, static_cast<int>(aromatic)};
}

BondAttrs BondAttrs::masked() {
  return {BondType::Mask, BondDirection::Mask, BondStereo::Mask, Flag::Mask, Flag::Mask};
}

BondAttrs BondAttrs::of(BondType t) {
  BondAttrs b;
  b.type = t;
  b.aromatic = t == BondType::Aromatic ? Flag::Yes : Flag::No;
  b.conjugated = t == BondType::Aromatic ? Flag::Yes : Flag::No;
  return b;
}

std::array<int, vocab::kNumBondFields> BondAttrs::vocab_indices() const {
  return {static_cast<int>(type), static_cast<int>(direction), static_cast<int>(stereo),
          static_cast<int>(conjugated), static_cast<int>(aromatic)};
}

int MolGraph::add_atom(const AtomAttrs& a) {
  atoms_.push_back(a);
  adjacency_.emplace_back();
  return num_atoms() - 1;
}

int MolGraph::add_bond(int begin, int end, const BondAttrs& attrs) {
  if (begin < 0 || end < 0 || begin >= num_atoms() || end >= num_atoms()) {
    throw GraphError("bond endpoint out of range");
  }
  if (begin == end) throw GraphError("self bond");
  if (find_bond(begin, end) >= 0) throw GraphError("duplicate bond");
  bonds_.push_back({begin, end, attrs});
  const int idx = num_bonds() - 1;
  adjacency_[begin].push_back({end, idx});
  adjacency_[end].push_back({begin, idx});
  return idx;
}

int MolGraph::find_bond(int a, int b) const {
  if (a < 0 || a >= num_atoms()) return -1;
  for (const Neighbor& n : adjacency_[a]) {
    if (n.atom == b) return n.bond;
  }
  return -1;
}

std::vector<int> MolGraph::components() const {
  std::vector<int> label(atoms_.size(), -1);
  int next = 0;
  std::vector<int> stack;
  for (int s = 0; s < num_atoms(); ++s) {
    if (label[s] >= 0) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const Neighbor& n : adjacency_[v]) {
        if (label[n.atom] < 0) {
          label[n.atom] = next;
          stack.push_back(n.atom);
        }
      }
    }
    ++next;
  }
  return label;
}

int MolGraph::num_components() const {
  const auto label = components();
  return label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;
}

std::vector<int> MolGraph::stub_atoms() const {
  std::vector<int> out;
  for (int i = 0; i < num_atoms(); ++i) {
    if (atoms_[i].is_stub) out.push_back(i);
  }
  return out;
}

int MolGraph::heavy_atom_count() const {
  return static_cast<int>(
      std::count_if(atoms_.begin(), atoms_.end(), [](const AtomAttrs& a) { return !a.is_stub; }));
}

MolGraph MolGraph::induced_subgraph(std::span<const int> keep) const {
  std::vector<int> map(atoms_.size(), -1);
  std::vector<int> sorted(keep.begin(), keep.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  MolGraph out;
  for (int i : sorted) map[i] = out.add_atom(atoms_[i]);
  for (const Bond& b : bonds_) {
    if (map[b.begin] >= 0 && map[b.end] >= 0) out.add_bond(map[b.begin], map[b.end], b.attrs);
  }
  return out;
}

MolGraph MolGraph::permuted(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != num_atoms()) throw GraphError("permutation size mismatch");
  std::vector<AtomAttrs> atoms(atoms_.size());
  for (int i = 0; i < num_atoms(); ++i) atoms[perm[i]] = atoms_[i];
  MolGraph out;
  for (const AtomAttrs& a : atoms) out.add_atom(a);
  for (const Bond& b : bonds_) out.add_bond(perm[b.begin], perm[b.end], b.attrs);
  return out;
}

void MolGraph::append(const MolGraph& other) {
  const int offset = num_atoms();
  for (const AtomAttrs& a : other.atoms_) add_atom(a);
  for (const Bond& b : other.bonds_) add_bond(b.begin + offset, b.end + offset, b.attrs);
}

int element_from_symbol(std::string_view symbol) {
  for (int z = 1; z < static_cast<int>(kSymbols.size()); ++z) {
    if (symbol == kSymbols[z]) return z;
  }
  return 0;
}

std::string element_symbol(int atomic_number) {
  if (atomic_number <= 0 || atomic_number >= static_cast<int>(kSymbols.size())) return "*";
  return kSymbols[atomic_number];
}

double atomic_mass(int atomic_number) {
  if (atomic_number <= 0 || atomic_number >= static_cast<int>(kMasses.size())) return 0.0;
  return kMasses[atomic_number];
}

double bond_order(BondType t) {
  switch (t) {
    case BondType::Double: return 2.0;
    case BondType::Triple: return 3.0;
    case BondType::Aromatic: return 1.5;
    default: return 1.0;
  }
}

void perceive(MolGraph& g) {
  const int n = g.num_atoms();
  for (int i = 0; i < n; ++i) {
    AtomAttrs& a = g.atom(i);
    if (a.is_stub) continue;
    int doubles = 0, triples = 0, aromatic = 0, heavy = 0;
    for (const Neighbor& nb : g.neighbors(i)) {
      const BondType t = g.bond(nb.bond).attrs.type;
      if (t == BondType::Mask) {
        ++heavy;
        continue;
      }
      ++heavy;
      if (t == BondType::Double) ++doubles;
      if (t == BondType::Triple) ++triples;
      if (t == BondType::Aromatic) ++aromatic;
    }
    if (a.atomic_number == 1) {
      a.hybridization = Hybridization::S;
    } else if (a.is_aromatic() || aromatic > 0) {
      a.hybridization = Hybridization::SP2;
    } else if (triples > 0 || doubles > 1) {
      a.hybridization = Hybridization::SP;
    } else if (doubles == 1) {
      a.hybridization = Hybridization::SP2;
    } else if (heavy + a.num_hs == 0) {
      a.hybridization = Hybridization::Unspecified;
    } else {
      a.hybridization = Hybridization::SP3;
    }
  }

  // unsaturated[i]: number of non-masked double/triple/aromatic bonds at i
  std::vector<int> unsaturated(n, 0);
  for (const Bond& b : g.bonds()) {
    if (is_unsaturated(b.attrs.type)) {
      ++unsaturated[b.begin];
      ++unsaturated[b.end];
    }
  }
  for (int bi = 0; bi < g.num_bonds(); ++bi) {
    const Bond& b = g.bond(bi);
    BondAttrs& attrs = g.bond_attrs(bi);
    if (attrs.is_masked()) continue;
    attrs.aromatic = attrs.type == BondType::Aromatic ? Flag::Yes : Flag::No;
    const bool self = is_unsaturated(attrs.type);
    const int ub = unsaturated[b.begin] - (self ? 1 : 0);
    const int ue = unsaturated[b.end] - (self ? 1 : 0);
    bool conj;
    if (attrs.type == BondType::Aromatic) {
      conj = true;
    } else if (self) {
      conj = ub > 0 || ue > 0;
    } else {
      conj = ub > 0 && ue > 0;
    }
    attrs.conjugated = conj ? Flag::Yes : Flag::No;
  }
}

}  // namespace molpla
