#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "doctest.h"
#include "molpla/chem.hpp"
#include "molpla/graph_json.hpp"
#include "molpla/smiles.hpp"
#include "support.hpp"

using namespace molpla;

namespace {

bool all_mask(const AtomAttrs& a) {
  return a.atomic_number == kMaskAtomicNumber && a.formal_charge == kMaskCharge && a.chirality == Chirality::Mask &&
         a.hybridization == Hybridization::Mask && a.num_hs == kMaskNumHs && a.aromatic == Flag::Mask;
}

bool all_mask(const BondAttrs& b) {
  return b.type == BondType::Mask && b.direction == BondDirection::Mask && b.stereo == BondStereo::Mask &&
         b.conjugated == Flag::Mask && b.aromatic == Flag::Mask;
}

std::vector<std::string> test_corpus() {
  auto v = testsupport::corpus();
  v.resize(200 - testsupport::extra_smiles().size());
  for (const auto& s : testsupport::extra_smiles()) v.push_back(s);
  return v;
}

}  // namespace

TEST_CASE("parse: methane folds hydrogens") {
  const MolGraph g = parse_smiles("C");
  REQUIRE(g.num_atoms() == 1);
  CHECK(g.num_bonds() == 0);
  CHECK(g.atom(0).atomic_number == 6);
  CHECK(g.atom(0).num_hs == 4);
}

TEST_CASE("parse: stub and masked bond") {
  const MolGraph g = parse_smiles("*~O");
  REQUIRE(g.num_atoms() == 2);
  REQUIRE(g.num_bonds() == 1);
  CHECK(g.atom(0).is_stub);
  CHECK(all_mask(g.atom(0)));
  CHECK(g.atom(1).atomic_number == 8);
  CHECK(g.atom(1).num_hs == 1);
  CHECK(all_mask(g.bond(0).attrs));
  CHECK(AtomAttrs::stub() == g.atom(0));
  CHECK(BondAttrs::masked() == g.bond(0).attrs);
}

TEST_CASE("parse: benzene") {
  const MolGraph g = parse_smiles("c1ccccc1");
  CHECK(g.num_atoms() == 6);
  CHECK(g.num_bonds() == 6);
  for (int i = 0; i < 6; ++i) CHECK(g.atom(i).is_aromatic());
  for (int b = 0; b < 6; ++b) CHECK(g.bond(b).attrs.type == BondType::Aromatic);
  CHECK(ring_info(g).num_rings() == 1);
}

TEST_CASE("parse: syntax errors") {
  CHECK_THROWS_AS(parse_smiles("C("), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("C1CC"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("C)"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("[Xx]"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles("Q"), SyntaxError);
  CHECK_THROWS_AS(parse_smiles(""), SyntaxError);
}

TEST_CASE("parse: valence errors") {
  CHECK_THROWS_AS(parse_smiles("C(C)(C)(C)(C)C"), ValenceError);
  CHECK_THROWS_AS(parse_smiles("O(C)(C)C"), ValenceError);
  // Five pi centres in one ring cannot be kekulized.
  CHECK_THROWS_AS(parse_smiles("c1ccccc1=O"), ValenceError);
  CHECK_THROWS_AS(parse_smiles("c1cccc1"), ValenceError);
  CHECK_NOTHROW(parse_smiles("O=c1cccc[nH]1"));
  CHECK_NOTHROW(parse_smiles("c1cc[nH]c1"));
  CHECK_NOTHROW(parse_smiles("c1ccoc1"));
}

TEST_CASE("parse: stereo markers and charges are categorical attributes") {
  const MolGraph a = parse_smiles("N[C@@H](C)C(=O)O");
  const MolGraph b = parse_smiles("N[C@H](C)C(=O)O");
  CHECK(a.atom(1).chirality != Chirality::Unspecified);
  CHECK(a.atom(1).chirality != b.atom(1).chirality);
  CHECK(canonical_key(a) == canonical_key(b));
  const MolGraph n = parse_smiles("C[N+](=O)[O-]");
  CHECK(n.atom(1).formal_charge == 1);
  CHECK(n.atom(3).formal_charge == -1);
  const MolGraph e = parse_smiles("F/C=C/F");
  CHECK(e.bond(0).attrs.direction != BondDirection::None);
}

TEST_CASE("write: simple cases") {
  MolGraph c;
  c.add_atom(AtomAttrs::element(6, false, 0, 4));
  CHECK(write_smiles(c) == "C");
  MolGraph r;
  const int s = r.add_atom(AtomAttrs::stub());
  const int o = r.add_atom(AtomAttrs::element(8, false, 0, 1));
  r.add_bond(s, o, BondAttrs::masked());
  perceive(r);
  CHECK(write_smiles(r) == "*~O");
}

TEST_CASE("write/parse round trip over the test corpus") {
  const auto smiles = test_corpus();
  REQUIRE(smiles.size() == 200);
  int ok = 0;
  for (const auto& s : smiles) {
    const MolGraph g = parse_smiles(s);
    const MolGraph back = parse_smiles(write_smiles(g));
    const MolGraph canon = parse_smiles(write_smiles(g, {.canonical = true, .include_stereo = true}));
    if (canonical_key(back) == canonical_key(g) && canonical_key(canon) == canonical_key(g) &&
        back.num_atoms() == g.num_atoms() && back.num_bonds() == g.num_bonds()) {
      ++ok;
    } else {
      MESSAGE("round trip failed for " << s);
    }
  }
  CHECK(ok == 200);
}

TEST_CASE("write preserves atom order and attributes exactly") {
  for (const auto& s : testsupport::extra_smiles()) {
    const MolGraph g = parse_smiles(s);
    const WrittenSmiles w = write_smiles_ordered(g);
    const MolGraph back = parse_smiles(w.smiles);
    REQUIRE(back.num_atoms() == g.num_atoms());
    for (int k = 0; k < back.num_atoms(); ++k) {
      const AtomAttrs& a = g.atom(w.order[k]);
      const AtomAttrs& b = back.atom(k);
      CHECK(a.atomic_number == b.atomic_number);
      CHECK(a.formal_charge == b.formal_charge);
      CHECK(a.num_hs == b.num_hs);
      CHECK(a.aromatic == b.aromatic);
      CHECK(a.is_stub == b.is_stub);
    }
  }
}

TEST_CASE("canonical key examples") {
  CHECK(canonical_key(parse_smiles("CCO")) == canonical_key(parse_smiles("OCC")));
  CHECK(canonical_key(parse_smiles("CCO")) != canonical_key(parse_smiles("CCN")));
  CHECK(canonical_key(parse_smiles("c1ccccc1C")) == canonical_key(parse_smiles("Cc1ccccc1")));
  CHECK(canonical_key(parse_smiles("*~O")) == canonical_key(parse_smiles("O~*")));
  CHECK(canonical_key(parse_smiles("*~O")) != canonical_key(parse_smiles("*O")));
}

TEST_CASE("canonical key is invariant under atom permutations") {
  Rng rng(11);
  std::vector<std::string> mols = {"CC(C)Cc1ccc(cc1)C(C)C(=O)OCCN(C)C(=O)c1ccncc1"};  // 20+ atoms
  const auto c = testsupport::corpus();
  for (size_t i = 0; i < c.size(); i += 25) mols.push_back(c[i]);
  for (const auto& s : testsupport::extra_smiles()) mols.push_back(s);
  for (const auto& s : mols) {
    const MolGraph g = parse_smiles(s);
    const std::string key = canonical_key(g);
    bool all_equal = true;
    for (int t = 0; t < 100; ++t) {
      const MolGraph p = g.permuted(testsupport::random_perm(g.num_atoms(), rng));
      all_equal &= canonical_key(p) == key;
    }
    CHECK_MESSAGE(all_equal, s);
  }
  CHECK(parse_smiles(mols[0]).num_atoms() >= 20);
}

TEST_CASE("canonical key separates non-isomorphic corpus molecules") {
  std::map<std::string, std::string> seen;
  int collisions = 0;
  for (const auto& s : testsupport::corpus()) {
    const MolGraph g = parse_smiles(s);
    const std::string key = canonical_key(g);
    auto [it, fresh] = seen.emplace(key, s);
    if (!fresh) {
      // Identical keys must come from identical graphs up to relabeling:
      // same sorted atom and bond signatures at least.
      const MolGraph h = parse_smiles(it->second);
      if (h.num_atoms() != g.num_atoms() || h.num_bonds() != g.num_bonds()) ++collisions;
    }
  }
  CHECK(collisions == 0);
}

// ---------------------------------------------------------------------------
// Pattern matching
// ---------------------------------------------------------------------------

namespace {

bool atom_ok(const MolGraph& g, int v, const PatternAtom& pa, const std::vector<bool>& ring) {
  const AtomAttrs& a = g.atom(v);
  if (a.is_stub) return false;
  if (pa.atomic_number && a.atomic_number != *pa.atomic_number) return false;
  if (pa.aromatic && a.is_aromatic() != *pa.aromatic) return false;
  if (pa.formal_charge && a.formal_charge != *pa.formal_charge) return false;
  if (pa.degree && g.degree(v) != *pa.degree) return false;
  if (pa.h_count && a.num_hs != *pa.h_count) return false;
  if (pa.in_ring && ring[v] != *pa.in_ring) return false;
  if (pa.hybridization && a.hybridization != *pa.hybridization) return false;
  if (pa.hetero_degree) {
    int h = 0;
    for (const auto& nb : g.neighbors(v)) {
      const AtomAttrs& n = g.atom(nb.atom);
      if (!n.is_stub && n.atomic_number != 6) ++h;
    }
    if (h != *pa.hetero_degree) return false;
  }
  return true;
}

// Every injective assignment, checked in full.
std::vector<AtomMapping> brute_force(const MolGraph& g, const Pattern& p) {
  const auto ring = atoms_in_ring(g);
  std::vector<AtomMapping> out;
  AtomMapping cur(p.atoms.size(), -1);
  std::vector<bool> used(g.num_atoms(), false);
  std::function<void(size_t)> rec = [&](size_t i) {
    if (i == p.atoms.size()) {
      for (const auto& pb : p.bonds) {
        const int b = g.find_bond(cur[pb.begin], cur[pb.end]);
        if (b < 0) return;
        const BondType t = g.bond(b).attrs.type;
        if (t == BondType::Mask) return;
        if (pb.type && t != *pb.type) return;
      }
      for (size_t k = 0; k < cur.size(); ++k) {
        if (!atom_ok(g, cur[k], p.atoms[k], ring)) return;
      }
      out.push_back(cur);
      return;
    }
    for (int v = 0; v < g.num_atoms(); ++v) {
      if (used[v]) continue;
      used[v] = true;
      cur[i] = v;
      rec(i + 1);
      used[v] = false;
    }
  };
  rec(0);
  std::sort(out.begin(), out.end());
  return out;
}

Pattern hydroxyl() {
  Pattern p;
  PatternAtom o;
  o.atomic_number = 8;
  o.degree = 1;
  o.h_count = 1;
  p.atoms.push_back(o);
  return p;
}

}  // namespace

TEST_CASE("match_pattern examples") {
  CHECK(match_pattern(parse_smiles("CCO"), hydroxyl()).size() == 1);
  CHECK(match_pattern(parse_smiles("COC"), hydroxyl()).empty());
  const auto benz = match_pattern(parse_smiles("Cc1ccccc1"), Pattern::from_smiles("c1ccccc1"));
  CHECK(benz.size() == 12);
  std::set<std::vector<int>> sets;
  for (auto m : benz) {
    std::sort(m.begin(), m.end());
    sets.insert(m);
  }
  CHECK(sets.size() == 1);
  CHECK(match_pattern(parse_smiles("CCO"), Pattern::from_smiles("C=O")).empty());
  CHECK(has_match(parse_smiles("CC=O"), Pattern::from_smiles("C=O")));
}

TEST_CASE("match_pattern never uses stubs or masked bonds") {
  const MolGraph g = parse_smiles("*~C");
  CHECK(match_pattern(g, Pattern::from_smiles("CC")).empty());
  CHECK(match_pattern(g, Pattern::from_smiles("*C")).empty());
}

TEST_CASE("match_pattern equals brute force on small graphs") {
  std::vector<std::string> graphs = {"CCO",         "Cc1ccccc1",   "OC(=O)CC(=O)O", "c1ccncc1N", "NC(=O)c1ccco1",
                                     "*~C(=O)OCC", "CS(=O)(=O)N", "ClC(Cl)C#N",    "C1CCNCC1",  "OCC1CCOC1O"};
  std::vector<Pattern> patterns = {hydroxyl(), Pattern::from_smiles("C=O"), Pattern::from_smiles("C(=O)O"),
                                   Pattern::from_smiles("c1ccccc1"), Pattern::from_smiles("CC"),
                                   Pattern::from_smiles("S(=O)=O"), Pattern::from_smiles("c~n")};
  Pattern ring_c;
  PatternAtom a;
  a.atomic_number = 6;
  a.in_ring = true;
  PatternAtom b;
  b.hetero_degree = 1;
  ring_c.atoms = {a, b};
  ring_c.bonds = {{0, 1, std::nullopt}};
  patterns.push_back(ring_c);
  for (const auto& s : graphs) {
    const MolGraph g = parse_smiles(s);
    REQUIRE(g.num_atoms() <= 12);
    for (size_t i = 0; i < patterns.size(); ++i) {
      CHECK_MESSAGE(match_pattern(g, patterns[i]) == brute_force(g, patterns[i]), s << " pattern " << i);
    }
  }
}

// ---------------------------------------------------------------------------
// Valence and rings
// ---------------------------------------------------------------------------

TEST_CASE("valence_check examples") {
  MolGraph methane;
  methane.add_atom(AtomAttrs::element(6, false, 0, 4));
  CHECK(valence_check(methane).empty());

  MolGraph five;
  const int c = five.add_atom(AtomAttrs::element(6));
  for (int i = 0; i < 5; ++i) five.add_bond(c, five.add_atom(AtomAttrs::element(6, false, 0, 3)), BondAttrs::of(BondType::Single));
  const auto v = valence_check(five);
  REQUIRE(v.size() == 1);
  CHECK(v[0].atom == c);
  CHECK(v[0].max_allowed == 4);

  CHECK(valence_check(parse_smiles("O=C(O)C")).empty());
  CHECK(valence_check(parse_smiles("CS(=O)(=O)C")).empty());
  CHECK(valence_check(parse_smiles("C[N+](C)(C)C")).empty());
}

TEST_CASE("valence_check accepts the bundled corpus") {
  for (const auto& s : testsupport::corpus()) {
    CHECK_MESSAGE(valence_check(parse_smiles(s)).empty(), s);
  }
}

TEST_CASE("ring_info examples") {
  const RingInfo benz = ring_info(parse_smiles("c1ccccc1"));
  REQUIRE(benz.num_rings() == 1);
  CHECK(benz.rings[0].size() == 6);

  const MolGraph n = parse_smiles("c1ccc2ccccc2c1");
  const RingInfo naph = ring_info(n);
  REQUIRE(naph.num_rings() == 2);
  CHECK(naph.rings[0].size() == 6);
  CHECK(naph.rings[1].size() == 6);
  std::set<int> b0(naph.ring_bonds[0].begin(), naph.ring_bonds[0].end());
  int shared = 0;
  for (int b : naph.ring_bonds[1]) shared += b0.count(b);
  CHECK(shared == 1);

  const RingInfo chain = ring_info(parse_smiles("CCCC"));
  CHECK(chain.num_rings() == 0);
  for (bool f : chain.atom_in_ring) CHECK_FALSE(f);
}

TEST_CASE("ring_info: cycle basis size equals the cyclomatic number") {
  for (const auto& s : testsupport::corpus()) {
    const MolGraph g = parse_smiles(s);
    const int cyclomatic = g.num_bonds() - g.num_atoms() + g.num_components();
    const RingInfo r = ring_info(g);
    CHECK(r.num_rings() == cyclomatic);
    CHECK(r.bond_in_ring == bonds_in_ring(g));
    CHECK(r.atom_in_ring == atoms_in_ring(g));
  }
  // Bicyclo[2.2.2]octane: three 6-rings, basis of 2.
  const RingInfo b = ring_info(parse_smiles("C1CC2CCC1CC2"));
  CHECK(b.num_rings() == 2);
  for (const auto& ring : b.rings) CHECK(ring.size() == 6);
}

TEST_CASE("graph JSON round trip keeps masks") {
  for (const auto& s : testsupport::extra_smiles()) {
    const MolGraph g = parse_smiles(s);
    const nlohmann::json j = graph_to_json(g);
    CHECK(graph_from_json(j) == g);
  }
  const nlohmann::json stub = graph_to_json(parse_smiles("*~O"));
  CHECK(stub["atoms"][0]["atomic_number"] == "MASK");
  CHECK(stub["bonds"][0]["bond_type"] == "MASK");
}

TEST_CASE("graph editing invariants") {
  MolGraph g;
  const int a = g.add_atom(AtomAttrs::element(6));
  const int b = g.add_atom(AtomAttrs::element(6));
  g.add_bond(a, b, BondAttrs::of(BondType::Single));
  CHECK_THROWS_AS(g.add_bond(a, b, BondAttrs::of(BondType::Single)), GraphError);
  CHECK_THROWS_AS(g.add_bond(a, a, BondAttrs::of(BondType::Single)), GraphError);
  CHECK_THROWS_AS(g.add_bond(a, 7, BondAttrs::of(BondType::Single)), GraphError);
  const MolGraph two = parse_smiles("CC.O");
  CHECK(two.num_components() == 2);
  CHECK(two.components() == std::vector<int>{0, 0, 1});
}
