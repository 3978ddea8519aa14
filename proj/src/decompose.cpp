#include "molpla/decompose.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "molpla/chem.hpp"
#include "molpla/rng.hpp"

namespace molpla {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

// Induced subgraph with every lost bond replaced by hydrogens.
MolGraph capped_subgraph(const MolGraph& g, const std::vector<int>& atoms) {
  std::vector<bool> keep(g.num_atoms(), false);
  for (int a : atoms) keep[a] = true;
  MolGraph sub = g.induced_subgraph(atoms);
  std::vector<int> sorted(atoms);
  std::sort(sorted.begin(), sorted.end());
  for (size_t i = 0; i < sorted.size(); ++i) {
    const int a = sorted[i];
    AtomAttrs& attrs = sub.atom(static_cast<int>(i));
    if (attrs.is_stub) continue;
    for (const Neighbor& nb : g.neighbors(a)) {
      if (keep[nb.atom] || g.atom(nb.atom).is_stub) continue;
      const BondType t = g.bond(nb.bond).attrs.type;
      attrs.num_hs += t == BondType::Aromatic ? 1 : static_cast<int>(bond_order(t));
    }
    attrs.num_hs = std::min(attrs.num_hs, 8);
  }
  perceive(sub);
  return sub;
}

bool has_double_to_oxygen(const MolGraph& g, int atom, int min_count) {
  int n = 0;
  for (const Neighbor& nb : g.neighbors(atom)) {
    if (g.bond(nb.bond).attrs.type == BondType::Double && !g.atom(nb.atom).is_stub &&
        g.atom(nb.atom).atomic_number == 8) {
      ++n;
    }
  }
  return n >= min_count;
}

bool is_carbonyl_carbon(const MolGraph& g, int a) {
  return !g.atom(a).is_stub && g.atom(a).atomic_number == 6 && has_double_to_oxygen(g, a, 1);
}

bool is_sulfonyl(const MolGraph& g, int a) {
  return !g.atom(a).is_stub && g.atom(a).atomic_number == 16 && has_double_to_oxygen(g, a, 2);
}

bool is_element(const MolGraph& g, int a, int z) {
  return !g.atom(a).is_stub && g.atom(a).atomic_number == z;
}

// O with exactly two carbon neighbours.
bool is_dialkyl_oxygen(const MolGraph& g, int o) {
  if (!is_element(g, o, 8) || g.atom(o).is_aromatic() || g.degree(o) != 2) return false;
  for (const Neighbor& nb : g.neighbors(o)) {
    if (!is_element(g, nb.atom, 6)) return false;
  }
  return true;
}

bool is_acylated_nitrogen(const MolGraph& g, int n) {
  for (const Neighbor& nb : g.neighbors(n)) {
    if (is_carbonyl_carbon(g, nb.atom) || is_sulfonyl(g, nb.atom)) return true;
  }
  return false;
}

}  // namespace

std::vector<int> murcko_atoms(const MolGraph& g) {
  const auto in_ring = atoms_in_ring(g);
  if (std::find(in_ring.begin(), in_ring.end(), true) == in_ring.end()) return {};
  const int n = g.num_atoms();
  std::vector<bool> alive(n, true);
  std::vector<int> degree(n);
  for (int i = 0; i < n; ++i) degree[i] = g.degree(i);
  std::vector<int> queue;
  for (int i = 0; i < n; ++i) {
    if (!in_ring[i] && degree[i] <= 1) queue.push_back(i);
  }
  while (!queue.empty()) {
    const int a = queue.back();
    queue.pop_back();
    if (!alive[a]) continue;
    alive[a] = false;
    for (const Neighbor& nb : g.neighbors(a)) {
      if (!alive[nb.atom]) continue;
      if (--degree[nb.atom] <= 1 && !in_ring[nb.atom]) queue.push_back(nb.atom);
    }
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i) {
    if (alive[i]) out.push_back(i);
  }
  return out;
}

MolGraph murcko_scaffold(const MolGraph& g) {
  const auto atoms = murcko_atoms(g);
  if (atoms.empty()) return MolGraph{};
  return capped_subgraph(g, atoms);
}

std::vector<bool> cuttable_bonds(const MolGraph& g, const RuleSet& rules) {
  const auto ring_bond = bonds_in_ring(g);
  const auto in_ring = atoms_in_ring(g);
  std::vector<bool> out(g.num_bonds(), false);
  for (int b = 0; b < g.num_bonds(); ++b) {
    const Bond& bond = g.bond(b);
    if (ring_bond[b] || bond.attrs.type != BondType::Single) continue;
    const int x = bond.begin, y = bond.end;
    if (g.atom(x).is_stub || g.atom(y).is_stub) continue;
    bool cut = false;
    if (rules.ring_to_chain && in_ring[x] != in_ring[y]) cut = true;
    for (int pass = 0; pass < 2 && !cut; ++pass) {
      const int c = pass == 0 ? x : y;
      const int o = pass == 0 ? y : x;
      if (rules.amide && is_carbonyl_carbon(g, c) && is_element(g, o, 7)) cut = true;
      if (rules.ester && is_carbonyl_carbon(g, c) && is_dialkyl_oxygen(g, o)) cut = true;
      if (rules.amine && is_element(g, c, 6) && !is_carbonyl_carbon(g, c) && is_element(g, o, 7) &&
          !g.atom(o).is_aromatic() && !is_acylated_nitrogen(g, o)) {
        cut = true;
      }
      if (rules.ether && is_element(g, c, 6) && !is_carbonyl_carbon(g, c) && is_dialkyl_oxygen(g, o)) {
        bool plain = true;
        for (const Neighbor& nb : g.neighbors(o)) {
          if (is_carbonyl_carbon(g, nb.atom)) plain = false;
        }
        if (plain) cut = true;
      }
      if (rules.sulfonamide && is_sulfonyl(g, c) && is_element(g, o, 7)) cut = true;
    }
    out[b] = cut;
  }
  return out;
}

std::vector<CoreCandidate> enumerate_putative_cores(const MolGraph& g, const RuleSet& rules,
                                                    int max_cores) {
  const auto in_ring = atoms_in_ring(g);
  if (std::find(in_ring.begin(), in_ring.end(), true) == in_ring.end()) {
    throw NoRingError("molecule has no ring");
  }
  const int n = g.num_atoms();
  const auto cuttable = cuttable_bonds(g, rules);

  // fragments: components after removing all cuttable bonds
  std::vector<int> frag(n, -1);
  int nfrag = 0;
  for (int s = 0; s < n; ++s) {
    if (frag[s] >= 0) continue;
    std::vector<int> stack{s};
    frag[s] = nfrag;
    while (!stack.empty()) {
      const int a = stack.back();
      stack.pop_back();
      for (const Neighbor& nb : g.neighbors(a)) {
        if (cuttable[nb.bond] || frag[nb.atom] >= 0) continue;
        frag[nb.atom] = nfrag;
        stack.push_back(nb.atom);
      }
    }
    ++nfrag;
  }
  std::vector<std::vector<int>> frag_atoms(nfrag);
  std::vector<bool> frag_ring(nfrag, false);
  std::vector<int> frag_heavy(nfrag, 0);
  for (int a = 0; a < n; ++a) {
    frag_atoms[frag[a]].push_back(a);
    if (in_ring[a]) frag_ring[frag[a]] = true;
    if (!g.atom(a).is_stub) ++frag_heavy[frag[a]];
  }
  std::vector<std::set<int>> frag_adj(nfrag);
  for (int b = 0; b < g.num_bonds(); ++b) {
    if (!cuttable[b]) continue;
    const int fa = frag[g.bond(b).begin], fb = frag[g.bond(b).end];
    frag_adj[fa].insert(fb);
    frag_adj[fb].insert(fa);
  }

  std::vector<CoreCandidate> out;
  std::set<std::string> seen;
  const auto murcko = murcko_atoms(g);
  {
    CoreCandidate c;
    c.atoms = murcko;
    c.key = canonical_key(capped_subgraph(g, murcko));
    c.is_murcko = true;
    seen.insert(c.key);
    out.push_back(std::move(c));
  }

  // connected fragment sets, each enumerated once with its smallest fragment
  // as root (ESU scheme)
  int visited_sets = 0;
  std::function<void(std::vector<int>&, std::vector<int>, int)> extend =
      [&](std::vector<int>& sub, std::vector<int> ext, int root) {
        if (visited_sets >= kMaxSubtreeEnumeration) return;
        ++visited_sets;
        bool ring = false;
        int heavy = 0;
        for (int f : sub) {
          ring = ring || frag_ring[f];
          heavy += frag_heavy[f];
        }
        if (ring && heavy >= 4) {
          std::vector<int> atoms;
          for (int f : sub) atoms.insert(atoms.end(), frag_atoms[f].begin(), frag_atoms[f].end());
          std::sort(atoms.begin(), atoms.end());
          std::string key = canonical_key(capped_subgraph(g, atoms));
          if (seen.insert(key).second) out.push_back({std::move(atoms), std::move(key), false});
        }
        std::set<int> closed(sub.begin(), sub.end());
        for (int f : sub) closed.insert(frag_adj[f].begin(), frag_adj[f].end());
        while (!ext.empty()) {
          const int w = ext.front();
          ext.erase(ext.begin());
          std::vector<int> next_ext = ext;
          for (int u : frag_adj[w]) {
            if (u > root && !closed.count(u) &&
                std::find(next_ext.begin(), next_ext.end(), u) == next_ext.end()) {
              next_ext.push_back(u);
            }
          }
          sub.push_back(w);
          extend(sub, next_ext, root);
          sub.pop_back();
        }
      };
  for (int r = 0; r < nfrag; ++r) {
    std::vector<int> sub{r};
    std::vector<int> ext;
    for (int u : frag_adj[r]) {
      if (u > r) ext.push_back(u);
    }
    extend(sub, ext, r);
  }

  if (max_cores > 0 && static_cast<int>(out.size()) > max_cores) {
    Rng rng(fnv1a64(canonical_key(g)));
    std::vector<int> rest;
    for (int i = 1; i < static_cast<int>(out.size()); ++i) rest.push_back(i);
    rng.shuffle(rest);
    rest.resize(max_cores - 1);
    std::sort(rest.begin(), rest.end());
    std::vector<CoreCandidate> sampled{out.front()};
    for (int i : rest) sampled.push_back(out[i]);
    out = std::move(sampled);
  }
  return out;
}

std::vector<Branch> identify_rgroups(const MolGraph& g, const std::vector<int>& core_atoms) {
  const int n = g.num_atoms();
  std::vector<bool> in_core(n, false);
  for (int a : core_atoms) {
    if (a < 0 || a >= n) throw GraphError("core atom index out of range");
    in_core[a] = true;
  }
  if (core_atoms.empty()) throw GraphError("empty core");
  {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{core_atoms.front()};
    seen[core_atoms.front()] = true;
    int count = 0;
    while (!stack.empty()) {
      const int a = stack.back();
      stack.pop_back();
      ++count;
      for (const Neighbor& nb : g.neighbors(a)) {
        if (in_core[nb.atom] && !seen[nb.atom]) {
          seen[nb.atom] = true;
          stack.push_back(nb.atom);
        }
      }
    }
    const int core_size = static_cast<int>(std::count(in_core.begin(), in_core.end(), true));
    if (count != core_size) throw GraphError("core atoms do not induce a connected subgraph");
  }

  std::vector<int> label(n, -1);
  std::vector<Branch> out;
  for (int s = 0; s < n; ++s) {
    if (in_core[s] || label[s] >= 0) continue;
    Branch br;
    std::vector<int> stack{s};
    label[s] = static_cast<int>(out.size());
    int attachments = 0;
    while (!stack.empty()) {
      const int a = stack.back();
      stack.pop_back();
      br.atoms.push_back(a);
      for (const Neighbor& nb : g.neighbors(a)) {
        if (in_core[nb.atom]) {
          ++attachments;
          br.cut_bond = nb.bond;
          br.core_atom = nb.atom;
          br.r_atom = a;
        } else if (label[nb.atom] < 0) {
          label[nb.atom] = label[s];
          stack.push_back(nb.atom);
        }
      }
    }
    if (attachments != 1) {
      throw MultiAttachmentError("branch containing atom " + std::to_string(s) + " touches the core through " +
                                 std::to_string(attachments) + " bonds");
    }
    std::sort(br.atoms.begin(), br.atoms.end());
    out.push_back(std::move(br));
  }
  return out;
}

DecompositionInstance decompose(const MolGraph& g, const std::vector<int>& core_atoms,
                                const std::vector<int>& subset) {
  return decompose(g, core_atoms, identify_rgroups(g, core_atoms), subset);
}

DecompositionInstance decompose(const MolGraph& g, const std::vector<int>& /*core_atoms*/,
                                const std::vector<Branch>& branches,
                                const std::vector<int>& subset_in) {
  std::vector<int> subset(subset_in);
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  if (subset.empty()) throw EmptySubsetError("no R-group selected for decoupling");
  for (int s : subset) {
    if (s < 0 || s >= static_cast<int>(branches.size())) throw EmptySubsetError("branch index out of range");
  }
  const int n = g.num_atoms();
  DecompositionInstance inst;
  inst.original = g;

  std::vector<int> owner(n, -1);  // selected branch position owning each atom
  std::vector<int> cut_of_bond(g.num_bonds(), -1);
  for (size_t p = 0; p < subset.size(); ++p) {
    const Branch& br = branches[subset[p]];
    for (int a : br.atoms) owner[a] = static_cast<int>(p);
    cut_of_bond[br.cut_bond] = static_cast<int>(p);
  }

  // query template: stubs first, then kept atoms in original order
  std::vector<int> qmap(n, -1);
  for (size_t p = 0; p < subset.size(); ++p) {
    inst.query.add_atom(AtomAttrs::stub());
    inst.query_atom_map.push_back(-1);
  }
  for (int a = 0; a < n; ++a) {
    if (owner[a] >= 0) continue;
    qmap[a] = inst.query.add_atom(g.atom(a));
    inst.query_atom_map.push_back(a);
  }

  // R-groups: stub first, then branch atoms in original order
  std::vector<int> rmap(n, -1);
  inst.rgroups.resize(subset.size());
  inst.rgroup_atom_maps.resize(subset.size());
  for (size_t p = 0; p < subset.size(); ++p) {
    inst.rgroups[p].add_atom(AtomAttrs::stub());
    inst.rgroup_atom_maps[p].push_back(-1);
    for (int a : branches[subset[p]].atoms) {
      rmap[a] = inst.rgroups[p].add_atom(g.atom(a));
      inst.rgroup_atom_maps[p].push_back(a);
    }
  }

  // bonds in original order so neighbour order (and stored chirality) holds
  for (int b = 0; b < g.num_bonds(); ++b) {
    const Bond& bond = g.bond(b);
    const int p = cut_of_bond[b];
    if (p >= 0) {
      const Branch& br = branches[subset[p]];
      inst.query.add_bond(qmap[br.core_atom], p, BondAttrs::masked());
      inst.rgroups[p].add_bond(rmap[br.r_atom], 0, BondAttrs::masked());
      continue;
    }
    const int ob = owner[bond.begin], oe = owner[bond.end];
    if (ob < 0 && oe < 0) {
      inst.query.add_bond(qmap[bond.begin], qmap[bond.end], bond.attrs);
    } else if (ob >= 0 && ob == oe) {
      inst.rgroups[ob].add_bond(rmap[bond.begin], rmap[bond.end], bond.attrs);
    } else {
      throw GraphError("bond crosses decomposition boundary outside a cut");
    }
  }
  perceive(inst.query);
  for (MolGraph& r : inst.rgroups) perceive(r);

  for (size_t p = 0; p < subset.size(); ++p) {
    const Branch& br = branches[subset[p]];
    CutRecord c;
    c.core_atom = br.core_atom;
    c.r_atom = br.r_atom;
    c.original_bond = g.bond(br.cut_bond).attrs;
    c.stub_q = static_cast<int>(p);
    c.stub_r = 0;
    c.linker_node_m = br.core_atom;
    c.rgroup = static_cast<int>(p);
    inst.cuts.push_back(c);
  }
  int mask = 0;
  for (int s : subset) mask |= 1 << s;
  inst.subset_id = mask;
  return inst;
}

std::vector<DecompositionInstance> enumerate_decompositions(const MolGraph& g,
                                                            const std::vector<int>& core_atoms,
                                                            int core_id) {
  const auto branches = identify_rgroups(g, core_atoms);
  const int k = static_cast<int>(branches.size());
  if (k > 16) throw MolError("too many R-groups to enumerate decompositions");
  std::vector<DecompositionInstance> out;
  for (int mask = 1; mask < (1 << k); ++mask) {
    std::vector<int> subset;
    for (int i = 0; i < k; ++i) {
      if (mask >> i & 1) subset.push_back(i);
    }
    out.push_back(decompose(g, core_atoms, branches, subset));
    out.back().core_id = core_id;
  }
  return out;
}

MolGraph remerge(const DecompositionInstance& inst) {
  int n = 0;
  for (int a : inst.query_atom_map) n = std::max(n, a + 1);
  for (const auto& m : inst.rgroup_atom_maps) {
    for (int a : m) n = std::max(n, a + 1);
  }
  std::vector<AtomAttrs> atoms(n);
  std::vector<bool> filled(n, false);
  auto place = [&](const MolGraph& part, const std::vector<int>& map) {
    for (int i = 0; i < part.num_atoms(); ++i) {
      if (map[i] < 0) continue;
      atoms[map[i]] = part.atom(i);
      filled[map[i]] = true;
    }
  };
  place(inst.query, inst.query_atom_map);
  for (size_t r = 0; r < inst.rgroups.size(); ++r) place(inst.rgroups[r], inst.rgroup_atom_maps[r]);
  if (std::find(filled.begin(), filled.end(), false) != filled.end()) {
    throw GraphError("decomposition does not cover every original atom");
  }
  MolGraph out;
  for (const AtomAttrs& a : atoms) out.add_atom(a);
  auto copy_bonds = [&](const MolGraph& part, const std::vector<int>& map) {
    for (const Bond& b : part.bonds()) {
      if (map[b.begin] < 0 || map[b.end] < 0) continue;
      out.add_bond(map[b.begin], map[b.end], b.attrs);
    }
  };
  copy_bonds(inst.query, inst.query_atom_map);
  for (size_t r = 0; r < inst.rgroups.size(); ++r) copy_bonds(inst.rgroups[r], inst.rgroup_atom_maps[r]);
  for (const CutRecord& c : inst.cuts) out.add_bond(c.core_atom, c.r_atom, c.original_bond);
  perceive(out);
  return out;
}

}  // namespace molpla
