#include "molpla/chem.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include "molpla/smiles.hpp"

namespace molpla {

// ---------------------------------------------------------------------------
// Rings
// ---------------------------------------------------------------------------

std::vector<bool> bonds_in_ring(const MolGraph& g) {
  const int n = g.num_atoms();
  std::vector<bool> in_ring(g.num_bonds(), false);
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<bool> is_bridge(g.num_bonds(), false);
  int timer = 0;

  struct Frame {
    int atom;
    int parent_bond;
    size_t next;
  };
  for (int s = 0; s < n; ++s) {
    if (disc[s] >= 0) continue;
    std::vector<Frame> stack{{s, -1, 0}};
    disc[s] = low[s] = timer++;
    while (!stack.empty()) {
      Frame& f = stack.back();
      const auto nbs = g.neighbors(f.atom);
      if (f.next < nbs.size()) {
        const Neighbor nb = nbs[f.next++];
        if (nb.bond == f.parent_bond) continue;
        if (disc[nb.atom] < 0) {
          disc[nb.atom] = low[nb.atom] = timer++;
          stack.push_back({nb.atom, nb.bond, 0});
        } else {
          low[f.atom] = std::min(low[f.atom], disc[nb.atom]);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          Frame& p = stack.back();
          low[p.atom] = std::min(low[p.atom], low[done.atom]);
          if (low[done.atom] > disc[p.atom]) is_bridge[done.parent_bond] = true;
        }
      }
    }
  }
  for (int b = 0; b < g.num_bonds(); ++b) in_ring[b] = !is_bridge[b];
  return in_ring;
}

std::vector<bool> atoms_in_ring(const MolGraph& g) {
  const auto rb = bonds_in_ring(g);
  std::vector<bool> out(g.num_atoms(), false);
  for (int b = 0; b < g.num_bonds(); ++b) {
    if (rb[b]) {
      out[g.bond(b).begin] = true;
      out[g.bond(b).end] = true;
    }
  }
  return out;
}

namespace {

using BitRow = std::vector<std::uint64_t>;

struct Candidate {
  std::vector<int> atoms;
  std::vector<int> bonds;
  BitRow bits;
};

BitRow to_bits(const std::vector<int>& bonds, int nbonds) {
  BitRow r((nbonds + 63) / 64, 0);
  for (int b : bonds) r[b / 64] |= std::uint64_t{1} << (b % 64);
  return r;
}

}  // namespace

RingInfo ring_info(const MolGraph& g) {
  RingInfo info;
  info.bond_in_ring = bonds_in_ring(g);
  info.atom_in_ring.assign(g.num_atoms(), false);
  const int n = g.num_atoms();
  const int m = g.num_bonds();
  int ring_bond_count = 0;
  for (int b = 0; b < m; ++b) {
    if (!info.bond_in_ring[b]) continue;
    ++ring_bond_count;
    info.atom_in_ring[g.bond(b).begin] = true;
    info.atom_in_ring[g.bond(b).end] = true;
  }
  if (ring_bond_count == 0) return info;

  // cyclomatic number of the ring subgraph
  const int ring_atoms = static_cast<int>(std::count(info.atom_in_ring.begin(), info.atom_in_ring.end(), true));
  MolGraph ring_sub;
  std::vector<int> sub_index(n, -1);
  for (int i = 0; i < n; ++i) {
    if (info.atom_in_ring[i]) sub_index[i] = ring_sub.add_atom(g.atom(i));
  }
  for (int b = 0; b < m; ++b) {
    if (info.bond_in_ring[b]) {
      ring_sub.add_bond(sub_index[g.bond(b).begin], sub_index[g.bond(b).end], g.bond(b).attrs);
    }
  }
  const int target = ring_bond_count - ring_atoms + ring_sub.num_components();

  std::vector<Candidate> candidates;
  std::set<BitRow> seen;
  for (int v = 0; v < n; ++v) {
    if (!info.atom_in_ring[v]) continue;
    std::vector<int> parent(n, -1), parent_bond(n, -1), dist(n, -1);
    std::queue<int> q;
    dist[v] = 0;
    q.push(v);
    while (!q.empty()) {
      const int x = q.front();
      q.pop();
      for (const Neighbor& nb : g.neighbors(x)) {
        if (!info.bond_in_ring[nb.bond] || dist[nb.atom] >= 0) continue;
        dist[nb.atom] = dist[x] + 1;
        parent[nb.atom] = x;
        parent_bond[nb.atom] = nb.bond;
        q.push(nb.atom);
      }
    }
    auto path = [&](int x) {
      std::vector<int> atoms{x};
      while (x != v) {
        x = parent[x];
        atoms.push_back(x);
      }
      return atoms;  // x ... v
    };
    for (int b = 0; b < m; ++b) {
      if (!info.bond_in_ring[b]) continue;
      const int x = g.bond(b).begin, y = g.bond(b).end;
      if (dist[x] < 0 || dist[y] < 0) continue;
      if (parent_bond[x] == b || parent_bond[y] == b) continue;
      const auto px = path(x);
      const auto py = path(y);
      std::set<int> sx(px.begin(), px.end());
      bool disjoint = true;
      for (int a : py) {
        if (a != v && sx.count(a)) {
          disjoint = false;
          break;
        }
      }
      if (!disjoint) continue;
      Candidate c;
      // v ... x, y ... (before v)
      c.atoms.assign(px.rbegin(), px.rend());
      for (size_t i = 0; i + 1 < py.size(); ++i) c.atoms.push_back(py[i]);
      const size_t len = c.atoms.size();
      for (size_t i = 0; i < len; ++i) {
        c.bonds.push_back(g.find_bond(c.atoms[i], c.atoms[(i + 1) % len]));
      }
      c.bits = to_bits(c.bonds, m);
      if (seen.insert(c.bits).second) candidates.push_back(std::move(c));
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.bonds.size() != b.bonds.size()) return a.bonds.size() < b.bonds.size();
    return a.bits < b.bits;
  });

  // greedy GF(2) independence test
  std::vector<BitRow> basis;     // reduced rows
  std::vector<int> pivots;       // pivot bit of each basis row
  for (Candidate& c : candidates) {
    if (static_cast<int>(info.rings.size()) >= target) break;
    BitRow r = c.bits;
    for (size_t i = 0; i < basis.size(); ++i) {
      const int p = pivots[i];
      if (r[p / 64] >> (p % 64) & 1) {
        for (size_t w = 0; w < r.size(); ++w) r[w] ^= basis[i][w];
      }
    }
    int pivot = -1;
    for (size_t w = 0; w < r.size() && pivot < 0; ++w) {
      if (r[w]) pivot = static_cast<int>(w * 64 + __builtin_ctzll(r[w]));
    }
    if (pivot < 0) continue;
    basis.push_back(r);
    pivots.push_back(pivot);
    info.rings.push_back(c.atoms);
    info.ring_bonds.push_back(c.bonds);
  }
  return info;
}

// ---------------------------------------------------------------------------
// Valence
// ---------------------------------------------------------------------------

std::vector<int> allowed_valences(int z, int charge) {
  switch (z) {
    case 1:
      return charge == 0 ? std::vector<int>{1} : std::vector<int>{};
    case 5:
      if (charge == 0) return {3};
      if (charge == -1) return {4};
      return {};
    case 6:
      if (charge == 0) return {4};
      if (charge == 1 || charge == -1) return {3};
      return {};
    case 7:
      if (charge == 0) return {3};
      if (charge == 1) return {4};
      if (charge == -1) return {2};
      return {};
    case 8:
      if (charge == 0) return {2};
      if (charge == 1) return {3};
      if (charge == -1) return {1};
      return {};
    case 9: case 17: case 35: case 53:
      if (charge == 0) return {1};
      if (charge == -1) return {0};
      return {};
    case 14:
      return charge == 0 ? std::vector<int>{4} : std::vector<int>{};
    case 15:
      if (charge == 0) return {3, 5};
      if (charge == 1) return {4};
      return {};
    case 16:
      if (charge == 0) return {2, 4, 6};
      if (charge == 1) return {3, 5};
      if (charge == -1) return {1, 3, 5};
      return {};
    default:
      return {};
  }
}

int min_valence(const MolGraph& g, int atom) {
  int v = g.atom(atom).num_hs;
  for (const Neighbor& nb : g.neighbors(atom)) {
    const BondType t = g.bond(nb.bond).attrs.type;
    if (t == BondType::Mask) continue;
    v += t == BondType::Aromatic ? 1 : static_cast<int>(bond_order(t));
  }
  return v;
}

namespace {

// Pairs up pi-needing aromatic atoms along aromatic bonds. needs: 1 = must
// take a pi bond, 2 = may (atoms carrying a masked bond).
bool match_pi(const MolGraph& g, const std::vector<char>& needs, std::vector<char>& used, int from) {
  int i = from;
  while (i < g.num_atoms() && (needs[i] != 1 || used[i])) ++i;
  if (i == g.num_atoms()) return true;
  used[i] = 1;
  for (const Neighbor& nb : g.neighbors(i)) {
    if (g.bond(nb.bond).attrs.type != BondType::Aromatic) continue;
    if (!needs[nb.atom] || used[nb.atom]) continue;
    used[nb.atom] = 1;
    if (match_pi(g, needs, used, i + 1)) return true;
    used[nb.atom] = 0;
  }
  used[i] = 0;
  return false;
}

}  // namespace

std::vector<ValenceViolation> valence_check(const MolGraph& g) {
  std::vector<ValenceViolation> out;
  std::vector<char> needs(g.num_atoms(), 0);
  for (int i = 0; i < g.num_atoms(); ++i) {
    const AtomAttrs& a = g.atom(i);
    if (a.is_stub) continue;
    const auto allowed = allowed_valences(a.atomic_number, a.formal_charge);
    if (allowed.empty()) continue;
    const int v = min_valence(g, i);
    const int max_allowed = allowed.back();
    if (v > max_allowed) {
      out.push_back({i, static_cast<double>(v), max_allowed});
      continue;
    }
    if (!a.is_aromatic()) continue;
    bool masked = false;
    for (const Neighbor& nb : g.neighbors(i)) masked |= g.bond(nb.bond).attrs.is_masked();
    if (masked) {
      needs[i] = 2;
    } else if (std::find(allowed.begin(), allowed.end(), v) == allowed.end() &&
               std::find(allowed.begin(), allowed.end(), v + 1) != allowed.end()) {
      needs[i] = 1;
    }
  }
  if (!out.empty()) return out;
  // Each aromatic system is matched on its own.
  std::vector<char> seen(g.num_atoms(), 0);
  for (int s = 0; s < g.num_atoms(); ++s) {
    if (!needs[s] || seen[s]) continue;
    std::vector<char> part(g.num_atoms(), 0);
    std::vector<int> stack = {s};
    std::vector<int> members;
    seen[s] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      part[i] = 1;
      members.push_back(i);
      for (const Neighbor& nb : g.neighbors(i)) {
        if (g.bond(nb.bond).attrs.type != BondType::Aromatic || !needs[nb.atom] || seen[nb.atom]) continue;
        seen[nb.atom] = 1;
        stack.push_back(nb.atom);
      }
    }
    bool optional = false;
    for (const int i : members) {
      part[i] = needs[i];
      optional |= needs[i] == 2;
    }
    std::vector<char> used(g.num_atoms(), 0);
    if ((optional || members.size() % 2 == 0) && match_pi(g, part, used, 0)) continue;
    std::sort(members.begin(), members.end());
    for (const int i : members) {
      if (needs[i] != 1) continue;
      const auto allowed = allowed_valences(g.atom(i).atomic_number, g.atom(i).formal_charge);
      out.push_back({i, min_valence(g, i) + 0.5, allowed.back()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonicalization
// ---------------------------------------------------------------------------

namespace {

constexpr int kLeafBudget = 64;

// Dense-by-position ranks: an atom's rank is the number of atoms strictly
// before its class.
std::vector<int> ranks_from_keys(const std::vector<std::vector<long>>& keys) {
  const int n = static_cast<int>(keys.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return keys[a] < keys[b]; });
  std::vector<int> ranks(n, 0);
  for (int k = 0; k < n; ++k) {
    if (k > 0 && keys[idx[k]] == keys[idx[k - 1]]) {
      ranks[idx[k]] = ranks[idx[k - 1]];
    } else {
      ranks[idx[k]] = k;
    }
  }
  return ranks;
}

int num_classes(const std::vector<int>& ranks) {
  return static_cast<int>(std::set<int>(ranks.begin(), ranks.end()).size());
}

class Canonicalizer {
 public:
  explicit Canonicalizer(const MolGraph& g) : g_(g) {
    const int n = g.num_atoms();
    const auto in_ring = atoms_in_ring(g);
    std::vector<std::vector<long>> keys(n);
    for (int i = 0; i < n; ++i) {
      const AtomAttrs& a = g.atom(i);
      keys[i] = {a.is_stub ? 1L : 0L,
                 a.is_stub ? 0L : a.atomic_number,
                 a.is_stub ? 0L : static_cast<long>(a.aromatic),
                 a.is_stub ? 0L : a.formal_charge,
                 a.is_stub ? 0L : a.num_hs,
                 g.degree(i),
                 in_ring[i] ? 1L : 0L};
    }
    initial_ = refine(ranks_from_keys(keys));
  }

  void run() { search(initial_); }

  const std::string& best_smiles() const { return best_; }
  const std::vector<int>& best_ranks() const { return best_ranks_; }

 private:
  std::vector<int> refine(std::vector<int> ranks) const {
    const int n = g_.num_atoms();
    int classes = num_classes(ranks);
    while (true) {
      std::vector<std::vector<long>> keys(n);
      for (int i = 0; i < n; ++i) {
        std::vector<long> nb;
        for (const Neighbor& x : g_.neighbors(i)) {
          nb.push_back(static_cast<long>(g_.bond(x.bond).attrs.type) * (n + 1) + ranks[x.atom]);
        }
        std::sort(nb.begin(), nb.end());
        keys[i].push_back(ranks[i]);
        keys[i].insert(keys[i].end(), nb.begin(), nb.end());
      }
      auto next = ranks_from_keys(keys);
      const int c = num_classes(next);
      ranks = std::move(next);
      if (c == classes) break;
      classes = c;
    }
    return ranks;
  }

  void search(const std::vector<int>& ranks) {
    const int n = g_.num_atoms();
    if (num_classes(ranks) == n) {
      ++leaves_;
      std::string s = write_smiles_ranked(g_, ranks, false).smiles;
      if (best_ranks_.empty() || s < best_) {
        best_ = std::move(s);
        best_ranks_ = ranks;
      }
      return;
    }
    // first (lowest-ranked) tied class
    std::map<int, std::vector<int>> cls;
    for (int i = 0; i < n; ++i) cls[ranks[i]].push_back(i);
    std::vector<int> members;
    for (auto& [r, atoms] : cls) {
      if (atoms.size() > 1) {
        members = atoms;
        break;
      }
    }
    for (size_t k = 0; k < members.size(); ++k) {
      if (k > 0 && leaves_ >= kLeafBudget) break;
      std::vector<int> next(n);
      for (int i = 0; i < n; ++i) next[i] = 2 * ranks[i];
      for (int other : members) {
        if (other != members[k]) next[other] += 1;
      }
      search(refine(next));
    }
  }

  const MolGraph& g_;
  std::vector<int> initial_;
  std::string best_;
  std::vector<int> best_ranks_;
  int leaves_ = 0;
};

}  // namespace

std::vector<int> canonical_ranks(const MolGraph& g) {
  if (g.empty()) return {};
  Canonicalizer c(g);
  c.run();
  return c.best_ranks();
}

std::string canonical_key(const MolGraph& g) {
  if (g.empty()) return "";
  Canonicalizer c(g);
  c.run();
  return c.best_smiles();
}

// ---------------------------------------------------------------------------
// Substructure patterns
// ---------------------------------------------------------------------------

Pattern Pattern::from_smiles(const std::string& smiles) {
  const MolGraph g = parse_smiles(smiles, false);
  Pattern p;
  for (int i = 0; i < g.num_atoms(); ++i) {
    const AtomAttrs& a = g.atom(i);
    PatternAtom pa;
    if (!a.is_stub) {
      pa.atomic_number = a.atomic_number;
      pa.aromatic = a.is_aromatic();
      pa.formal_charge = a.formal_charge;
    }
    p.atoms.push_back(pa);
  }
  for (const Bond& b : g.bonds()) {
    PatternBond pb{b.begin, b.end, std::nullopt};
    if (!b.attrs.is_masked()) pb.type = b.attrs.type;
    p.bonds.push_back(pb);
  }
  return p;
}

namespace {

class Matcher {
 public:
  Matcher(const MolGraph& g, const Pattern& p, bool first_only)
      : g_(g), p_(p), first_only_(first_only), in_ring_(atoms_in_ring(g)) {
    const int np = static_cast<int>(p.atoms.size());
    p_adj_.assign(np, {});
    for (size_t b = 0; b < p.bonds.size(); ++b) {
      p_adj_[p.bonds[b].begin].push_back(static_cast<int>(b));
      p_adj_[p.bonds[b].end].push_back(static_cast<int>(b));
    }
    // BFS order so every atom after the first has a mapped anchor
    std::vector<bool> seen(np, false);
    anchor_.assign(np, -1);
    for (int s = 0; s < np; ++s) {
      if (seen[s]) continue;
      std::queue<int> q;
      q.push(s);
      seen[s] = true;
      while (!q.empty()) {
        const int x = q.front();
        q.pop();
        order_.push_back(x);
        for (int b : p_adj_[x]) {
          const int y = p.bonds[b].begin == x ? p.bonds[b].end : p.bonds[b].begin;
          if (!seen[y]) {
            seen[y] = true;
            anchor_[y] = x;
            q.push(y);
          }
        }
      }
    }
  }

  std::vector<AtomMapping> run() {
    if (p_.atoms.empty()) return {};
    map_.assign(p_.atoms.size(), -1);
    used_.assign(g_.num_atoms(), false);
    extend(0);
    std::sort(results_.begin(), results_.end());
    return std::move(results_);
  }

 private:
  bool atom_ok(int pa, int ga) const {
    const AtomAttrs& a = g_.atom(ga);
    if (a.is_stub) return false;
    const PatternAtom& c = p_.atoms[pa];
    if (c.atomic_number && *c.atomic_number != a.atomic_number) return false;
    if (c.aromatic && *c.aromatic != a.is_aromatic()) return false;
    if (c.formal_charge && *c.formal_charge != a.formal_charge) return false;
    if (c.degree && *c.degree != g_.degree(ga)) return false;
    if (c.h_count && *c.h_count != a.num_hs) return false;
    if (c.in_ring && *c.in_ring != static_cast<bool>(in_ring_[ga])) return false;
    if (c.hybridization && *c.hybridization != a.hybridization) return false;
    if (c.hetero_degree) {
      int h = 0;
      for (const Neighbor& nb : g_.neighbors(ga)) {
        const AtomAttrs& o = g_.atom(nb.atom);
        if (!o.is_stub && o.atomic_number != 6) ++h;
      }
      if (h != *c.hetero_degree) return false;
    }
    return true;
  }

  bool bonds_ok(int pa, int ga) const {
    for (int b : p_adj_[pa]) {
      const PatternBond& pb = p_.bonds[b];
      const int other = pb.begin == pa ? pb.end : pb.begin;
      if (map_[other] < 0) continue;
      const int gb = g_.find_bond(ga, map_[other]);
      if (gb < 0) return false;
      const BondAttrs& attrs = g_.bond(gb).attrs;
      if (attrs.is_masked()) return false;
      if (pb.type && *pb.type != attrs.type) return false;
    }
    return true;
  }

  bool try_atom(size_t depth, int pa, int ga) {
    if (used_[ga] || !atom_ok(pa, ga) || !bonds_ok(pa, ga)) return false;
    map_[pa] = ga;
    used_[ga] = true;
    const bool stop = extend(depth + 1);
    map_[pa] = -1;
    used_[ga] = false;
    return stop;
  }

  // returns true to stop the search
  bool extend(size_t depth) {
    if (depth == order_.size()) {
      results_.push_back(map_);
      return first_only_;
    }
    const int pa = order_[depth];
    if (anchor_[pa] < 0) {
      for (int ga = 0; ga < g_.num_atoms(); ++ga) {
        if (try_atom(depth, pa, ga)) return true;
      }
    } else {
      for (const Neighbor& nb : g_.neighbors(map_[anchor_[pa]])) {
        if (try_atom(depth, pa, nb.atom)) return true;
      }
    }
    return false;
  }

  const MolGraph& g_;
  const Pattern& p_;
  bool first_only_;
  std::vector<bool> in_ring_;
  std::vector<std::vector<int>> p_adj_;
  std::vector<int> order_;
  std::vector<int> anchor_;
  std::vector<int> map_;
  std::vector<bool> used_;
  std::vector<AtomMapping> results_;
};

}  // namespace

std::vector<AtomMapping> match_pattern(const MolGraph& g, const Pattern& p) {
  return Matcher(g, p, false).run();
}

bool has_match(const MolGraph& g, const Pattern& p) {
  return !Matcher(g, p, true).run().empty();
}

}  // namespace molpla
