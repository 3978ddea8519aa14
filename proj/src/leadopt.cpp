#include "molpla/leadopt.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "molpla/chem.hpp"
#include "molpla/registry.hpp"
#include "molpla/smiles.hpp"

namespace molpla {

nlohmann::json Descriptors::to_json() const {
  return {{"heavy_atoms", heavy_atoms}, {"mol_weight", mol_weight}, {"rings", rings},
          {"rotatable_bonds", rotatable_bonds}, {"hbd", hbd}, {"hba", hba}};
}

Descriptors descriptor_report(const MolGraph& g) {
  Descriptors d;
  const double h_mass = atomic_mass(1);
  std::vector<int> heavy_degree(g.num_atoms(), 0);
  for (const Bond& b : g.bonds()) {
    if (!g.atom(b.begin).is_stub && !g.atom(b.end).is_stub) {
      ++heavy_degree[b.begin];
      ++heavy_degree[b.end];
    }
  }
  for (int i = 0; i < g.num_atoms(); ++i) {
    const AtomAttrs& a = g.atom(i);
    if (a.is_stub) continue;
    ++d.heavy_atoms;
    d.mol_weight += atomic_mass(a.atomic_number) + a.num_hs * h_mass;
    const bool n_or_o = a.atomic_number == 7 || a.atomic_number == 8;
    if (n_or_o) {
      ++d.hba;
      if (a.num_hs > 0) ++d.hbd;
    }
  }
  d.rings = ring_info(g).num_rings();
  const std::vector<bool> ring_bond = bonds_in_ring(g);
  for (int i = 0; i < g.num_bonds(); ++i) {
    const Bond& b = g.bond(i);
    if (b.attrs.type != BondType::Single || ring_bond[i]) continue;
    if (g.atom(b.begin).is_stub || g.atom(b.end).is_stub) continue;
    if (heavy_degree[b.begin] > 1 && heavy_degree[b.end] > 1) ++d.rotatable_bonds;
  }
  return d;
}

namespace {

int stub_neighbor(const MolGraph& g, int stub) {
  if (stub < 0 || stub >= g.num_atoms() || !g.atom(stub).is_stub) {
    throw NoStubError("atom " + std::to_string(stub) + " is not a stub");
  }
  if (g.degree(stub) != 1) throw NoStubError("stub " + std::to_string(stub) + " must have exactly one neighbour");
  const int nb = g.neighbors(stub)[0].atom;
  if (g.atom(nb).is_stub) throw NoStubError("stub is bonded to another stub");
  return nb;
}

// Bond-order sum of an atom not counting its hydrogens, the bond to `skip`,
// or masked bonds; aromatic bonds count one.
int heavy_bond_sum(const MolGraph& g, int atom, int skip) {
  int s = 0;
  for (const Neighbor& nb : g.neighbors(atom)) {
    if (nb.atom == skip) continue;
    const BondType t = g.bond(nb.bond).attrs.type;
    if (t == BondType::Mask) continue;
    s += t == BondType::Aromatic ? 1 : static_cast<int>(bond_order(t));
  }
  return s;
}

// Hydrogen counts compatible with adding a bond of order `order` to the atom.
std::vector<int> h_options(const AtomAttrs& a, int bond_sum, int order) {
  const std::vector<int> allowed = allowed_valences(a.atomic_number, a.formal_charge);
  if (allowed.empty()) return {a.num_hs};
  std::set<int> out;
  const int used = bond_sum + order;
  for (int v : allowed) {
    for (int target : {v, v - (a.is_aromatic() ? 1 : 0)}) {
      if (target < used) continue;
      out.insert(std::min(a.num_hs, target - used));
    }
  }
  return {out.begin(), out.end()};
}

// Rebuilds the full graph with the joint inserted at the position of the
// template's stub bond so the boundary atom keeps its neighbour order.
MolGraph build(const MolGraph& tmpl, int stub, const MolGraph& rg, int rstub, const BondAttrs& joint, int hu, int hv,
               int linker_z, int linker_h) {
  MolGraph out;
  std::vector<int> tmap(tmpl.num_atoms(), -1), rmap(rg.num_atoms(), -1);
  for (int i = 0; i < tmpl.num_atoms(); ++i) {
    if (i != stub) tmap[i] = out.add_atom(tmpl.atom(i));
  }
  for (int i = 0; i < rg.num_atoms(); ++i) {
    if (i != rstub) rmap[i] = out.add_atom(rg.atom(i));
  }
  const int u = tmap[stub_neighbor(tmpl, stub)];
  const int v = rmap[stub_neighbor(rg, rstub)];
  out.atom(u).num_hs = hu;
  out.atom(v).num_hs = hv;
  int x = -1;
  if (linker_z) x = out.add_atom(AtomAttrs::element(linker_z, false, 0, linker_h));
  auto add_joint = [&]() {
    if (x >= 0) {
      out.add_bond(u, x, joint);
    } else {
      out.add_bond(u, v, joint);
    }
  };
  for (const Bond& b : tmpl.bonds()) {
    if (b.begin == stub || b.end == stub) {
      add_joint();
      continue;
    }
    out.add_bond(tmap[b.begin], tmap[b.end], b.attrs);
  }
  if (x >= 0) out.add_bond(x, v, joint);
  for (const Bond& b : rg.bonds()) {
    if (b.begin == rstub || b.end == rstub) continue;
    out.add_bond(rmap[b.begin], rmap[b.end], b.attrs);
  }
  perceive(out);
  return out;
}

}  // namespace

std::vector<ReattachmentCandidate> reattach(const MolGraph& tmpl, int stub_index, const MolGraph& rgroup,
                                            const ReattachOptions& opts, int* attempted) {
  const int tu = stub_neighbor(tmpl, stub_index);
  const std::vector<int> rstubs = rgroup.stub_atoms();
  if (rstubs.size() != 1) throw NoStubError("R-group must contain exactly one stub");
  const int rstub = rstubs[0];
  const int rv = stub_neighbor(rgroup, rstub);
  const AtomAttrs& au = tmpl.atom(tu);
  const AtomAttrs& av = rgroup.atom(rv);
  const int su = heavy_bond_sum(tmpl, tu, stub_index);
  const int sv = heavy_bond_sum(rgroup, rv, rstub);
  const bool both_aromatic_ring =
      au.is_aromatic() && av.is_aromatic() && atoms_in_ring(tmpl)[tu] && atoms_in_ring(rgroup)[rv];

  std::vector<ReattachmentCandidate> out;
  std::set<std::string> seen;
  int tried = 0;
  auto consider = [&](MolGraph g, const BondAttrs& joint, int linker_z) {
    ++tried;
    if (!valence_check(g).empty() || g.num_components() != 1) return;
    std::string key = canonical_key(g);
    if (!seen.insert(key).second) return;
    ReattachmentCandidate c;
    c.smiles = write_smiles(g, {.canonical = true, .include_stereo = true});
    c.key = std::move(key);
    c.molecule = std::move(g);
    c.filled_bond = joint;
    c.linker_element = linker_z;
    c.source_rgroup_key = canonical_key(rgroup);
    c.valid = true;
    out.push_back(std::move(c));
  };

  std::vector<BondType> types = {BondType::Single, BondType::Double, BondType::Triple};
  if (both_aromatic_ring) types.push_back(BondType::Aromatic);
  for (BondType t : types) {
    const int order = t == BondType::Aromatic ? 1 : static_cast<int>(bond_order(t));
    const BondAttrs joint = BondAttrs::of(t);
    for (int hu : h_options(au, su, order)) {
      for (int hv : h_options(av, sv, order)) consider(build(tmpl, stub_index, rgroup, rstub, joint, hu, hv, 0, 0), joint, 0);
    }
  }
  if (opts.enumerate_linker_element) {
    const BondAttrs joint = BondAttrs::of(BondType::Single);
    for (int z : {6, 7, 8, 16}) {
      const int hx = allowed_valences(z, 0).front() - 2;
      if (hx < 0) continue;
      for (int hu : h_options(au, su, 1)) {
        for (int hv : h_options(av, sv, 1)) consider(build(tmpl, stub_index, rgroup, rstub, joint, hu, hv, z, hx), joint, z);
      }
    }
  }
  if (attempted) *attempted = tried;
  return out;
}

NodeColoring pca_first_component(const Matrix& h) {
  if (h.rows < 2) throw DegenerateError("PCA coloring needs at least two atoms");
  const int n = h.rows, d = h.cols;
  Matrix x = h;
  std::vector<double> mean(d, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) mean[j] += x(i, j);
  }
  for (double& m : mean) m /= n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) -= mean[j];
  }
  Matrix c;
  gemm_tn(x, x, c);
  for (double& v : c.data) v /= n;
  NodeColoring out;
  out.scores.assign(n, 0.0);
  out.loading.assign(d, 0.0);
  double trace = 0;
  int best = 0;
  for (int j = 0; j < d; ++j) {
    trace += c(j, j);
    if (c(j, j) > c(best, best)) best = j;
  }
  if (!(trace > 1e-18)) {
    out.degenerate = true;
    return out;
  }
  std::vector<double> v(c.row(best), c.row(best) + d), w(d);
  auto normalize = [&](std::vector<double>& a) {
    double s = 0;
    for (double e : a) s += e * e;
    s = std::sqrt(s);
    for (double& e : a) e /= s;
    return s;
  };
  normalize(v);
  for (out.iterations = 1; out.iterations <= 10000; ++out.iterations) {
    for (int j = 0; j < d; ++j) w[j] = std::inner_product(c.row(j), c.row(j) + d, v.begin(), 0.0);
    if (normalize(w) == 0.0) break;
    double diff = 0;
    for (int j = 0; j < d; ++j) diff += (w[j] - v[j]) * (w[j] - v[j]);
    v.swap(w);
    if (std::sqrt(diff) < 1e-8) break;
  }
  int big = 0;
  for (int j = 1; j < d; ++j) {
    if (std::abs(v[j]) > std::abs(v[big])) big = j;
  }
  if (v[big] < 0) {
    for (double& e : v) e = -e;
  }
  for (int j = 0; j < d; ++j) w[j] = std::inner_product(c.row(j), c.row(j) + d, v.begin(), 0.0);
  out.eigenvalue = std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
  for (int i = 0; i < n; ++i) out.scores[i] = std::inner_product(x.row(i), x.row(i) + d, v.begin(), 0.0);
  out.loading = v;
  return out;
}

NodeColoring node_pca_coloring(Model& m, const MolGraph& mol) { return pca_first_component(encode_nodes(m, mol)); }

DecompositionInstance split_at_bond(const MolGraph& mol, int bond, int core_atom) {
  if (bond < 0 || bond >= mol.num_bonds()) throw GraphError("cut bond index out of range");
  const Bond& b = mol.bond(bond);
  if (core_atom != b.begin && core_atom != b.end) throw GraphError("core atom is not an endpoint of the cut bond");
  if (bonds_in_ring(mol)[bond]) throw GraphError("cannot cut a ring bond");
  if (b.attrs.is_masked() || mol.atom(b.begin).is_stub || mol.atom(b.end).is_stub) {
    throw GraphError("cannot cut a masked or stub bond");
  }
  std::vector<bool> seen(mol.num_atoms(), false);
  std::vector<int> stack{core_atom}, side;
  seen[core_atom] = true;
  while (!stack.empty()) {
    const int a = stack.back();
    stack.pop_back();
    side.push_back(a);
    for (const Neighbor& nb : mol.neighbors(a)) {
      if (nb.bond == bond || seen[nb.atom]) continue;
      seen[nb.atom] = true;
      stack.push_back(nb.atom);
    }
  }
  std::sort(side.begin(), side.end());
  const std::vector<Branch> branches = identify_rgroups(mol, side);
  int which = -1;
  for (size_t i = 0; i < branches.size(); ++i) {
    if (branches[i].cut_bond == bond) which = static_cast<int>(i);
  }
  if (which < 0) throw GraphError("cut bond does not separate the molecule");
  return decompose(mol, side, branches, {which});
}

nlohmann::json LeadReport::to_json() const {
  nlohmann::json cands = nlohmann::json::array();
  for (const LeadCandidate& c : candidates) {
    cands.push_back({{"smiles", c.candidate.smiles},
                     {"key", c.candidate.key},
                     {"rgroup_key", c.candidate.source_rgroup_key},
                     {"score", c.candidate.score},
                     {"rank", c.retrieval_rank},
                     {"valid", c.candidate.valid},
                     {"descriptors_before", before.to_json()},
                     {"descriptors_after", c.after.to_json()}});
  }
  const auto& reg = PatternRegistry::builtin();
  nlohmann::json names = condition.size() == static_cast<size_t>(reg.size()) ? nlohmann::json(reg.names_of(condition))
                                                                            : nlohmann::json::array();
  return {{"original", original},
          {"query_template", query_template},
          {"cut", {{"bond", cut_bond}, {"stub_index", stub_index}}},
          {"condition_bits", names},
          {"attempted", attempted},
          {"valid", valid},
          {"valid_fraction", valid_fraction()},
          {"candidates", cands}};
}

LeadReport optimize_lead(Model& m, const MolGraph& mol, int bond, int core_atom, const ConditionVector& cond,
                         const RGroupLibrary& lib, int k) {
  LeadReport rep;
  rep.original = write_smiles(mol);
  rep.cut_bond = bond;
  rep.condition = cond;
  rep.before = descriptor_report(mol);
  const DecompositionInstance inst = split_at_bond(mol, bond, core_atom);
  rep.query_template = write_smiles(inst.query);
  rep.stub_index = inst.cuts.at(0).stub_q;
  if (k <= 0) return rep;
  const RetrievalResult rr = retrieve(m, inst.query, rep.stub_index, cond, lib, k);
  for (size_t i = 0; i < rr.hits.size(); ++i) {
    const Hit& h = rr.hits[i];
    MolGraph rg;
    try {
      rg = parse_smiles(lib.smiles[h.row]);
    } catch (const MolError&) {
      continue;
    }
    int tried = 0;
    auto cands = reattach(inst.query, rep.stub_index, rg, {}, &tried);
    rep.attempted += tried;
    rep.valid += static_cast<int>(cands.size());
    for (ReattachmentCandidate& c : cands) {
      c.score = h.score;
      c.source_rgroup_key = h.key;
      LeadCandidate lc;
      lc.after = descriptor_report(c.molecule);
      lc.candidate = std::move(c);
      lc.retrieval_rank = static_cast<int>(i) + 1;
      rep.candidates.push_back(std::move(lc));
    }
  }
  return rep;
}

}  // namespace molpla
