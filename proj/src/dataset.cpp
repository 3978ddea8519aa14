#include "molpla/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "molpla/chem.hpp"
#include "molpla/graph_json.hpp"
#include "molpla/io.hpp"
#include "molpla/rng.hpp"
#include "molpla/smiles.hpp"

namespace molpla {

using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "train";
}

CoreMode core_mode_from_string(const std::string& s) {
  if (s == "putative") return CoreMode::Putative;
  if (s == "murcko") return CoreMode::Murcko;
  throw MolError("unknown core mode '" + s + "' (expected putative or murcko)");
}

const char* core_mode_name(CoreMode m) { return m == CoreMode::Murcko ? "murcko" : "putative"; }

json DatasetConfig::to_json() const {
  return {{"core_mode", core_mode_name(core_mode)},
          {"max_cores", max_cores},
          {"rules",
           {{"ring_to_chain", rules.ring_to_chain},
            {"amide", rules.amide},
            {"ester", rules.ester},
            {"amine", rules.amine},
            {"ether", rules.ether},
            {"sulfonamide", rules.sulfonamide}}},
          {"common_percentile", common_percentile},
          {"common_threshold", common_threshold ? json(*common_threshold) : json()},
          {"seed", seed},
          {"ratios", {ratios[0], ratios[1], ratios[2]}}};
}

std::string DatasetConfig::hash() const {
  const std::string s = to_json().dump();
  return hash_bytes(s.data(), s.size());
}

namespace {

json bits_to_json(const ConditionVector& bits) {
  json out = json::array();
  for (size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

ConditionVector bits_from_json(const json& j, int n) {
  ConditionVector bits(n, 0);
  for (const json& v : j) {
    const int i = v.get<int>();
    if (i < 0 || i >= n) throw MolError("condition bit index out of range");
    bits[i] = 1;
  }
  return bits;
}

json bond_to_json(const BondAttrs& b) {
  MolGraph tmp;
  tmp.add_atom(AtomAttrs::element(6));
  tmp.add_atom(AtomAttrs::element(6));
  tmp.add_bond(0, 1, b);
  json j = graph_to_json(tmp).at("bonds").at(0);
  j.erase("begin");
  j.erase("end");
  return j;
}

BondAttrs bond_from_json(const json& j) {
  json g = {{"atoms", json::array()}, {"bonds", json::array()}};
  for (int i = 0; i < 2; ++i) {
    g["atoms"].push_back({{"atomic_number", 6}, {"formal_charge", 0}, {"chirality_tag", 0},
                          {"hybridization", 0}, {"num_explicit_hs", 0}, {"aromatic", false},
                          {"is_stub", false}});
  }
  json b = j;
  b["begin"] = 0;
  b["end"] = 1;
  g["bonds"].push_back(b);
  return graph_from_json(g).bond(0).attrs;
}

Split split_from_name(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw MolError("unknown split '" + s + "'");
}

}  // namespace

json InstanceRecord::to_json() const {
  json cut_rows = json::array();
  json linker = json::array();
  for (const InstanceCut& c : cuts) {
    cut_rows.push_back({{"core_atom", c.core_atom}, {"r_atom", c.r_atom}, {"bond", bond_to_json(c.bond)},
                        {"rgroup", c.rgroup}});
    linker.push_back({c.m_index, c.q_stub, c.r_stub});
  }
  json conds = json::array();
  for (const auto& c : conditions) conds.push_back(bits_to_json(c));
  return {{"mol_id", mol_id},     {"mol", mol},       {"core_id", core_id},
          {"subset_id", subset_id}, {"query", query},   {"rgroups", rgroups},
          {"rgroup_keys", rgroup_keys}, {"conditions", conds}, {"cuts", cut_rows},
          {"linker_map", linker}, {"split", split_name(split)}};
}

InstanceRecord InstanceRecord::from_json(const json& j, int condition_bits) {
  InstanceRecord r;
  try {
    r.mol_id = j.at("mol_id").get<int>();
    r.mol = j.at("mol").get<std::string>();
    r.core_id = j.at("core_id").get<int>();
    r.subset_id = j.at("subset_id").get<int>();
    r.query = j.at("query").get<std::string>();
    r.rgroups = j.at("rgroups").get<std::vector<std::string>>();
    r.rgroup_keys = j.at("rgroup_keys").get<std::vector<std::string>>();
    for (const json& c : j.at("conditions")) r.conditions.push_back(bits_from_json(c, condition_bits));
    const json& cuts = j.at("cuts");
    const json& linker = j.at("linker_map");
    if (cuts.size() != linker.size()) throw MolError("cuts and linker_map lengths differ");
    for (size_t i = 0; i < cuts.size(); ++i) {
      InstanceCut c;
      c.core_atom = cuts[i].at("core_atom").get<int>();
      c.r_atom = cuts[i].at("r_atom").get<int>();
      c.bond = bond_from_json(cuts[i].at("bond"));
      c.rgroup = cuts[i].at("rgroup").get<int>();
      c.m_index = linker[i].at(0).get<int>();
      c.q_stub = linker[i].at(1).get<int>();
      c.r_stub = linker[i].at(2).get<int>();
      r.cuts.push_back(c);
    }
    r.split = split_from_name(j.at("split").get<std::string>());
  } catch (const json::exception& e) {
    throw MolError(std::string("malformed instance record: ") + e.what());
  }
  return r;
}

InstanceRecord make_instance_record(const DecompositionInstance& inst, int mol_id,
                                    const PatternRegistry& registry) {
  auto positions = [](const WrittenSmiles& w, int n) {
    std::vector<int> pos(n, -1);
    for (size_t k = 0; k < w.order.size(); ++k) pos[w.order[k]] = static_cast<int>(k);
    return pos;
  };
  InstanceRecord r;
  r.mol_id = mol_id;
  r.core_id = inst.core_id;
  r.subset_id = inst.subset_id;
  const WrittenSmiles wm = write_smiles_ordered(inst.original);
  const WrittenSmiles wq = write_smiles_ordered(inst.query);
  r.mol = wm.smiles;
  r.query = wq.smiles;
  const auto pm = positions(wm, inst.original.num_atoms());
  const auto pq = positions(wq, inst.query.num_atoms());
  std::vector<std::vector<int>> pr;
  for (const MolGraph& rg : inst.rgroups) {
    const WrittenSmiles wr = write_smiles_ordered(rg);
    r.rgroups.push_back(wr.smiles);
    r.rgroup_keys.push_back(canonical_key(rg));
    r.conditions.push_back(registry.evaluate(rg));
    pr.push_back(positions(wr, rg.num_atoms()));
  }
  for (const CutRecord& c : inst.cuts) {
    InstanceCut ic;
    ic.core_atom = pm[c.core_atom];
    ic.r_atom = pm[c.r_atom];
    ic.bond = c.original_bond;
    ic.m_index = pm[c.linker_node_m];
    ic.q_stub = pq[c.stub_q];
    ic.r_stub = pr[c.rgroup][c.stub_r];
    ic.rgroup = c.rgroup;
    r.cuts.push_back(ic);
  }
  return r;
}

json RGroupRecord::to_json() const {
  return {{"key", key},
          {"smiles", smiles},
          {"count", count},
          {"condition", bits_to_json(condition)},
          {"is_common", is_common}};
}

RGroupRecord RGroupRecord::from_json(const json& j, int condition_bits) {
  RGroupRecord r;
  try {
    r.key = j.at("key").get<std::string>();
    r.smiles = j.at("smiles").get<std::string>();
    r.count = j.at("count").get<long>();
    r.condition = bits_from_json(j.at("condition"), condition_bits);
    r.is_common = j.at("is_common").get<bool>();
  } catch (const json::exception& e) {
    throw MolError(std::string("malformed R-group record: ") + e.what());
  }
  return r;
}

std::vector<const InstanceRecord*> PretrainDataset::split(Split s) const {
  std::vector<const InstanceRecord*> out;
  for (const auto& r : instances) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

std::vector<RGroupRecord> dedup_rgroups(const std::vector<InstanceRecord>& instances,
                                        double common_percentile,
                                        std::optional<double> threshold_override,
                                        double* threshold_out) {
  std::map<std::string, RGroupRecord> by_key;
  for (const InstanceRecord& inst : instances) {
    for (size_t r = 0; r < inst.rgroups.size(); ++r) {
      auto [it, inserted] = by_key.try_emplace(inst.rgroup_keys[r]);
      RGroupRecord& rec = it->second;
      if (inserted) {
        rec.key = inst.rgroup_keys[r];
        rec.smiles = inst.rgroups[r];
        rec.condition = inst.conditions[r];
      }
      ++rec.count;
    }
  }
  std::vector<double> counts;
  for (const auto& [k, rec] : by_key) counts.push_back(static_cast<double>(rec.count));
  const double threshold = threshold_override ? *threshold_override : percentile(counts, common_percentile);
  if (threshold_out) *threshold_out = threshold;
  std::vector<RGroupRecord> out;
  for (auto& [k, rec] : by_key) {
    rec.is_common = static_cast<double>(rec.count) > threshold;
    out.push_back(std::move(rec));
  }
  return out;
}

PretrainDataset build_pretrain_dataset(const std::vector<std::string>& corpus,
                                       const DatasetConfig& config,
                                       const PatternRegistry& registry) {
  PretrainDataset ds;
  ds.config = config;
  ds.registry_version = registry.version();

  std::vector<InstanceRecord> raw;
  std::map<std::string, long> core_freq;
  std::map<int, long> core_hist;
  std::vector<double> cores_per_mol;
  std::vector<int> mol_ids_parsed;

  for (size_t line = 0; line < corpus.size(); ++line) {
    const std::string& smi = corpus[line];
    const int mol_id = static_cast<int>(line);
    MoleculeRecord mrec;
    mrec.mol_id = mol_id;
    mrec.smiles = smi;
    MolGraph g;
    try {
      g = parse_smiles(smi);
    } catch (const MolError& e) {
      ds.skipped.push_back({mol_id, smi, e.what()});
      continue;
    }
    if (g.num_components() != 1) {
      ds.skipped.push_back({mol_id, smi, "molecule is not a single connected component"});
      continue;
    }
    if (!g.stub_atoms().empty()) {
      ds.skipped.push_back({mol_id, smi, "molecule contains attachment stubs"});
      continue;
    }
    std::vector<CoreCandidate> cores;
    try {
      if (config.core_mode == CoreMode::Murcko) {
        const auto atoms = murcko_atoms(g);
        if (atoms.empty()) throw NoRingError("molecule has no ring");
        cores.push_back({atoms, canonical_key(murcko_scaffold(g)), true});
      } else {
        cores = enumerate_putative_cores(g, config.rules, config.max_cores);
      }
    } catch (const MolError& e) {
      ds.skipped.push_back({mol_id, smi, e.what()});
      continue;
    }
    mrec.n_cores = static_cast<int>(cores.size());
    ++core_hist[mrec.n_cores];
    cores_per_mol.push_back(mrec.n_cores);
    for (const auto& c : cores) ++core_freq[c.key];

    int produced = 0;
    for (size_t j = 0; j < cores.size(); ++j) {
      try {
        for (const auto& inst : enumerate_decompositions(g, cores[j].atoms, static_cast<int>(j))) {
          raw.push_back(make_instance_record(inst, mol_id, registry));
          ++produced;
        }
      } catch (const MolError& e) {
        ds.skipped.push_back({mol_id, smi, std::string("core ") + std::to_string(j) + ": " + e.what()});
      }
    }
    if (produced == 0) ds.skipped.push_back({mol_id, smi, "no decomposition instances (no R-groups)"});
    ds.molecules.push_back(mrec);
  }
  ds.raw_instances = static_cast<long>(raw.size());

  ds.rgroups = dedup_rgroups(raw, config.common_percentile, config.common_threshold, &ds.common_threshold);
  std::map<std::string, bool> common;
  for (const auto& r : ds.rgroups) common[r.key] = r.is_common;

  // molecule-level random split
  std::vector<int> order(ds.molecules.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.seed);
  rng.shuffle(order);
  const double total = config.ratios[0] + config.ratios[1] + config.ratios[2];
  const size_t n = order.size();
  const size_t n_train = static_cast<size_t>(std::llround(static_cast<double>(n) * config.ratios[0] / total));
  const size_t n_valid = static_cast<size_t>(std::llround(static_cast<double>(n) * config.ratios[1] / total));
  std::map<int, Split> split_of;
  for (size_t k = 0; k < n; ++k) {
    Split s = k < n_train ? Split::Train : (k < n_train + n_valid ? Split::Valid : Split::Test);
    ds.molecules[order[k]].split = s;
    split_of[ds.molecules[order[k]].mol_id] = s;
  }

  std::map<int, int> survivors;
  for (InstanceRecord& r : raw) {
    int n_common = 0;
    for (const auto& k : r.rgroup_keys) n_common += common[k] ? 1 : 0;
    if (2 * n_common > static_cast<int>(r.rgroup_keys.size())) continue;
    r.split = split_of.at(r.mol_id);
    ++survivors[r.mol_id];
    ds.instances.push_back(std::move(r));
  }
  for (auto& m : ds.molecules) m.n_instances = survivors[m.mol_id];

  // statistics report
  json hist = json::object();
  for (const auto& [k, v] : core_hist) hist[std::to_string(k)] = v;
  auto top_n = [](std::vector<std::pair<std::string, long>> items, size_t n) {
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (items.size() > n) items.resize(n);
    json out = json::array();
    for (const auto& [k, v] : items) out.push_back({{"key", k}, {"count", v}});
    return out;
  };
  std::vector<std::pair<std::string, long>> rg_items, core_items(core_freq.begin(), core_freq.end());
  long occurrences = 0;
  int n_common = 0;
  for (const auto& r : ds.rgroups) {
    rg_items.emplace_back(r.key, r.count);
    occurrences += r.count;
    n_common += r.is_common ? 1 : 0;
  }
  json split_counts = json::object();
  for (Split s : {Split::Train, Split::Valid, Split::Test}) {
    long mols = 0;
    for (const auto& m : ds.molecules) mols += m.split == s ? 1 : 0;
    split_counts[split_name(s)] = {{"molecules", mols}, {"instances", ds.split(s).size()}};
  }
  ds.stats = {
      {"n_input", corpus.size()},
      {"n_molecules", ds.molecules.size()},
      {"n_skip_entries", ds.skipped.size()},
      {"raw_instances", ds.raw_instances},
      {"instances", ds.instances.size()},
      {"dropped_by_common_filter", ds.raw_instances - static_cast<long>(ds.instances.size())},
      {"distinct_rgroups", ds.rgroups.size()},
      {"rgroup_occurrences", occurrences},
      {"common_rgroups", n_common},
      {"common_threshold", ds.common_threshold},
      {"cores_per_molecule",
       {{"histogram", hist},
        {"median", percentile(cores_per_mol, 50.0)},
        {"mean", cores_per_mol.empty() ? 0.0
                                       : std::accumulate(cores_per_mol.begin(), cores_per_mol.end(), 0.0) /
                                             static_cast<double>(cores_per_mol.size())}}},
      {"top_cores", top_n(core_items, 20)},
      {"top_rgroups", top_n(rg_items, 20)},
      {"splits", split_counts},
  };
  return ds;
}

void save_dataset(const PretrainDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json files = json::object();
  auto put = [&](const std::string& name, const std::vector<json>& rows) {
    write_jsonl_gz(dir / name, rows);
    files[name] = {{"rows", rows.size()}, {"hash", hash_file(dir / name)}};
  };
  for (Split s : {Split::Train, Split::Valid, Split::Test}) {
    std::vector<json> rows;
    for (const auto* r : ds.split(s)) rows.push_back(r->to_json());
    put(std::string(split_name(s)) + ".jsonl.gz", rows);
  }
  {
    std::vector<json> rows;
    for (const auto& r : ds.rgroups) rows.push_back(r.to_json());
    put("rgroups.jsonl.gz", rows);
  }
  {
    std::vector<json> rows;
    for (const auto& m : ds.molecules) {
      rows.push_back({{"mol_id", m.mol_id}, {"smiles", m.smiles}, {"split", split_name(m.split)},
                      {"n_cores", m.n_cores}, {"n_instances", m.n_instances}});
    }
    put("molecules.jsonl.gz", rows);
  }
  {
    std::vector<json> rows;
    for (const auto& s : ds.skipped) rows.push_back({{"line", s.line}, {"smiles", s.smiles}, {"reason", s.reason}});
    put("skipped.jsonl.gz", rows);
  }
  write_json_file(dir / "stats.json", ds.stats);
  files["stats.json"] = {{"hash", hash_file(dir / "stats.json")}};
  json manifest = {{"format", "molpla-dataset-1"},
                   {"config", ds.config.to_json()},
                   {"config_hash", ds.config.hash()},
                   {"registry_version", ds.registry_version},
                   {"condition_bits", PatternRegistry::builtin().size()},
                   {"files", files}};
  write_json_file(dir / "manifest.json", manifest);
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  LoadedDataset out;
  out.manifest = read_json_file(dir / "manifest.json");
  out.hash = hash_file(dir / "manifest.json");
  const int bits = out.manifest.value("condition_bits", PatternRegistry::builtin().size());
  auto load = [&](const char* name) {
    std::vector<InstanceRecord> rows;
    for (const json& j : read_jsonl_gz(dir / name)) rows.push_back(InstanceRecord::from_json(j, bits));
    return rows;
  };
  out.train = load("train.jsonl.gz");
  out.valid = load("valid.jsonl.gz");
  out.test = load("test.jsonl.gz");
  for (const json& j : read_jsonl_gz(dir / "rgroups.jsonl.gz")) out.rgroups.push_back(RGroupRecord::from_json(j, bits));
  return out;
}

std::string scaffold_key(const MolGraph& g) {
  const MolGraph s = murcko_scaffold(g);
  return s.empty() ? std::string() : canonical_key(s);
}

std::vector<Split> scaffold_split(const std::vector<std::string>& smiles, const double ratios_in[3]) {
  const double default_ratios[3] = {8, 1, 1};
  const double* ratios = ratios_in ? ratios_in : default_ratios;
  const size_t n = smiles.size();
  std::map<std::string, std::vector<size_t>> groups;
  for (size_t i = 0; i < n; ++i) {
    std::string key;
    try {
      key = scaffold_key(parse_smiles(smiles[i]));
    } catch (const MolError&) {
      key = "\x01unparsed:" + std::to_string(i);
    }
    groups[key].push_back(i);
  }
  std::vector<std::pair<std::string, std::vector<size_t>>> ordered(groups.begin(), groups.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second.size() != b.second.size()) return a.second.size() > b.second.size();
    return a.first < b.first;
  });
  const double total = ratios[0] + ratios[1] + ratios[2];
  const double train_cut = ratios[0] / total * static_cast<double>(n);
  const double valid_cut = ratios[1] / total * static_cast<double>(n);
  std::vector<Split> out(n, Split::Train);
  size_t n_train = 0, n_valid = 0;
  for (const auto& [key, members] : ordered) {
    Split s;
    if (static_cast<double>(n_train + members.size()) <= train_cut + 1e-9) {
      s = Split::Train;
      n_train += members.size();
    } else if (static_cast<double>(n_valid + members.size()) <= valid_cut + 1e-9) {
      s = Split::Valid;
      n_valid += members.size();
    } else {
      s = Split::Test;
    }
    for (size_t i : members) out[i] = s;
  }
  return out;
}

}  // namespace molpla
