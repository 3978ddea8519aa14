#include "molpla/retrieval.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "molpla/io.hpp"
#include "molpla/kernels.hpp"
#include "molpla/registry.hpp"
#include "molpla/smiles.hpp"

namespace molpla {

int RGroupLibrary::index_of(const std::string& key) const {
  auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it != keys.end() && *it == key) return static_cast<int>(it - keys.begin());
  // keys are sorted when built from a dataset; fall back for hand-made ones
  for (size_t i = 0; i < keys.size(); ++i) {
    if (keys[i] == key) return static_cast<int>(i);
  }
  return -1;
}

RGroupLibrary build_library(Model& m, const std::vector<RGroupRecord>& rgroups, const std::string& dataset_hash,
                            const std::string& checkpoint_hash) {
  RGroupLibrary lib;
  lib.d = m.config.d;
  lib.dataset_hash = dataset_hash;
  lib.checkpoint_hash = checkpoint_hash;
  std::vector<MolGraph> graphs;
  std::vector<const RGroupRecord*> kept;
  for (size_t i = 0; i < rgroups.size(); ++i) {
    try {
      graphs.push_back(parse_smiles(rgroups[i].smiles));
      if (graphs.back().empty()) throw MolError("empty R-group");
      kept.push_back(&rgroups[i]);
    } catch (const MolError& e) {
      if (graphs.size() > kept.size()) graphs.pop_back();
      lib.skipped.push_back({static_cast<int>(i) + 1, rgroups[i].smiles, e.what()});
    }
  }
  const size_t chunk = 256;
  lib.embeddings.reserve(kept.size() * lib.d);
  for (size_t start = 0; start < graphs.size(); start += chunk) {
    const size_t end = std::min(graphs.size(), start + chunk);
    std::vector<const MolGraph*> ptrs;
    for (size_t i = start; i < end; ++i) ptrs.push_back(&graphs[i]);
    Tape t;
    const GraphBatch gb = GraphBatch::from_graphs(ptrs);
    const Matrix& z = t.value(project(t, m, Head::RGroup, readout(t, encode(t, m, gb), gb)));
    for (double v : z.data) lib.embeddings.push_back(static_cast<float>(v));
  }
  for (const RGroupRecord* r : kept) {
    lib.keys.push_back(r->key);
    lib.smiles.push_back(r->smiles);
    lib.popularity.push_back(r->count);
    lib.conditions.push_back(r->condition);
  }
  return lib;
}

void save_library(const RGroupLibrary& lib, const std::filesystem::path& dir) {
  std::vector<char> bytes(lib.embeddings.size() * sizeof(float));
  if (!bytes.empty()) std::memcpy(bytes.data(), lib.embeddings.data(), bytes.size());
  nlohmann::json entries = nlohmann::json::array();
  for (int i = 0; i < lib.size(); ++i) {
    nlohmann::json bits = nlohmann::json::array();
    for (size_t b = 0; b < lib.conditions[i].size(); ++b) {
      if (lib.conditions[i][b]) bits.push_back(b);
    }
    entries.push_back({{"key", lib.keys[i]}, {"smiles", lib.smiles[i]}, {"count", lib.popularity[i]}, {"condition", bits}});
  }
  nlohmann::json skipped = nlohmann::json::array();
  for (const SkipEntry& s : lib.skipped) skipped.push_back({{"line", s.line}, {"smiles", s.smiles}, {"reason", s.reason}});
  nlohmann::json doc = {{"format", "molpla-library-1"},
                        {"d", lib.d},
                        {"n", lib.size()},
                        {"condition_bits", lib.conditions.empty() ? 0 : lib.conditions[0].size()},
                        {"dataset_hash", lib.dataset_hash},
                        {"checkpoint_hash", lib.checkpoint_hash},
                        {"embeddings_hash", hash_bytes(bytes.data(), bytes.size())},
                        {"entries", entries},
                        {"skipped", skipped}};
  write_binary_file(dir / "embeddings.f32", bytes);
  write_json_file(dir / "library.json", doc);
}

RGroupLibrary load_library(const std::filesystem::path& dir) {
  const nlohmann::json doc = read_json_file(dir / "library.json");
  if (doc.value("format", "") != "molpla-library-1") throw IoError("unknown library format");
  const std::vector<char> bytes = read_binary_file(dir / "embeddings.f32");
  if (doc.value("embeddings_hash", "") != hash_bytes(bytes.data(), bytes.size())) {
    throw IoError("library embeddings do not match the recorded hash");
  }
  RGroupLibrary lib;
  lib.d = doc.at("d");
  lib.dataset_hash = doc.value("dataset_hash", "");
  lib.checkpoint_hash = doc.value("checkpoint_hash", "");
  const int bits = doc.value("condition_bits", 0);
  for (const auto& e : doc.at("entries")) {
    lib.keys.push_back(e.at("key"));
    lib.smiles.push_back(e.at("smiles"));
    lib.popularity.push_back(e.at("count"));
    ConditionVector cv(bits, 0);
    for (int b : e.at("condition")) cv.at(b) = 1;
    lib.conditions.push_back(std::move(cv));
  }
  for (const auto& s : doc.value("skipped", nlohmann::json::array())) {
    lib.skipped.push_back({s.at("line"), s.at("smiles"), s.at("reason")});
  }
  if (bytes.size() != static_cast<size_t>(lib.size()) * lib.d * sizeof(float)) throw IoError("library size mismatch");
  lib.embeddings.resize(bytes.size() / sizeof(float));
  if (!bytes.empty()) std::memcpy(lib.embeddings.data(), bytes.data(), bytes.size());
  return lib;
}

std::string library_hash(const std::filesystem::path& dir) { return hash_file(dir / "library.json"); }

nlohmann::json RetrievalResult::to_json(const RGroupLibrary& lib) const {
  nlohmann::json rows = nlohmann::json::array();
  for (size_t i = 0; i < hits.size(); ++i) {
    const Hit& h = hits[i];
    rows.push_back({{"rank", i + 1},
                    {"key", h.key},
                    {"smiles", lib.smiles[h.row]},
                    {"score", h.score},
                    {"count", lib.popularity[h.row]}});
  }
  const auto& reg = PatternRegistry::builtin();
  nlohmann::json names = condition.size() == static_cast<size_t>(reg.size()) ? nlohmann::json(reg.names_of(condition))
                                                                            : nlohmann::json::array();
  return {{"template", template_smiles}, {"stub_index", stub_index}, {"condition", names}, {"k", k}, {"results", rows}};
}

std::vector<std::vector<float>> query_embeddings(Model& m, const MolGraph& tmpl, const std::vector<int>& stubs,
                                                 const std::vector<ConditionVector>& conds) {
  if (stubs.size() != conds.size()) throw ShapeError("one condition vector per stub required");
  for (int s : stubs) {
    if (s < 0 || s >= tmpl.num_atoms() || !tmpl.atom(s).is_stub) {
      throw NotAStubError("atom " + std::to_string(s) + " is not a stub of the query template");
    }
  }
  const int cb = m.config.condition_bits;
  Matrix c(static_cast<int>(stubs.size()), cb);
  for (size_t i = 0; i < conds.size(); ++i) {
    if (static_cast<int>(conds[i].size()) != cb) throw ShapeError("condition vector length mismatch");
    for (int b = 0; b < cb; ++b) c(static_cast<int>(i), b) = conds[i][b] ? 1.0 : 0.0;
  }
  Tape t;
  const GraphBatch gb = GraphBatch::from_graph(tmpl);
  const Tape::Id h = encode(t, m, gb);
  const Tape::Id z = project(t, m, Head::Query, t.concat_cols(t.gather_rows(h, stubs), t.constant(std::move(c))));
  const Matrix& zv = t.value(z);
  std::vector<std::vector<float>> out(stubs.size(), std::vector<float>(zv.cols));
  for (int i = 0; i < zv.rows; ++i) {
    for (int j = 0; j < zv.cols; ++j) out[i][j] = static_cast<float>(zv(i, j));
  }
  return out;
}

std::vector<float> query_embedding(Model& m, const MolGraph& tmpl, int stub_index, const ConditionVector& cond) {
  return query_embeddings(m, tmpl, {stub_index}, {cond}).front();
}

std::vector<Hit> top_k(const RGroupLibrary& lib, const float* query, int k) {
  const int n = lib.size();
  k = std::max(0, std::min(k, n));
  std::vector<float> scores(n);
  for (int i = 0; i < n; ++i) scores[i] = kernels::dot_f32(query, lib.row(i), lib.d);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto better = [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return lib.keys[a] < lib.keys[b];
  };
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), better);
  std::vector<Hit> hits;
  hits.reserve(k);
  for (int i = 0; i < k; ++i) hits.push_back({idx[i], lib.keys[idx[i]], scores[idx[i]]});
  return hits;
}

RetrievalResult retrieve(Model& m, const MolGraph& tmpl, int stub_index, const ConditionVector& cond,
                         const RGroupLibrary& lib, int k) {
  if (lib.d != m.config.d) throw ShapeError("library and model dimensions differ");
  RetrievalResult r;
  r.template_smiles = write_smiles(tmpl);
  r.stub_index = stub_index;
  r.condition = cond;
  r.k = k;
  const std::vector<float> q = query_embedding(m, tmpl, stub_index, cond);
  r.hits = top_k(lib, q.data(), k);
  return r;
}

Baseline baseline_from_string(const std::string& s) {
  if (s == "random") return Baseline::Random;
  if (s == "popularity") return Baseline::Popularity;
  if (s == "cond_none") return Baseline::CondNone;
  if (s == "cond_all") return Baseline::CondAll;
  throw MolError("unknown baseline '" + s + "'");
}

const char* baseline_name(Baseline b) {
  switch (b) {
    case Baseline::Random: return "random";
    case Baseline::Popularity: return "popularity";
    case Baseline::CondNone: return "cond_none";
    case Baseline::CondAll: return "cond_all";
  }
  return "?";
}

namespace {

std::vector<int> popularity_order(const RGroupLibrary& lib) {
  std::vector<int> idx(lib.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (lib.popularity[a] != lib.popularity[b]) return lib.popularity[a] > lib.popularity[b];
    return lib.keys[a] < lib.keys[b];
  });
  return idx;
}

std::vector<Hit> random_hits(const RGroupLibrary& lib, int k, Rng& rng) {
  const int n = lib.size();
  k = std::max(0, std::min(k, n));
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<Hit> hits;
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.index(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
    hits.push_back({idx[i], lib.keys[idx[i]], 0.0});
  }
  return hits;
}

}  // namespace

RetrievalResult baseline_retrieve(Baseline mode, Model& m, const MolGraph& tmpl, int stub_index,
                                  const RGroupLibrary& lib, int k, Rng& rng) {
  const int cb = m.config.condition_bits;
  switch (mode) {
    case Baseline::CondNone: return retrieve(m, tmpl, stub_index, ConditionVector(cb, 0), lib, k);
    case Baseline::CondAll: return retrieve(m, tmpl, stub_index, ConditionVector(cb, 1), lib, k);
    default: break;
  }
  if (stub_index < 0 || stub_index >= tmpl.num_atoms() || !tmpl.atom(stub_index).is_stub) {
    throw NotAStubError("atom " + std::to_string(stub_index) + " is not a stub of the query template");
  }
  RetrievalResult r;
  r.template_smiles = write_smiles(tmpl);
  r.stub_index = stub_index;
  r.k = k;
  if (mode == Baseline::Random) {
    r.hits = random_hits(lib, k, rng);
  } else {
    const std::vector<int> order = popularity_order(lib);
    for (int i = 0; i < std::min(k, lib.size()); ++i) {
      r.hits.push_back({order[i], lib.keys[order[i]], static_cast<double>(lib.popularity[order[i]])});
    }
  }
  return r;
}

nlohmann::json RetrievalMetrics::to_json() const {
  nlohmann::json j = {{"dataset", dataset}, {"method", method}, {"MRR", mrr}, {"n_queries", n_queries}};
  for (size_t i = 0; i < k_list.size(); ++i) j["R@" + std::to_string(k_list[i])] = recall[i];
  return j;
}

RetrievalMetrics evaluate_retrieval(Model& m, const std::vector<InstanceRecord>& records, const RGroupLibrary& lib,
                                    const EvalOptions& opts) {
  RetrievalMetrics out;
  out.method = opts.method;
  out.dataset = opts.dataset;
  out.k_list = opts.k_list;
  out.recall.assign(opts.k_list.size(), 0.0);
  const bool model_based = opts.method == "molpla" || opts.method == "cond_none" || opts.method == "cond_all";
  if (!model_based && opts.method != "random" && opts.method != "popularity") {
    throw MolError("unknown retrieval method '" + opts.method + "'");
  }
  Rng rng(opts.seed);
  const std::vector<int> pop = popularity_order(lib);
  std::vector<int> pop_rank(lib.size(), 0);
  for (int i = 0; i < std::min(opts.window, lib.size()); ++i) pop_rank[pop[i]] = i + 1;
  const int cb = m.config.condition_bits;

  double rr_sum = 0;
  std::vector<long> hit_counts(opts.k_list.size(), 0);
  for (const InstanceRecord& rec : records) {
    if (rec.rgroup_keys.size() != rec.rgroups.size() || rec.cuts.empty()) {
      throw MissingGroundTruthError("instance of molecule " + std::to_string(rec.mol_id) +
                                    " has no ground-truth R-group keys");
    }
    std::vector<int> ranks;
    if (model_based) {
      const MolGraph q = parse_smiles(rec.query);
      std::vector<int> stubs;
      std::vector<ConditionVector> conds;
      for (const InstanceCut& c : rec.cuts) {
        stubs.push_back(c.q_stub);
        if (opts.method == "cond_none") conds.emplace_back(cb, 0);
        else if (opts.method == "cond_all") conds.emplace_back(cb, 1);
        else conds.push_back(rec.conditions.at(c.rgroup));
      }
      const auto zs = query_embeddings(m, q, stubs, conds);
      for (size_t i = 0; i < rec.cuts.size(); ++i) {
        const std::string& gt = rec.rgroup_keys.at(rec.cuts[i].rgroup);
        const auto hits = top_k(lib, zs[i].data(), opts.window);
        int rank = 0;
        for (size_t h = 0; h < hits.size(); ++h) {
          if (hits[h].key == gt) {
            rank = static_cast<int>(h) + 1;
            break;
          }
        }
        ranks.push_back(rank);
      }
    } else {
      for (const InstanceCut& c : rec.cuts) {
        const std::string& gt = rec.rgroup_keys.at(c.rgroup);
        const int row = lib.index_of(gt);
        int rank = 0;
        if (opts.method == "popularity") {
          rank = row >= 0 ? pop_rank[row] : 0;
        } else {
          const auto hits = random_hits(lib, opts.window, rng);
          for (size_t h = 0; h < hits.size(); ++h) {
            if (hits[h].row == row) {
              rank = static_cast<int>(h) + 1;
              break;
            }
          }
        }
        ranks.push_back(rank);
      }
    }
    for (int rank : ranks) {
      ++out.n_queries;
      if (rank > 0) rr_sum += 1.0 / rank;
      for (size_t k = 0; k < opts.k_list.size(); ++k) {
        if (rank > 0 && rank <= opts.k_list[k]) ++hit_counts[k];
      }
    }
  }
  if (out.n_queries > 0) {
    out.mrr = rr_sum / out.n_queries;
    for (size_t k = 0; k < opts.k_list.size(); ++k) out.recall[k] = static_cast<double>(hit_counts[k]) / out.n_queries;
  }
  return out;
}

double random_expected_mrr(int n, int window) {
  if (n <= 0) return 0.0;
  const int w = std::min(n, window);
  double h = 0;
  for (int r = 1; r <= w; ++r) h += 1.0 / r;
  return h / n;
}

}  // namespace molpla
