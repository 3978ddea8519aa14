#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "molpla/dataset.hpp"
#include "molpla/encoder.hpp"

namespace molpla {

class NotAStubError : public MolError {
 public:
  using MolError::MolError;
};

class MissingGroundTruthError : public MolError {
 public:
  using MolError::MolError;
};

inline constexpr int kDefaultRetrievalK = 1000;

struct RGroupLibrary {
  int d = 0;
  std::vector<std::string> keys;
  std::vector<std::string> smiles;
  std::vector<long> popularity;
  std::vector<ConditionVector> conditions;
  std::vector<float> embeddings;  // rows aligned with keys, row-major N x d
  std::string dataset_hash;
  std::string checkpoint_hash;
  std::vector<SkipEntry> skipped;

  int size() const { return static_cast<int>(keys.size()); }
  const float* row(int i) const { return embeddings.data() + static_cast<size_t>(i) * d; }
  int index_of(const std::string& key) const;  // -1 if absent
};

// Encodes every R-group record (readout then the R-group head). Unparsable
// entries are skipped and logged in `skipped`.
RGroupLibrary build_library(Model& m, const std::vector<RGroupRecord>& rgroups, const std::string& dataset_hash,
                            const std::string& checkpoint_hash);

// library.json (keys, smiles, popularity, conditions, hashes) and
// embeddings.f32 (float32 little-endian).
void save_library(const RGroupLibrary& lib, const std::filesystem::path& dir);
RGroupLibrary load_library(const std::filesystem::path& dir);
std::string library_hash(const std::filesystem::path& dir);

struct Hit {
  int row = -1;
  std::string key;
  double score = 0;
};

struct RetrievalResult {
  std::string template_smiles;
  int stub_index = -1;
  ConditionVector condition;
  int k = 0;
  std::vector<Hit> hits;

  nlohmann::json to_json(const RGroupLibrary& lib) const;
};

// z_c for one stub of a query template. Throws NotAStubError.
std::vector<float> query_embedding(Model& m, const MolGraph& tmpl, int stub_index, const ConditionVector& cond);
// Same for several stubs sharing one encoder pass; one row per stub.
std::vector<std::vector<float>> query_embeddings(Model& m, const MolGraph& tmpl, const std::vector<int>& stubs,
                                                 const std::vector<ConditionVector>& conds);

// Exact inner-product top-k, score descending then key ascending.
std::vector<Hit> top_k(const RGroupLibrary& lib, const float* query, int k);

RetrievalResult retrieve(Model& m, const MolGraph& tmpl, int stub_index, const ConditionVector& cond,
                         const RGroupLibrary& lib, int k = kDefaultRetrievalK);

enum class Baseline { Random, Popularity, CondNone, CondAll };
Baseline baseline_from_string(const std::string& s);
const char* baseline_name(Baseline b);

// Random: uniform sample of k rows without replacement (scores 0) drawn from
// `rng`. Popularity: the k most frequent keys (count descending, key
// ascending), identical for every query. CondNone/CondAll: retrieve() with
// the condition overridden.
RetrievalResult baseline_retrieve(Baseline mode, Model& m, const MolGraph& tmpl, int stub_index,
                                  const RGroupLibrary& lib, int k, Rng& rng);

struct RetrievalMetrics {
  std::string method;
  std::string dataset;
  int n_queries = 0;
  double mrr = 0;
  std::vector<int> k_list;
  std::vector<double> recall;  // aligned with k_list

  nlohmann::json to_json() const;
};

struct EvalOptions {
  std::vector<int> k_list = {10, 50, 100};
  int window = kDefaultRetrievalK;
  std::string method = "molpla";  // molpla | random | popularity | cond_none | cond_all
  std::uint64_t seed = 0;
  std::string dataset = "test";
};

// One query per (instance, cut); the ground truth is the key of the cut's
// decoupled R-group. Reciprocal rank 0 outside the window.
RetrievalMetrics evaluate_retrieval(Model& m, const std::vector<InstanceRecord>& records, const RGroupLibrary& lib,
                                    const EvalOptions& opts = {});

// Expected MRR of uniform random ranking over n items with the given window.
double random_expected_mrr(int n, int window = kDefaultRetrievalK);

}  // namespace molpla
