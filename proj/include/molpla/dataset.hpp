#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "molpla/decompose.hpp"
#include "molpla/registry.hpp"

namespace molpla {

enum class CoreMode { Putative, Murcko };
enum class Split : std::uint8_t { Train = 0, Valid = 1, Test = 2 };

const char* split_name(Split s);
CoreMode core_mode_from_string(const std::string& s);
const char* core_mode_name(CoreMode m);

struct DatasetConfig {
  CoreMode core_mode = CoreMode::Putative;
  int max_cores = kDefaultMaxCores;
  RuleSet rules;
  double common_percentile = 99.99;
  std::optional<double> common_threshold;  // overrides the percentile when set
  std::uint64_t seed = 7;
  double ratios[3] = {8, 1, 1};

  nlohmann::json to_json() const;
  std::string hash() const;
};

// Serialized decomposition instance. Atom indices refer to the atom order
// obtained by parsing the stored SMILES strings.
struct InstanceCut {
  int core_atom = -1;
  int r_atom = -1;
  BondAttrs bond;
  int m_index = -1;  // linker node in `mol`
  int q_stub = -1;   // stub in `query`
  int r_stub = -1;   // stub in rgroups[rgroup]
  int rgroup = -1;
};

struct InstanceRecord {
  int mol_id = 0;
  std::string mol;
  int core_id = 0;
  int subset_id = 0;
  std::string query;
  std::vector<std::string> rgroups;
  std::vector<std::string> rgroup_keys;
  std::vector<ConditionVector> conditions;
  std::vector<InstanceCut> cuts;
  Split split = Split::Train;

  nlohmann::json to_json() const;
  static InstanceRecord from_json(const nlohmann::json& j, int condition_bits);
};

InstanceRecord make_instance_record(const DecompositionInstance& inst, int mol_id,
                                    const PatternRegistry& registry);

struct RGroupRecord {
  std::string key;
  std::string smiles;
  long count = 0;
  ConditionVector condition;
  bool is_common = false;

  nlohmann::json to_json() const;
  static RGroupRecord from_json(const nlohmann::json& j, int condition_bits);
};

struct MoleculeRecord {
  int mol_id = 0;
  std::string smiles;
  Split split = Split::Train;
  int n_cores = 0;
  int n_instances = 0;  // after the common filter
};

struct SkipEntry {
  int line = 0;  // 0-based index into the corpus (equals mol_id)
  std::string smiles;
  std::string reason;
};

struct PretrainDataset {
  DatasetConfig config;
  std::string registry_version;
  std::vector<MoleculeRecord> molecules;
  std::vector<InstanceRecord> instances;  // survivors of the common filter
  std::vector<RGroupRecord> rgroups;      // sorted by key
  std::vector<SkipEntry> skipped;
  double common_threshold = 0.0;
  long raw_instances = 0;
  nlohmann::json stats;

  std::vector<const InstanceRecord*> split(Split s) const;
};

// Linear-interpolation percentile (q in [0, 100]) of the values.
double percentile(std::vector<double> values, double q);

// Groups R-groups by canonical key; counts every occurrence; marks records
// whose count exceeds the threshold as common. Sorted by key.
std::vector<RGroupRecord> dedup_rgroups(const std::vector<InstanceRecord>& instances,
                                        double common_percentile,
                                        std::optional<double> threshold_override,
                                        double* threshold_out = nullptr);

PretrainDataset build_pretrain_dataset(const std::vector<std::string>& corpus,
                                       const DatasetConfig& config,
                                       const PatternRegistry& registry = PatternRegistry::builtin());

// Writes train/valid/test.jsonl.gz, rgroups.jsonl.gz, molecules.jsonl.gz,
// skipped.jsonl.gz, stats.json and manifest.json.
void save_dataset(const PretrainDataset& ds, const std::filesystem::path& dir);

struct LoadedDataset {
  nlohmann::json manifest;
  std::vector<InstanceRecord> train, valid, test;
  std::vector<RGroupRecord> rgroups;
  std::string hash;  // manifest hash
};

LoadedDataset load_dataset(const std::filesystem::path& dir);

// Scaffold split: groups by Murcko scaffold key, largest groups first (ties by
// key), greedily filling train, then valid, then test. Molecules that fail to
// parse are assigned to train.
std::vector<Split> scaffold_split(const std::vector<std::string>& smiles,
                                  const double ratios[3] = nullptr);
std::string scaffold_key(const MolGraph& g);

}  // namespace molpla
