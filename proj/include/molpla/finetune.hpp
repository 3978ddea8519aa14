#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "molpla/dataset.hpp"
#include "molpla/encoder.hpp"

namespace molpla {

class LabelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskType { Classification, Regression };
TaskType task_type_from_string(const std::string& s);

// CSV with a header row; the column named "smiles" (else the first column)
// holds molecules, every other column is a task. Empty cells are missing
// labels.
struct TaskData {
  std::vector<std::string> task_names;
  std::vector<std::string> smiles;
  std::vector<std::vector<double>> labels;  // NaN marks a missing label
};

TaskData read_task_csv(const std::filesystem::path& path);
TaskData parse_task_csv(const std::string& text);

// Area under the ROC curve via the rank-sum statistic, ties counted half.
// NaN when only one class is present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);
double rmse(const std::vector<double>& pred, const std::vector<double>& target);

struct FinetuneConfig {
  TaskType task = TaskType::Classification;
  double lr = 1e-4;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 10;
  double dropout = 0.3;
  int n_seeds = 3;
  std::uint64_t seed = 0;
  bool freeze = false;
  double ratios[3] = {8, 1, 1};

  nlohmann::json to_json() const;
};

struct SeedRun {
  std::uint64_t seed = 0;
  int best_epoch = 0;
  double valid_metric = 0;
  double test_metric = 0;
};

struct FinetuneResult {
  std::string metric;  // "auroc" or "rmse"
  std::vector<SeedRun> runs;
  double mean = 0;
  double std = 0;
  int n_train = 0, n_valid = 0, n_test = 0;
  int n_skipped = 0;
  std::vector<Split> splits;  // per input row (skipped rows: Train)

  nlohmann::json to_json() const;
};

// Fine-tunes a copy of `pretrained` once per seed (seed, seed+1, ...).
FinetuneResult finetune(const Model& pretrained, const TaskData& data, const FinetuneConfig& cfg);

}  // namespace molpla
