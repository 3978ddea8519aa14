#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "molpla/dataset.hpp"
#include "molpla/encoder.hpp"

namespace molpla {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 512;
  int max_epochs = 100;
  int patience = 10;
  double tau1 = 0.01;
  double tau2 = 0.05;
  double tau3 = 0.01;
  double w1 = 1.0, w2 = 1.0, w3 = 1.0;
  int d = 300;
  int layers = 5;
  double dropout = 0.0;
  std::uint64_t seed = 0;
  CoreMode core_mode = CoreMode::Putative;
  // 0 keeps every training instance; otherwise a seeded subset of this size.
  int max_train_instances = 0;

  nlohmann::json to_json() const;
};

// Instance graphs parsed from a stored record. `decomposed` is the query
// template followed by every decoupled R-group.
struct ParsedInstance {
  struct Cut {
    int m = -1;       // linker node in mol
    int q = -1;       // query stub in decomposed
    int r = -1;       // R-group stub in decomposed
    int rgroup = -1;  // R-group index
  };
  MolGraph mol;
  MolGraph decomposed;
  int query_size = 0;
  std::vector<int> rgroup_offset;
  std::vector<int> rgroup_size;
  std::vector<Cut> cuts;
  std::vector<ConditionVector> conditions;
  std::vector<std::string> rgroup_keys;
};

ParsedInstance parse_instance(const InstanceRecord& r);

struct LossTerms {
  double L1 = 0, L2 = 0, L3 = 0, L = 0;
  int B1 = 0, B2 = 0, B3 = 0;
};

// Forward pass over a batch; with compute_grad the gradient of the weighted
// total is written into every Parameter::grad (previous contents cleared).
LossTerms pretrain_step(Model& m, std::span<const ParsedInstance* const> batch, const TrainConfig& cfg,
                        bool compute_grad, Rng* rng = nullptr);

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}
  // Updates every parameter; `only` restricts the update to names with this
  // prefix when non-empty.
  void step(ParameterStore& ps, const std::string& only = {});
  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
};

struct EpochLog {
  int epoch = 0;
  double L1 = 0, L2 = 0, L3 = 0, L = 0;
  double val_L = 0;
  bool improved = false;
};

struct PretrainResult {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
  double best_val = 0;
  std::filesystem::path checkpoint_dir;
};

// Writes <out>/checkpoint (best validation loss), <out>/loss_curve.csv and
// <out>/train_meta.json.
PretrainResult pretrain(const LoadedDataset& data, const TrainConfig& cfg, const std::filesystem::path& out,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

std::string loss_curve_csv(const std::vector<EpochLog>& epochs);

}  // namespace molpla
