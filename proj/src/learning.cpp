#include "molpla/learning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "molpla/checkpoint.hpp"
#include "molpla/io.hpp"
#include "molpla/smiles.hpp"

namespace molpla {

nlohmann::json TrainConfig::to_json() const {
  return {{"lr", lr},           {"batch_size", batch_size}, {"max_epochs", max_epochs},
          {"patience", patience}, {"tau1", tau1},           {"tau2", tau2},
          {"tau3", tau3},       {"w1", w1},                 {"w2", w2},
          {"w3", w3},           {"d", d},                   {"layers", layers},
          {"dropout", dropout}, {"seed", seed},             {"core_mode", core_mode_name(core_mode)},
          {"max_train_instances", max_train_instances}};
}

ParsedInstance parse_instance(const InstanceRecord& r) {
  ParsedInstance p;
  p.mol = parse_smiles(r.mol);
  p.decomposed = parse_smiles(r.query);
  p.query_size = p.decomposed.num_atoms();
  for (const std::string& s : r.rgroups) {
    const MolGraph g = parse_smiles(s);
    p.rgroup_offset.push_back(p.decomposed.num_atoms());
    p.rgroup_size.push_back(g.num_atoms());
    p.decomposed.append(g);
  }
  for (const InstanceCut& c : r.cuts) {
    if (c.rgroup < 0 || c.rgroup >= static_cast<int>(r.rgroups.size())) throw MolError("cut refers to a missing R-group");
    ParsedInstance::Cut cut;
    cut.m = c.m_index;
    cut.q = c.q_stub;
    cut.r = p.rgroup_offset[c.rgroup] + c.r_stub;
    cut.rgroup = c.rgroup;
    if (cut.m < 0 || cut.m >= p.mol.num_atoms() || cut.q < 0 || cut.q >= p.query_size ||
        !p.decomposed.atom(cut.q).is_stub || !p.decomposed.atom(cut.r).is_stub) {
      throw MolError("instance record has inconsistent linker indices");
    }
    p.cuts.push_back(cut);
  }
  p.conditions = r.conditions;
  p.rgroup_keys = r.rgroup_keys;
  return p;
}

LossTerms pretrain_step(Model& m, std::span<const ParsedInstance* const> batch, const TrainConfig& cfg,
                        bool compute_grad, Rng* rng) {
  if (batch.empty()) throw ShapeError("empty training batch");
  const int B = static_cast<int>(batch.size());
  std::vector<const MolGraph*> graphs;
  for (const ParsedInstance* p : batch) graphs.push_back(&p->mol);
  for (const ParsedInstance* p : batch) graphs.push_back(&p->decomposed);
  const GraphBatch gb = GraphBatch::from_graphs(graphs);

  Tape t;
  const Tape::Id h = encode(t, m, gb, compute_grad, rng);

  // L1: whole-graph views
  const Tape::Id zg = project(t, m, Head::Graph, readout(t, h, gb));
  std::vector<int> first(B), second(B);
  std::iota(first.begin(), first.end(), 0);
  std::iota(second.begin(), second.end(), B);
  const Tape::Id z_gm = t.gather_rows(zg, first);
  const Tape::Id z_gd = t.detach(t.gather_rows(zg, second));
  const Tape::Id l1 = t.info_nce(z_gm, z_gd, cfg.tau1);

  // L2 and L3 rows, pooled over every cut of the batch
  std::vector<int> m_rows, q_rows, r_rows;
  auto r_groups = std::make_shared<std::vector<std::vector<int>>>();
  std::vector<double> cond_flat;
  const int cbits = m.config.condition_bits;
  for (int i = 0; i < B; ++i) {
    const ParsedInstance& p = *batch[i];
    const int mo = gb.offsets[i], dof = gb.offsets[B + i];
    for (const ParsedInstance::Cut& c : p.cuts) {
      m_rows.push_back(mo + c.m);
      q_rows.push_back(dof + c.q);
      r_rows.push_back(dof + c.r);
      std::vector<int> rows(p.rgroup_size[c.rgroup]);
      std::iota(rows.begin(), rows.end(), dof + p.rgroup_offset[c.rgroup]);
      r_groups->push_back(std::move(rows));
      const ConditionVector& cv = p.conditions.at(c.rgroup);
      if (static_cast<int>(cv.size()) != cbits) throw ShapeError("condition vector length mismatch");
      for (auto bit : cv) cond_flat.push_back(bit ? 1.0 : 0.0);
    }
  }
  const int n_cuts = static_cast<int>(m_rows.size());
  const Tape::Id z_m = project(t, m, Head::Node, t.gather_rows(h, m_rows));
  const Tape::Id pair = t.add(t.gather_rows(h, q_rows), t.gather_rows(h, r_rows));
  const Tape::Id z_p = t.detach(project(t, m, Head::Node, pair));
  const Tape::Id l2 = t.info_nce(z_m, z_p, cfg.tau2);

  Matrix cond(n_cuts, cbits);
  cond.data = std::move(cond_flat);
  const Tape::Id qc = t.concat_cols(t.gather_rows(h, q_rows), t.constant(std::move(cond)));
  const Tape::Id z_c = project(t, m, Head::Query, qc);
  const Tape::Id z_r = project(t, m, Head::RGroup, t.segment_mean(h, r_groups));
  const Tape::Id l3 = t.info_nce(z_c, z_r, cfg.tau3);

  const Tape::Id total = t.add(t.add(t.scale(l1, cfg.w1), t.scale(l2, cfg.w2)), t.scale(l3, cfg.w3));

  LossTerms out;
  out.L1 = t.value(l1)(0, 0);
  out.L2 = t.value(l2)(0, 0);
  out.L3 = t.value(l3)(0, 0);
  out.L = t.value(total)(0, 0);
  out.B1 = B;
  out.B2 = n_cuts;
  out.B3 = n_cuts;
  if (compute_grad) {
    m.params.zero_grad();
    t.backward(total);
  }
  return out;
}

void Adam::step(ParameterStore& ps, const std::string& only) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (Parameter& p : ps.all()) {
    if (!only.empty() && p.name.rfind(only, 0) != 0) continue;
    for (size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.data[i];
      p.m.data[i] = b1_ * p.m.data[i] + (1.0 - b1_) * g;
      p.v.data[i] = b2_ * p.v.data[i] + (1.0 - b2_) * g * g;
      const double mh = p.m.data[i] / c1;
      const double vh = p.v.data[i] / c2;
      p.value.data[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
    }
  }
}

std::string loss_curve_csv(const std::vector<EpochLog>& epochs) {
  std::string out = "epoch,L1,L2,L3,L,val_L\n";
  char buf[256];
  for (const EpochLog& e : epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g\n", e.epoch, e.L1, e.L2, e.L3, e.L, e.val_L);
    out += buf;
  }
  return out;
}

namespace {

std::vector<ParsedInstance> parse_all(const std::vector<InstanceRecord>& records) {
  std::vector<ParsedInstance> out;
  out.reserve(records.size());
  for (const InstanceRecord& r : records) out.push_back(parse_instance(r));
  return out;
}

}  // namespace

PretrainResult pretrain(const LoadedDataset& data, const TrainConfig& cfg, const std::filesystem::path& out,
                        const std::function<void(const EpochLog&)>& on_epoch) {
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1) throw ShapeError("invalid training config");
  if (!(cfg.tau1 > 0 && cfg.tau2 > 0 && cfg.tau3 > 0)) throw ShapeError("temperatures must be positive");
  const std::string ds_mode = data.manifest.at("config").value("core_mode", "putative");
  if (ds_mode != core_mode_name(cfg.core_mode)) {
    throw MolError("dataset was built with core_mode=" + ds_mode + " but training requested " +
                   core_mode_name(cfg.core_mode));
  }
  if (data.train.empty() || data.valid.empty()) throw MolError("pretraining needs non-empty train and valid splits");

  std::vector<ParsedInstance> train = parse_all(data.train);
  const std::vector<ParsedInstance> valid = parse_all(data.valid);
  if (cfg.max_train_instances > 0 && static_cast<int>(train.size()) > cfg.max_train_instances) {
    std::vector<int> idx(train.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng(cfg.seed ^ 0x5eed5eedULL).shuffle(idx);
    idx.resize(cfg.max_train_instances);
    std::sort(idx.begin(), idx.end());
    std::vector<ParsedInstance> kept;
    for (int i : idx) kept.push_back(std::move(train[i]));
    train = std::move(kept);
  }

  EncoderConfig ec;
  ec.d = cfg.d;
  ec.layers = cfg.layers;
  ec.dropout = cfg.dropout;
  ec.seed = cfg.seed;
  ec.condition_bits = data.manifest.value("condition_bits", 64);
  Model model(ec);
  Adam opt(cfg.lr);
  Rng drop_rng(cfg.seed + 17);
  // Fixed validation batches; stored order would group one molecule's
  // instances into the same batch.
  std::vector<int> val_order(valid.size());
  std::iota(val_order.begin(), val_order.end(), 0);
  Rng(cfg.seed ^ 0x7a11d000ULL).shuffle(val_order);

  PretrainResult res;
  res.checkpoint_dir = out / "checkpoint";
  res.best_val = INFINITY;
  int stale = 0;
  int max_b2 = 0, min_b2 = INT32_MAX;
  nlohmann::json meta = {{"train", cfg.to_json()},
                         {"dataset_hash", data.hash},
                         {"registry_version", data.manifest.value("registry_version", "")}};

  std::vector<const ParsedInstance*> batch;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<int> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    Rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(epoch)).shuffle(order);
    EpochLog log;
    log.epoch = epoch;
    int n_batches = 0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      batch.clear();
      for (size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) batch.push_back(&train[order[k]]);
      const LossTerms lt = pretrain_step(model, batch, cfg, true, &drop_rng);
      opt.step(model.params);
      log.L1 += lt.L1;
      log.L2 += lt.L2;
      log.L3 += lt.L3;
      log.L += lt.L;
      max_b2 = std::max(max_b2, lt.B2);
      min_b2 = std::min(min_b2, lt.B2);
      ++n_batches;
    }
    log.L1 /= n_batches;
    log.L2 /= n_batches;
    log.L3 /= n_batches;
    log.L /= n_batches;

    int n_val = 0;
    for (size_t start = 0; start < valid.size(); start += cfg.batch_size) {
      batch.clear();
      for (size_t k = start; k < std::min(valid.size(), start + cfg.batch_size); ++k) {
        batch.push_back(&valid[val_order[k]]);
      }
      log.val_L += pretrain_step(model, batch, cfg, false).L;
      ++n_val;
    }
    log.val_L /= n_val;

    if (log.val_L < res.best_val) {
      res.best_val = log.val_L;
      res.best_epoch = epoch;
      log.improved = true;
      stale = 0;
      nlohmann::json m = meta;
      m["epoch"] = epoch;
      m["val_L"] = log.val_L;
      save_checkpoint(model, res.checkpoint_dir, m);
    } else {
      ++stale;
    }
    res.epochs.push_back(log);
    write_text_file(out / "loss_curve.csv", loss_curve_csv(res.epochs));
    if (on_epoch) on_epoch(log);
    if (stale >= cfg.patience) break;
  }
  meta["best_epoch"] = res.best_epoch;
  meta["best_val_L"] = res.best_val;
  meta["epochs_run"] = res.epochs.size();
  meta["train_instances"] = train.size();
  meta["valid_instances"] = valid.size();
  meta["batch_cuts_min"] = min_b2;
  meta["batch_cuts_max"] = max_b2;
  write_json_file(out / "train_meta.json", meta);
  return res;
}

}  // namespace molpla
