#include "molpla/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "molpla/io.hpp"
#include "molpla/learning.hpp"
#include "molpla/smiles.hpp"

namespace molpla {

TaskType task_type_from_string(const std::string& s) {
  if (s == "classification") return TaskType::Classification;
  if (s == "regression") return TaskType::Regression;
  throw MolError("unknown task type '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(a, b - a + 1);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

TaskData parse_task_csv(const std::string& text) {
  std::stringstream in(text);
  std::string line;
  TaskData td;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    header = split_csv(line);
    break;
  }
  if (header.size() < 2) throw LabelError("task CSV needs a header with a smiles column and at least one task");
  int smiles_col = 0;
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "smiles") smiles_col = static_cast<int>(i);
  }
  for (size_t i = 0; i < header.size(); ++i) {
    if (static_cast<int>(i) != smiles_col) td.task_names.push_back(header[i]);
  }
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw LabelError("line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " columns");
    }
    std::vector<double> labels;
    for (size_t i = 0; i < cells.size(); ++i) {
      if (static_cast<int>(i) == smiles_col) continue;
      if (cells[i].empty()) {
        labels.push_back(NAN);
        continue;
      }
      try {
        size_t used = 0;
        labels.push_back(std::stod(cells[i], &used));
        if (used != cells[i].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw LabelError("line " + std::to_string(lineno) + ": label '" + cells[i] + "' is not numeric");
      }
    }
    td.smiles.push_back(cells[smiles_col]);
    td.labels.push_back(std::move(labels));
  }
  return td;
}

TaskData read_task_csv(const std::filesystem::path& path) { return parse_task_csv(read_text_file(path)); }

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("auroc length mismatch");
  const size_t n = scores.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) rank[idx[k]] = avg;
    i = j + 1;
  }
  double n_pos = 0, n_neg = 0, rank_sum = 0;
  for (size_t i = 0; i < n; ++i) {
    if (labels[i]) {
      n_pos += 1;
      rank_sum += rank[i];
    } else {
      n_neg += 1;
    }
  }
  if (n_pos == 0 || n_neg == 0) return NAN;
  return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

double rmse(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty()) throw ShapeError("rmse needs equal non-empty inputs");
  double s = 0;
  for (size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return std::sqrt(s / pred.size());
}

nlohmann::json FinetuneConfig::to_json() const {
  return {{"task", task == TaskType::Classification ? "classification" : "regression"},
          {"lr", lr},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"dropout", dropout},
          {"n_seeds", n_seeds},
          {"seed", seed},
          {"freeze", freeze},
          {"ratios", {ratios[0], ratios[1], ratios[2]}}};
}

nlohmann::json FinetuneResult::to_json() const {
  nlohmann::json runs_j = nlohmann::json::array();
  for (const SeedRun& r : runs) {
    runs_j.push_back({{"seed", r.seed},
                      {"best_epoch", r.best_epoch},
                      {"valid_" + metric, r.valid_metric},
                      {"test_" + metric, r.test_metric}});
  }
  return {{"metric", metric}, {"mean", mean},       {"std", std},       {"runs", runs_j},
          {"n_train", n_train}, {"n_valid", n_valid}, {"n_test", n_test}, {"n_skipped", n_skipped}};
}

namespace {

struct Example {
  MolGraph g;
  std::vector<double> y;
};

Tape::Id task_logits(Tape& t, Model& m, std::span<const Example* const> batch, bool train, Rng* rng,
                     bool freeze) {
  std::vector<const MolGraph*> graphs;
  for (const Example* e : batch) graphs.push_back(&e->g);
  const GraphBatch gb = GraphBatch::from_graphs(graphs);
  Tape::Id h = readout(t, encode(t, m, gb, train, rng), gb);
  if (freeze) h = t.detach(h);
  return t.linear(h, t.param(m.params.at("task.W")), t.param(m.params.at("task.b")));
}

Matrix predict(Model& m, const std::vector<const Example*>& set) {
  const int chunk = 256;
  Matrix out;
  for (size_t start = 0; start < set.size(); start += chunk) {
    const size_t end = std::min(set.size(), start + chunk);
    Tape t;
    const Tape::Id z = task_logits(t, m, std::span(set).subspan(start, end - start), false, nullptr, false);
    const Matrix& v = t.value(z);
    if (out.cols == 0) out = Matrix(0, v.cols);
    out.data.insert(out.data.end(), v.data.begin(), v.data.end());
    out.rows += v.rows;
  }
  return out;
}

double metric_of(TaskType task, const Matrix& pred, const std::vector<const Example*>& set) {
  const int T = pred.cols;
  std::vector<double> per_task;
  std::vector<double> all_p, all_y;
  for (int k = 0; k < T; ++k) {
    std::vector<double> s;
    std::vector<int> l;
    for (size_t i = 0; i < set.size(); ++i) {
      const double y = set[i]->y[k];
      if (std::isnan(y)) continue;
      s.push_back(pred(static_cast<int>(i), k));
      l.push_back(y > 0.5 ? 1 : 0);
      all_p.push_back(pred(static_cast<int>(i), k));
      all_y.push_back(y);
    }
    if (task == TaskType::Classification) {
      const double a = auroc(s, l);
      if (!std::isnan(a)) per_task.push_back(a);
    }
  }
  if (task == TaskType::Regression) return all_p.empty() ? NAN : rmse(all_p, all_y);
  if (per_task.empty()) return NAN;
  return std::accumulate(per_task.begin(), per_task.end(), 0.0) / per_task.size();
}

// Fills dL/dz for the batch; returns the loss.
double loss_grad(TaskType task, const Matrix& z, std::span<const Example* const> batch, Matrix& g) {
  g = Matrix(z.rows, z.cols);
  int count = 0;
  for (int i = 0; i < z.rows; ++i) {
    for (int k = 0; k < z.cols; ++k) count += std::isnan(batch[i]->y[k]) ? 0 : 1;
  }
  if (count == 0) return 0.0;
  double loss = 0;
  for (int i = 0; i < z.rows; ++i) {
    for (int k = 0; k < z.cols; ++k) {
      const double y = batch[i]->y[k];
      if (std::isnan(y)) continue;
      const double x = z(i, k);
      if (task == TaskType::Classification) {
        loss += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
        g(i, k) = (1.0 / (1.0 + std::exp(-x)) - y) / count;
      } else {
        loss += (x - y) * (x - y);
        g(i, k) = 2.0 * (x - y) / count;
      }
    }
  }
  return loss / count;
}

}  // namespace

FinetuneResult finetune(const Model& pretrained, const TaskData& data, const FinetuneConfig& cfg) {
  if (data.task_names.empty()) throw LabelError("no task columns");
  if (cfg.n_seeds < 1 || cfg.batch_size < 1 || cfg.max_epochs < 1) throw ShapeError("invalid fine-tune config");
  const int T = static_cast<int>(data.task_names.size());
  FinetuneResult res;
  res.metric = cfg.task == TaskType::Classification ? "auroc" : "rmse";

  std::vector<Example> examples;
  std::vector<std::string> kept_smiles;
  std::vector<int> row_of;
  for (size_t i = 0; i < data.smiles.size(); ++i) {
    if (static_cast<int>(data.labels[i].size()) != T) throw LabelError("label row has the wrong width");
    if (cfg.task == TaskType::Classification) {
      for (double y : data.labels[i]) {
        if (!std::isnan(y) && y != 0.0 && y != 1.0) {
          throw LabelError("classification label " + std::to_string(y) + " on row " + std::to_string(i + 1) +
                           " is not binary");
        }
      }
    }
    try {
      examples.push_back({parse_smiles(data.smiles[i]), data.labels[i]});
      kept_smiles.push_back(data.smiles[i]);
      row_of.push_back(static_cast<int>(i));
    } catch (const MolError&) {
      ++res.n_skipped;
    }
  }
  const std::vector<Split> splits = scaffold_split(kept_smiles, cfg.ratios);
  res.splits.assign(data.smiles.size(), Split::Train);
  std::vector<const Example*> sets[3];
  for (size_t i = 0; i < examples.size(); ++i) {
    res.splits[row_of[i]] = splits[i];
    sets[static_cast<int>(splits[i])].push_back(&examples[i]);
  }
  res.n_train = static_cast<int>(sets[0].size());
  res.n_valid = static_cast<int>(sets[1].size());
  res.n_test = static_cast<int>(sets[2].size());
  if (sets[0].empty() || sets[1].empty() || sets[2].empty()) throw LabelError("scaffold split left an empty split");

  const bool higher_better = cfg.task == TaskType::Classification;
  for (int s = 0; s < cfg.n_seeds; ++s) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
    Model m = pretrained;
    m.config.dropout = cfg.dropout;
    Rng init(seed);
    Parameter& w = m.params.add("task.W", m.config.d, T);
    const double limit = std::sqrt(6.0 / (m.config.d + T));
    for (double& v : w.value.data) v = init.uniform(-limit, limit);
    m.params.add("task.b", 1, T);
    Adam opt(cfg.lr);
    Rng drop_rng(seed + 101);

    SeedRun run;
    run.seed = seed;
    double best = higher_better ? -INFINITY : INFINITY;
    Model best_model = m;
    int stale = 0;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
      std::vector<const Example*> order = sets[0];
      Rng(seed * 7919ULL + static_cast<std::uint64_t>(epoch)).shuffle(order);
      for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const auto batch = std::span(order).subspan(start, std::min<size_t>(cfg.batch_size, order.size() - start));
        Tape t;
        const Tape::Id z = task_logits(t, m, batch, true, &drop_rng, cfg.freeze);
        Matrix g;
        loss_grad(cfg.task, t.value(z), batch, g);
        const Tape::Id surrogate = t.dot_const(z, std::move(g));
        m.params.zero_grad();
        t.backward(surrogate);
        opt.step(m.params, cfg.freeze ? "task." : "");
      }
      const double v = metric_of(cfg.task, predict(m, sets[1]), sets[1]);
      const bool better = !std::isnan(v) && (higher_better ? v > best : v < best);
      if (better || epoch == 1) {
        if (!std::isnan(v)) best = v;
        run.best_epoch = epoch;
        run.valid_metric = v;
        best_model = m;
        stale = better ? 0 : stale + 1;
      } else if (++stale >= cfg.patience) {
        break;
      }
    }
    run.test_metric = metric_of(cfg.task, predict(best_model, sets[2]), sets[2]);
    res.runs.push_back(run);
  }
  double sum = 0;
  for (const SeedRun& r : res.runs) sum += r.test_metric;
  res.mean = sum / res.runs.size();
  double var = 0;
  for (const SeedRun& r : res.runs) var += (r.test_metric - res.mean) * (r.test_metric - res.mean);
  res.std = res.runs.size() > 1 ? std::sqrt(var / (res.runs.size() - 1)) : 0.0;
  return res;
}

}  // namespace molpla
