#include "molpla/service.hpp"

#include <cstdlib>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "molpla/checkpoint.hpp"
#include "molpla/dataset.hpp"
#include "molpla/finetune.hpp"
#include "molpla/io.hpp"
#include "molpla/leadopt.hpp"
#include "molpla/learning.hpp"
#include "molpla/registry.hpp"
#include "molpla/smiles.hpp"

namespace molpla {

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw IoError("config line " + std::to_string(lineno) + " is not key=value");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  return parse_config_text(read_text_file(path));
}

namespace {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::filesystem::path home_default(const std::string& given, const char* sub) {
  if (!given.empty()) return given;
  if (const char* h = std::getenv("MOLPLA_HOME"); h && *h) return std::filesystem::path(h) / sub;
  throw DataError(std::string("no path given and MOLPLA_HOME is unset (expected ") + sub + ")");
}

ConditionVector parse_condition(const std::vector<std::string>& names_in) {
  std::vector<std::string> names;
  for (const std::string& s : names_in) {
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty() && tok != "none") names.push_back(tok);
    }
  }
  return PatternRegistry::builtin().from_names(names);
}

int first_stub(const MolGraph& g) {
  const auto stubs = g.stub_atoms();
  if (stubs.empty()) throw DataError("template has no '*' stub");
  return stubs.front();
}

void emit(std::ostream& out, const std::string& path, const nlohmann::json& doc) {
  if (path.empty() || path == "-") {
    out << doc.dump(2) << "\n";
  } else {
    write_json_file(path, doc);
  }
}

// Prepends config-file values as flags for every key the user did not pass.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string config_path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty() || args.size() < 2) return args;
  const auto cfg = read_config_file(config_path);
  std::vector<std::string> merged(args.begin(), args.begin() + 2);
  for (const auto& [key, value] : cfg) {
    const std::string flag = "--" + key;
    bool given = false;
    for (const std::string& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) given = true;
    }
    if (given) continue;
    if (value == "true") {
      merged.push_back(flag);
    } else if (value != "false") {
      merged.push_back(flag + "=" + value);
    }
  }
  merged.insert(merged.end(), args.begin() + 2, args.end());
  return merged;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  try {
    args = merge_config(args);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"MolPLA: putative-core decomposition, pretraining, R-group retrieval and re-attachment"};
  app.require_subcommand(1);
  std::string config_file;
  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config_file, "key=value config file"); };

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "corpus SMILES -> pretraining dataset");
  std::string pre_in, pre_out, pre_mode = "putative";
  std::uint64_t pre_seed = 7;
  int pre_max_cores = kDefaultMaxCores;
  double pre_pct = 99.99;
  std::optional<double> pre_thresh;
  pre->add_option("--in", pre_in, "one SMILES per line")->required();
  pre->add_option("--out", pre_out, "dataset directory");
  pre->add_option("--seed", pre_seed);
  pre->add_option("--core-mode", pre_mode)->check(CLI::IsMember({"putative", "murcko"}));
  pre->add_option("--max-cores", pre_max_cores);
  pre->add_option("--percentile", pre_pct);
  pre->add_option("--common-threshold", pre_thresh);
  add_config(pre);

  // pretrain
  auto* pt = app.add_subcommand("pretrain", "pretrain the encoder on a dataset");
  std::string pt_data, pt_out, pt_mode = "putative";
  TrainConfig tc;
  pt->add_option("--data", pt_data);
  pt->add_option("--out", pt_out)->required();
  pt->add_option("--d", tc.d);
  pt->add_option("--layers", tc.layers);
  pt->add_option("--batch", tc.batch_size);
  pt->add_option("--epochs", tc.max_epochs);
  pt->add_option("--patience", tc.patience);
  pt->add_option("--lr", tc.lr);
  pt->add_option("--tau1", tc.tau1);
  pt->add_option("--tau2", tc.tau2);
  pt->add_option("--tau3", tc.tau3);
  pt->add_option("--seed", tc.seed);
  pt->add_option("--dropout", tc.dropout);
  pt->add_option("--max-train-instances", tc.max_train_instances);
  pt->add_option("--core-mode", pt_mode)->check(CLI::IsMember({"putative", "murcko"}));
  add_config(pt);

  // finetune
  auto* ft = app.add_subcommand("finetune", "fine-tune on a labelled CSV with a scaffold split");
  std::string ft_ckpt, ft_csv, ft_task = "classification", ft_out;
  FinetuneConfig fc;
  ft->add_option("--checkpoint", ft_ckpt);
  ft->add_option("--csv", ft_csv)->required();
  ft->add_option("--task", ft_task)->check(CLI::IsMember({"classification", "regression"}));
  ft->add_option("--seeds", fc.n_seeds);
  ft->add_option("--seed", fc.seed);
  ft->add_option("--epochs", fc.max_epochs);
  ft->add_option("--patience", fc.patience);
  ft->add_option("--batch", fc.batch_size);
  ft->add_option("--lr", fc.lr);
  ft->add_option("--dropout", fc.dropout);
  ft->add_flag("--freeze", fc.freeze);
  ft->add_option("--out", ft_out, "metrics JSON (stdout if omitted)");
  add_config(ft);

  // build-library
  auto* bl = app.add_subcommand("build-library", "embed every dataset R-group");
  std::string bl_ckpt, bl_data, bl_out;
  bl->add_option("--checkpoint", bl_ckpt);
  bl->add_option("--data", bl_data);
  bl->add_option("--out", bl_out);
  add_config(bl);

  // eval-retrieval
  auto* ev = app.add_subcommand("eval-retrieval", "MRR and recall@K on a dataset split");
  std::string ev_ckpt, ev_data, ev_lib, ev_method = "molpla", ev_split = "test", ev_out;
  std::uint64_t ev_seed = 0;
  ev->add_option("--checkpoint", ev_ckpt);
  ev->add_option("--data", ev_data);
  ev->add_option("--library", ev_lib);
  ev->add_option("--method", ev_method)
      ->check(CLI::IsMember({"molpla", "random", "popularity", "cond_none", "cond_all", "all"}));
  ev->add_option("--split", ev_split)->check(CLI::IsMember({"train", "valid", "test"}));
  ev->add_option("--seed", ev_seed);
  ev->add_option("--out", ev_out);
  add_config(ev);

  // retrieve
  auto* rt = app.add_subcommand("retrieve", "top-k R-groups for a query template stub");
  std::string rt_ckpt, rt_lib, rt_template, rt_out;
  int rt_stub = -1, rt_k = kDefaultRetrievalK;
  std::vector<std::string> rt_cond;
  rt->add_option("--checkpoint", rt_ckpt);
  rt->add_option("--library", rt_lib);
  rt->add_option("--template", rt_template)->required();
  rt->add_option("--stub", rt_stub, "stub atom index (default: first stub)");
  rt->add_option("--cond", rt_cond, "condition pattern names (repeatable or comma separated)");
  rt->add_option("--k", rt_k);
  rt->add_option("--out", rt_out);
  add_config(rt);

  // reattach
  auto* ra = app.add_subcommand("reattach", "re-attach an R-group to a query template");
  std::string ra_template, ra_rgroup, ra_out;
  int ra_stub = -1;
  bool ra_linker = false;
  ra->add_option("--template", ra_template)->required();
  ra->add_option("--rgroup", ra_rgroup)->required();
  ra->add_option("--stub", ra_stub);
  ra->add_flag("--linker-element", ra_linker);
  ra->add_option("--out", ra_out);
  add_config(ra);

  // color
  auto* co = app.add_subcommand("color", "PCA node coloring as JSON");
  std::string co_ckpt, co_smiles, co_out;
  co->add_option("--checkpoint", co_ckpt);
  co->add_option("--smiles", co_smiles)->required();
  co->add_option("--out", co_out);
  add_config(co);

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP JSON API");
  std::string sv_ckpt, sv_lib, sv_host = "127.0.0.1";
  int sv_port = 8765;
  sv->add_option("--checkpoint", sv_ckpt);
  sv->add_option("--library", sv_lib);
  sv->add_option("--host", sv_host);
  sv->add_option("--port", sv_port);
  add_config(sv);

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (pre->parsed()) {
      DatasetConfig dc;
      dc.core_mode = core_mode_from_string(pre_mode);
      dc.max_cores = pre_max_cores;
      dc.common_percentile = pre_pct;
      dc.common_threshold = pre_thresh;
      dc.seed = pre_seed;
      const auto corpus = read_lines(pre_in);
      if (corpus.empty()) throw DataError("corpus is empty");
      const PretrainDataset ds = build_pretrain_dataset(corpus, dc);
      const auto dir = home_default(pre_out, "dataset");
      save_dataset(ds, dir);
      out << nlohmann::json({{"out", dir.string()},
                             {"molecules", ds.molecules.size()},
                             {"instances", ds.instances.size()},
                             {"rgroups", ds.rgroups.size()},
                             {"skipped", ds.skipped.size()}})
                 .dump()
          << "\n";
    } else if (pt->parsed()) {
      tc.core_mode = core_mode_from_string(pt_mode);
      const LoadedDataset data = load_dataset(home_default(pt_data, "dataset"));
      const PretrainResult res = pretrain(data, tc, pt_out, [&](const EpochLog& e) {
        err << "epoch " << e.epoch << " L=" << e.L << " (L1=" << e.L1 << " L2=" << e.L2 << " L3=" << e.L3
            << ") val_L=" << e.val_L << (e.improved ? " *" : "") << "\n";
      });
      out << nlohmann::json({{"checkpoint", res.checkpoint_dir.string()},
                             {"best_epoch", res.best_epoch},
                             {"best_val_L", res.best_val},
                             {"epochs", res.epochs.size()}})
                 .dump()
          << "\n";
    } else if (ft->parsed()) {
      fc.task = task_type_from_string(ft_task);
      const Model m = load_checkpoint(home_default(ft_ckpt, "pretrain/checkpoint"));
      const FinetuneResult r = finetune(m, read_task_csv(ft_csv), fc);
      nlohmann::json doc = r.to_json();
      doc["config"] = fc.to_json();
      emit(out, ft_out, doc);
    } else if (bl->parsed()) {
      const auto ckpt = home_default(bl_ckpt, "pretrain/checkpoint");
      Model m = load_checkpoint(ckpt);
      const LoadedDataset data = load_dataset(home_default(bl_data, "dataset"));
      const RGroupLibrary lib = build_library(m, data.rgroups, data.hash, checkpoint_hash(ckpt));
      const auto dir = home_default(bl_out, "library");
      save_library(lib, dir);
      out << nlohmann::json({{"out", dir.string()}, {"n", lib.size()}, {"skipped", lib.skipped.size()}}).dump() << "\n";
    } else if (ev->parsed()) {
      Model m = load_checkpoint(home_default(ev_ckpt, "pretrain/checkpoint"));
      const LoadedDataset data = load_dataset(home_default(ev_data, "dataset"));
      const RGroupLibrary lib = load_library(home_default(ev_lib, "library"));
      const auto& recs = ev_split == "train" ? data.train : ev_split == "valid" ? data.valid : data.test;
      std::vector<std::string> methods = {ev_method};
      if (ev_method == "all") methods = {"molpla", "random", "popularity", "cond_none", "cond_all"};
      nlohmann::json rows = nlohmann::json::array();
      for (const std::string& meth : methods) {
        EvalOptions eo;
        eo.method = meth;
        eo.seed = ev_seed;
        eo.dataset = ev_split;
        rows.push_back(evaluate_retrieval(m, recs, lib, eo).to_json());
      }
      emit(out, ev_out, methods.size() == 1 ? rows[0] : nlohmann::json({{"results", rows}}));
    } else if (rt->parsed()) {
      Model m = load_checkpoint(home_default(rt_ckpt, "pretrain/checkpoint"));
      const RGroupLibrary lib = load_library(home_default(rt_lib, "library"));
      const MolGraph t = parse_smiles(rt_template);
      const int stub = rt_stub >= 0 ? rt_stub : first_stub(t);
      const RetrievalResult r = retrieve(m, t, stub, parse_condition(rt_cond), lib, rt_k);
      emit(out, rt_out, r.to_json(lib));
    } else if (ra->parsed()) {
      const MolGraph t = parse_smiles(ra_template);
      const MolGraph rg = parse_smiles(ra_rgroup);
      const int stub = ra_stub >= 0 ? ra_stub : first_stub(t);
      int attempted = 0;
      const auto cands = reattach(t, stub, rg, {.enumerate_linker_element = ra_linker}, &attempted);
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& c : cands) {
        rows.push_back({{"smiles", c.smiles},
                        {"key", c.key},
                        {"bond_type", static_cast<int>(c.filled_bond.type)},
                        {"linker_element", c.linker_element},
                        {"descriptors", descriptor_report(c.molecule).to_json()}});
      }
      emit(out, ra_out, {{"template", ra_template}, {"rgroup", ra_rgroup}, {"attempted", attempted}, {"candidates", rows}});
    } else if (co->parsed()) {
      Model m = load_checkpoint(home_default(co_ckpt, "pretrain/checkpoint"));
      const MolGraph g = parse_smiles(co_smiles);
      const NodeColoring c = node_pca_coloring(m, g);
      emit(out, co_out,
           {{"smiles", co_smiles}, {"scores", c.scores}, {"eigenvalue", c.eigenvalue}, {"degenerate", c.degenerate}});
    } else if (sv->parsed()) {
      const auto ckpt = home_default(sv_ckpt, "pretrain/checkpoint");
      const auto libdir = home_default(sv_lib, "library");
      ApiService api(load_checkpoint(ckpt), load_library(libdir), checkpoint_hash(ckpt), library_hash(libdir));
      err << "serving on http://" << sv_host << ":" << sv_port << "\n";
      if (!api.serve(sv_host, sv_port)) throw DataError("could not bind " + sv_host + ":" + std::to_string(sv_port));
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace molpla
