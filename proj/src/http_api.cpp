#include <algorithm>
#include <atomic>

#include "httplib.h"
#include "molpla/chem.hpp"
#include "molpla/decompose.hpp"
#include "molpla/graph_json.hpp"
#include "molpla/leadopt.hpp"
#include "molpla/registry.hpp"
#include "molpla/service.hpp"
#include "molpla/smiles.hpp"

namespace molpla {

namespace {

struct ApiError {
  int status;
  std::string code;
  std::string message;
};

nlohmann::json error_body(const std::string& code, const std::string& message) {
  return {{"error", {{"code", code}, {"message", message}}}};
}

const nlohmann::json& require(const nlohmann::json& req, const char* field) {
  if (!req.is_object() || !req.contains(field)) throw ApiError{400, "missing_field", std::string("missing field '") + field + "'"};
  return req.at(field);
}

std::string require_string(const nlohmann::json& req, const char* field) {
  const auto& v = require(req, field);
  if (!v.is_string()) throw ApiError{400, "bad_field", std::string("field '") + field + "' must be a string"};
  return v.get<std::string>();
}

int require_int(const nlohmann::json& req, const char* field) {
  const auto& v = require(req, field);
  if (!v.is_number_integer()) throw ApiError{400, "bad_field", std::string("field '") + field + "' must be an integer"};
  return v.get<int>();
}

MolGraph parse_field(const nlohmann::json& req, const char* field) {
  const std::string s = require_string(req, field);
  try {
    return parse_smiles(s);
  } catch (const MolError& e) {
    throw ApiError{400, "bad_smiles", e.what()};
  }
}

nlohmann::json delta(const Descriptors& a, const Descriptors& b) {
  return {{"heavy_atoms", b.heavy_atoms - a.heavy_atoms},
          {"mol_weight", b.mol_weight - a.mol_weight},
          {"rings", b.rings - a.rings},
          {"rotatable_bonds", b.rotatable_bonds - a.rotatable_bonds},
          {"hbd", b.hbd - a.hbd},
          {"hba", b.hba - a.hba}};
}

}  // namespace

struct ApiService::Impl {
  Model model;
  RGroupLibrary library;
  std::string checkpoint_hash;
  std::string library_hash;
  mutable std::mutex session_mu;
  std::map<std::string, nlohmann::json> histories;
  httplib::Server server;

  void check_expectations(const nlohmann::json& req) const {
    if (!req.is_object()) return;
    if (req.contains("expect_checkpoint_hash") && req["expect_checkpoint_hash"] != checkpoint_hash) {
      throw ApiError{409, "checkpoint_mismatch", "loaded checkpoint hash is " + checkpoint_hash};
    }
    if (req.contains("expect_library_hash") && req["expect_library_hash"] != library_hash) {
      throw ApiError{409, "library_mismatch", "loaded library hash is " + library_hash};
    }
  }

  void record(const std::string& session, const std::string& endpoint, const nlohmann::json& req,
              const nlohmann::json& resp) {
    std::lock_guard<std::mutex> lock(session_mu);
    auto& h = histories[session];
    if (h.is_null()) h = nlohmann::json::array();
    h.push_back({{"seq", h.size()}, {"endpoint", endpoint}, {"request", req}, {"response", resp}});
  }

  ConditionVector condition_from(const nlohmann::json& req) const {
    const auto& reg = PatternRegistry::builtin();
    if (!req.contains("condition_bits")) return ConditionVector(reg.size(), 0);
    const auto& bits = req["condition_bits"];
    if (!bits.is_array()) throw ApiError{400, "bad_field", "condition_bits must be a list of pattern names"};
    std::vector<std::string> names;
    for (const auto& b : bits) {
      if (!b.is_string()) throw ApiError{400, "bad_field", "condition_bits entries must be pattern names"};
      names.push_back(b.get<std::string>());
    }
    try {
      return reg.from_names(names);
    } catch (const MolError& e) {
      throw ApiError{400, "unknown_pattern", e.what()};
    }
  }

  nlohmann::json parse(const nlohmann::json& req) {
    const MolGraph g = parse_field(req, "smiles");
    return {{"smiles", write_smiles(g)},
            {"canonical_smiles", write_smiles(g, {.canonical = true, .include_stereo = true})},
            {"key", canonical_key(g)},
            {"graph", graph_to_json(g)},
            {"descriptors", descriptor_report(g).to_json()}};
  }

  nlohmann::json color(const nlohmann::json& req) {
    const MolGraph g = parse_field(req, "smiles");
    if (g.num_atoms() < 2) throw ApiError{400, "too_small", "coloring needs at least two atoms"};
    const NodeColoring c = node_pca_coloring(model, g);
    return {{"smiles", write_smiles(g)},
            {"graph", graph_to_json(g)},
            {"scores", c.scores},
            {"eigenvalue", c.eigenvalue},
            {"degenerate", c.degenerate}};
  }

  nlohmann::json decompose_ep(const nlohmann::json& req) {
    const MolGraph g = parse_field(req, "smiles");
    if (g.num_components() != 1) throw ApiError{400, "disconnected", "molecule must be a single component"};
    std::vector<CoreCandidate> cores;
    try {
      cores = enumerate_putative_cores(g, RuleSet{});
    } catch (const NoRingError& e) {
      throw ApiError{400, "no_ring", e.what()};
    }
    int ci = 0;
    if (req.contains("core_index")) {
      ci = require_int(req, "core_index");
      if (ci < 0 || ci >= static_cast<int>(cores.size())) throw ApiError{400, "bad_index", "core_index out of range"};
    }
    nlohmann::json cores_j = nlohmann::json::array();
    for (size_t i = 0; i < cores.size(); ++i) {
      cores_j.push_back({{"index", i},
                         {"atoms", cores[i].atoms},
                         {"key", cores[i].key},
                         {"is_murcko", cores[i].is_murcko}});
    }
    const std::vector<Branch> branches = identify_rgroups(g, cores[ci].atoms);
    nlohmann::json br_j = nlohmann::json::array();
    for (size_t i = 0; i < branches.size(); ++i) {
      const DecompositionInstance inst = decompose(g, cores[ci].atoms, branches, {static_cast<int>(i)});
      br_j.push_back({{"index", i},
                      {"atoms", branches[i].atoms},
                      {"cut_bond", branches[i].cut_bond},
                      {"core_atom", branches[i].core_atom},
                      {"r_atom", branches[i].r_atom},
                      {"template_smiles", write_smiles(inst.query)},
                      {"stub_index", inst.cuts[0].stub_q},
                      {"rgroup_smiles", write_smiles(inst.rgroups[0])},
                      {"rgroup_key", canonical_key(inst.rgroups[0])}});
    }
    const std::vector<bool> ring = bonds_in_ring(g);
    const std::vector<bool> cuttable = cuttable_bonds(g, RuleSet{});
    nlohmann::json cuts_j = nlohmann::json::array();
    for (int b = 0; b < g.num_bonds(); ++b) {
      if (ring[b]) continue;
      cuts_j.push_back({{"bond", b}, {"begin", g.bond(b).begin}, {"end", g.bond(b).end}, {"rule_match", cuttable[b]}});
    }
    return {{"smiles", write_smiles(g)},
            {"graph", graph_to_json(g)},
            {"cores", cores_j},
            {"core_index", ci},
            {"branches", br_j},
            {"cut_options", cuts_j}};
  }

  nlohmann::json retrieve_ep(const nlohmann::json& req) {
    const MolGraph t = parse_field(req, "template_smiles");
    const int stub = require_int(req, "stub_index");
    const int k = req.contains("k") ? require_int(req, "k") : kDefaultRetrievalK;
    if (k < 0) throw ApiError{400, "bad_field", "k must be non-negative"};
    const ConditionVector cond = condition_from(req);
    try {
      return retrieve(model, t, stub, cond, library, k).to_json(library);
    } catch (const NotAStubError& e) {
      throw ApiError{400, "not_a_stub", e.what()};
    }
  }

  nlohmann::json reattach_ep(const nlohmann::json& req) {
    const MolGraph t = parse_field(req, "template_smiles");
    const int stub = require_int(req, "stub_index");
    const std::string key = require_string(req, "rgroup_key");
    const int row = library.index_of(key);
    if (row < 0) throw ApiError{400, "unknown_rgroup", "R-group key not in the loaded library"};
    const MolGraph rg = parse_smiles(library.smiles[row]);
    const MolGraph ref = req.contains("original_smiles") ? parse_field(req, "original_smiles") : t;
    const Descriptors before = descriptor_report(ref);
    std::vector<ReattachmentCandidate> cands;
    int attempted = 0;
    try {
      cands = reattach(t, stub, rg, {}, &attempted);
    } catch (const NoStubError& e) {
      throw ApiError{400, "not_a_stub", e.what()};
    }
    nlohmann::json rows = nlohmann::json::array();
    for (const ReattachmentCandidate& c : cands) {
      const Descriptors after = descriptor_report(c.molecule);
      rows.push_back({{"smiles", c.smiles},
                      {"key", c.key},
                      {"bond_type", static_cast<int>(c.filled_bond.type)},
                      {"valid", c.valid},
                      {"descriptors_before", before.to_json()},
                      {"descriptors_after", after.to_json()},
                      {"delta", delta(before, after)}});
    }
    return {{"template", write_smiles(t)},
            {"stub_index", stub},
            {"rgroup_key", key},
            {"rgroup_smiles", library.smiles[row]},
            {"attempted", attempted},
            {"candidates", rows}};
  }

  nlohmann::json library_meta() const {
    return {{"n", library.size()},
            {"d", library.d},
            {"checkpoint_hash", checkpoint_hash},
            {"library_hash", library_hash},
            {"dataset_hash", library.dataset_hash},
            {"library_checkpoint_hash", library.checkpoint_hash},
            {"registry_version", PatternRegistry::builtin().version()}};
  }
};

ApiService::ApiService(Model model, RGroupLibrary library, std::string checkpoint_hash, std::string library_hash)
    : impl_(std::make_shared<Impl>()) {
  impl_->model = std::move(model);
  impl_->library = std::move(library);
  impl_->checkpoint_hash = std::move(checkpoint_hash);
  impl_->library_hash = std::move(library_hash);
}

ApiResponse ApiService::handle(const std::string& method, const std::string& path, const std::string& body,
                               const std::string& session) {
  Impl& s = *impl_;
  try {
    if (method == "GET") {
      if (path == "/library/meta") return {200, s.library_meta()};
      if (path == "/patterns") return {200, PatternRegistry::builtin().to_json()};
      if (path == "/session/history") return {200, session_history(session)};
      if (path == "/health") return {200, {{"status", "ok"}}};
      return {404, error_body("not_found", "no such endpoint")};
    }
    if (method != "POST") return {405, error_body("method_not_allowed", "unsupported method")};
    nlohmann::json req;
    try {
      req = body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return {400, error_body("bad_json", "request body is not valid JSON")};
    }
    if (!req.is_object()) return {400, error_body("bad_json", "request body must be a JSON object")};
    s.check_expectations(req);
    nlohmann::json resp;
    if (path == "/parse") {
      resp = s.parse(req);
    } else if (path == "/color") {
      resp = s.color(req);
    } else if (path == "/decompose") {
      resp = s.decompose_ep(req);
    } else if (path == "/retrieve") {
      resp = s.retrieve_ep(req);
      s.record(session, path, req, resp);
    } else if (path == "/reattach") {
      resp = s.reattach_ep(req);
      s.record(session, path, req, resp);
    } else {
      return {404, error_body("not_found", "no such endpoint")};
    }
    return {200, resp};
  } catch (const ApiError& e) {
    return {e.status, error_body(e.code, e.message)};
  } catch (const MolError& e) {
    return {400, error_body("chemistry_error", e.what())};
  } catch (const std::exception&) {
    return {500, error_body("internal", "internal server error")};
  }
}

nlohmann::json ApiService::session_history(const std::string& session) const {
  std::lock_guard<std::mutex> lock(impl_->session_mu);
  auto it = impl_->histories.find(session);
  return {{"session", session},
          {"history", it == impl_->histories.end() ? nlohmann::json::array() : it->second}};
}

namespace {

void install_routes(ApiService& api, httplib::Server& srv) {
  auto handler = [&api](const httplib::Request& req, httplib::Response& res) {
    const std::string session = req.has_header("X-Session-Id") ? req.get_header_value("X-Session-Id") : "default";
    const ApiResponse r = api.handle(req.method, req.path, req.body, session);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  for (const char* p : {"/library/meta", "/patterns", "/session/history", "/health"}) srv.Get(p, handler);
  for (const char* p : {"/parse", "/color", "/decompose", "/retrieve", "/reattach"}) srv.Post(p, handler);
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
}

}  // namespace

bool ApiService::serve(const std::string& host, int port) {
  install_routes(*this, impl_->server);
  return impl_->server.listen(host, port);
}

int ApiService::bind_any(const std::string& host) {
  install_routes(*this, impl_->server);
  return impl_->server.bind_to_any_port(host);
}

bool ApiService::serve_bound() { return impl_->server.listen_after_bind(); }

void ApiService::stop() { impl_->server.stop(); }

}  // namespace molpla
