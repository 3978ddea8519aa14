#include "molpla/encoder.hpp"

#include <cmath>

#include "molpla/kernels.hpp"
#include "molpla/rng.hpp"

namespace molpla {

namespace {

std::string atom_table(int f) { return std::string("atom_emb.") + vocab::kAtomFieldNames[f]; }
std::string bond_table(int f) { return std::string("bond_emb.") + vocab::kBondFieldNames[f]; }
std::string layer_prefix(int l) { return "gin." + std::to_string(l) + "."; }
std::string head_prefix(Head h) { return std::string("head.") + head_name(h) + "."; }

void glorot(Parameter& p, Rng& rng) {
  const double limit = std::sqrt(6.0 / (p.value.rows + p.value.cols));
  for (double& v : p.value.data) v = rng.uniform(-limit, limit);
}

void add_mlp(ParameterStore& ps, Rng& rng, const std::string& prefix, int in, int hidden, int out) {
  glorot(ps.add(prefix + "lin1.W", in, hidden), rng);
  ps.add(prefix + "lin1.b", 1, hidden);
  glorot(ps.add(prefix + "lin2.W", hidden, out), rng);
  ps.add(prefix + "lin2.b", 1, out);
}

}  // namespace

const char* head_name(Head h) {
  switch (h) {
    case Head::Graph: return "graph";
    case Head::Node: return "node";
    case Head::Query: return "query";
    case Head::RGroup: return "rgroup";
  }
  return "?";
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"d", d},
          {"layers", layers},
          {"condition_bits", condition_bits},
          {"dropout", dropout},
          {"leaky_slope", leaky_slope},
          {"seed", seed}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.d = j.value("d", c.d);
  c.layers = j.value("layers", c.layers);
  c.condition_bits = j.value("condition_bits", c.condition_bits);
  c.dropout = j.value("dropout", c.dropout);
  c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  c.seed = j.value("seed", c.seed);
  return c;
}

Model::Model(const EncoderConfig& cfg) : config(cfg) {
  if (cfg.d <= 0 || cfg.layers <= 0 || cfg.condition_bits < 0) throw ShapeError("invalid encoder config");
  Rng rng(cfg.seed);
  const int d = cfg.d;
  for (int f = 0; f < vocab::kNumAtomFields; ++f) {
    Parameter& p = params.add(atom_table(f), vocab::kAtomSizes[f], d);
    for (double& v : p.value.data) v = rng.normal(0.0, 0.02);
  }
  for (int f = 0; f < vocab::kNumBondFields; ++f) {
    Parameter& p = params.add(bond_table(f), vocab::kBondSizes[f], d);
    for (double& v : p.value.data) v = rng.normal(0.0, 0.02);
  }
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pre = layer_prefix(l);
    params.add(pre + "eps", 1, 1);
    add_mlp(params, rng, pre, d, 2 * d, d);
    Parameter& gamma = params.add(pre + "ln.gamma", 1, d);
    for (double& v : gamma.value.data) v = 1.0;
    params.add(pre + "ln.beta", 1, d);
  }
  for (Head h : {Head::Graph, Head::Node, Head::Query, Head::RGroup}) {
    const int in = h == Head::Query ? d + cfg.condition_bits : d;
    add_mlp(params, rng, head_prefix(h), in, d, d);
  }
}

GraphBatch GraphBatch::from_graphs(std::span<const MolGraph* const> graphs) {
  GraphBatch b;
  auto edges = std::make_shared<std::vector<DirectedEdge>>();
  b.offsets.push_back(0);
  for (const MolGraph* g : graphs) {
    const int base = b.num_nodes;
    for (int i = 0; i < g->num_atoms(); ++i) {
      const AtomAttrs& a = g->atom(i);
      if (!a.is_stub && (a.atomic_number < 1 || a.atomic_number > 118)) {
        throw IndexError("atomic number " + std::to_string(a.atomic_number) + " outside vocabulary");
      }
      const auto idx = a.vocab_indices();
      for (int f = 0; f < vocab::kNumAtomFields; ++f) {
        if (idx[f] < 0 || idx[f] >= vocab::kAtomSizes[f]) {
          throw IndexError(std::string(vocab::kAtomFieldNames[f]) + " index " + std::to_string(idx[f]) +
                           " outside vocabulary");
        }
        b.atom_idx.push_back(idx[f]);
      }
    }
    for (const Bond& bond : g->bonds()) {
      const auto idx = bond.attrs.vocab_indices();
      for (int f = 0; f < vocab::kNumBondFields; ++f) {
        if (idx[f] < 0 || idx[f] >= vocab::kBondSizes[f]) {
          throw IndexError(std::string(vocab::kBondFieldNames[f]) + " index " + std::to_string(idx[f]) +
                           " outside vocabulary");
        }
        b.bond_idx.push_back(idx[f]);
      }
      edges->push_back({base + bond.begin, base + bond.end, b.num_bonds});
      edges->push_back({base + bond.end, base + bond.begin, b.num_bonds});
      ++b.num_bonds;
    }
    b.num_nodes += g->num_atoms();
    b.offsets.push_back(b.num_nodes);
  }
  b.edges = std::move(edges);
  return b;
}

GraphBatch GraphBatch::from_graph(const MolGraph& g) {
  const MolGraph* p = &g;
  return from_graphs(std::span<const MolGraph* const>(&p, 1));
}

Tape::Id embed_atoms(Tape& t, Model& m, const GraphBatch& b) {
  std::vector<Tape::Id> tables;
  for (int f = 0; f < vocab::kNumAtomFields; ++f) tables.push_back(t.param(m.params.at(atom_table(f))));
  return t.embed_sum(tables, b.atom_idx, b.num_nodes);
}

Tape::Id embed_bonds(Tape& t, Model& m, const GraphBatch& b) {
  std::vector<Tape::Id> tables;
  for (int f = 0; f < vocab::kNumBondFields; ++f) tables.push_back(t.param(m.params.at(bond_table(f))));
  return t.embed_sum(tables, b.bond_idx, b.num_bonds);
}

Tape::Id encode(Tape& t, Model& m, const GraphBatch& b, bool train, Rng* rng) {
  const bool drop = train && m.config.dropout > 0.0;
  if (drop && !rng) throw ShapeError("dropout requires a random generator");
  Tape::Id h = embed_atoms(t, m, b);
  const Tape::Id e = embed_bonds(t, m, b);
  for (int l = 0; l < m.config.layers; ++l) {
    const std::string pre = layer_prefix(l);
    auto P = [&](const char* name) { return t.param(m.params.at(pre + name)); };
    Tape::Id x = t.gin_aggregate(h, e, P("eps"), b.edges);
    x = t.linear(x, P("lin1.W"), P("lin1.b"));
    x = t.relu(x);
    x = t.linear(x, P("lin2.W"), P("lin2.b"));
    x = t.layer_norm(x, P("ln.gamma"), P("ln.beta"));
    if (l + 1 < m.config.layers) x = t.relu(x);
    if (drop) x = t.dropout(x, m.config.dropout, *rng);
    h = x;
  }
  return h;
}

Tape::Id readout(Tape& t, Tape::Id h, const GraphBatch& b) {
  auto groups = std::make_shared<std::vector<std::vector<int>>>();
  for (int g = 0; g < b.num_graphs(); ++g) {
    if (b.graph_size(g) == 0) throw EmptyGraphError("readout of an empty graph");
    std::vector<int> rows(b.graph_size(g));
    for (int i = 0; i < b.graph_size(g); ++i) rows[i] = b.offsets[g] + i;
    groups->push_back(std::move(rows));
  }
  return t.segment_mean(h, std::move(groups));
}

Tape::Id project(Tape& t, Model& m, Head head, Tape::Id x) {
  const std::string pre = head_prefix(head);
  auto P = [&](const char* name) { return t.param(m.params.at(pre + name)); };
  Tape::Id y = t.linear(x, P("lin1.W"), P("lin1.b"));
  y = t.leaky_relu(y, m.config.leaky_slope);
  return t.linear(y, P("lin2.W"), P("lin2.b"));
}

Matrix encode_nodes(Model& m, const MolGraph& g) {
  Tape t;
  const GraphBatch b = GraphBatch::from_graph(g);
  return t.value(encode(t, m, b));
}

Matrix readout_rows(const Matrix& h) {
  if (h.rows == 0) throw EmptyGraphError("readout of an empty graph");
  Matrix out(1, h.cols);
  for (int i = 0; i < h.rows; ++i) kernels::axpy_f64(1.0 / h.rows, h.row(i), out.row(0), h.cols);
  return out;
}

Matrix graph_embeddings(Model& m, std::span<const MolGraph* const> graphs) {
  Tape t;
  const GraphBatch b = GraphBatch::from_graphs(graphs);
  return t.value(readout(t, encode(t, m, b), b));
}

void round_to_float32(Model& m) {
  for (Parameter& p : m.params.all()) {
    for (double& v : p.value.data) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace molpla
