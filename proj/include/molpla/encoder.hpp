#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "molpla/autodiff.hpp"
#include "molpla/molgraph.hpp"

namespace molpla {

class EmptyGraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IndexError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EncoderConfig {
  int d = 300;
  int layers = 5;
  int condition_bits = 64;
  double dropout = 0.0;
  double leaky_slope = 0.01;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

enum class Head { Graph, Node, Query, RGroup };
const char* head_name(Head h);

// GIN encoder plus projection heads. Parameters are created and initialized
// in a fixed order from a single generator seeded by config.seed.
class Model {
 public:
  Model() = default;
  explicit Model(const EncoderConfig& config);

  EncoderConfig config;
  ParameterStore params;
};

// Disjoint union of graphs prepared for the encoder.
struct GraphBatch {
  int num_nodes = 0;
  int num_bonds = 0;
  std::vector<int> atom_idx;  // num_nodes x 6 vocabulary indices
  std::vector<int> bond_idx;  // num_bonds x 5
  std::shared_ptr<const std::vector<DirectedEdge>> edges;
  std::vector<int> offsets;  // first node of each graph, plus the total

  int num_graphs() const { return static_cast<int>(offsets.size()) - 1; }
  int graph_size(int g) const { return offsets[g + 1] - offsets[g]; }

  // Throws IndexError if an attribute falls outside its vocabulary.
  static GraphBatch from_graphs(std::span<const MolGraph* const> graphs);
  static GraphBatch from_graph(const MolGraph& g);
};

// Sum of per-attribute embeddings for every node / bond.
Tape::Id embed_atoms(Tape& t, Model& m, const GraphBatch& b);
Tape::Id embed_bonds(Tape& t, Model& m, const GraphBatch& b);

// Node matrix after all GIN layers. Dropout is applied only when train is
// set (rng required then).
Tape::Id encode(Tape& t, Model& m, const GraphBatch& b, bool train = false, Rng* rng = nullptr);

// Mean over the nodes of each graph in the batch; one row per graph.
Tape::Id readout(Tape& t, Tape::Id h, const GraphBatch& b);

// Two-layer MLP head with LeakyReLU in between.
Tape::Id project(Tape& t, Model& m, Head head, Tape::Id x);

// Inference helpers (no dropout).
Matrix encode_nodes(Model& m, const MolGraph& g);
Matrix readout_rows(const Matrix& h);  // column mean, 1 x d
Matrix graph_embeddings(Model& m, std::span<const MolGraph* const> graphs);

// Rounds every parameter to float32 precision.
void round_to_float32(Model& m);

}  // namespace molpla
