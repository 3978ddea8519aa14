#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "molpla/rng.hpp"
#include "molpla/tensor.hpp"

namespace molpla {

class ZeroVectorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  // Adam moments
  Matrix m;
  Matrix v;
};

// Named parameters in a fixed (insertion) order.
class ParameterStore {
 public:
  Parameter& add(const std::string& name, int rows, int cols);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }
  size_t total_size() const;
  void zero_grad();

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, size_t> index_;
};

struct DirectedEdge {
  int src;
  int dst;
  int feature;  // row of the edge feature matrix
};

// Reverse-mode automatic differentiation over a recorded list of matrix ops.
// Gradients of parameters accumulate into Parameter::grad on backward().
class Tape {
 public:
  using Id = int;

  Id constant(Matrix m);
  Id param(Parameter& p);

  const Matrix& value(Id id) const;
  // Gradient of the last backward() target w.r.t. node id (zero matrix if the
  // node received none).
  Matrix grad(Id id) const;

  // out[i] = sum_f tables[f][indices[i * F + f]]
  Id embed_sum(const std::vector<Id>& tables, std::vector<int> indices, int rows);
  // x * w + b; w is in x out, b is 1 x out
  Id linear(Id x, Id w, Id b);
  Id relu(Id x);
  Id leaky_relu(Id x, double slope);
  Id layer_norm(Id x, Id gamma, Id beta, double eps = 1e-5);
  // out[v] = (1 + eps) h[v] + sum over edges (u -> v) of (h[u] + e[feature])
  Id gin_aggregate(Id h, Id e, Id eps, std::shared_ptr<const std::vector<DirectedEdge>> edges);
  Id dropout(Id x, double rate, Rng& rng);
  // Row means over each group of row indices.
  Id segment_mean(Id x, std::shared_ptr<const std::vector<std::vector<int>>> groups);
  Id gather_rows(Id x, std::vector<int> rows);
  Id add(Id a, Id b);
  Id scale(Id x, double s);
  Id concat_cols(Id a, Id b);
  Id detach(Id x);
  // Symmetric InfoNCE over cosine similarities; 1 x 1 output.
  Id info_nce(Id x, Id y, double tau);
  // sum_ij w_ij x_ij with w constant; 1 x 1 output.
  Id dot_const(Id x, Matrix w);

  void backward(Id scalar);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Parameter* param = nullptr;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::function<void(Tape&, Node&)> back;
  };

  Id push(Matrix value, bool requires_grad, std::function<void(Tape&, Node&)> back);
  bool needs(Id id) const { return nodes_[id].requires_grad; }
  Matrix& grad_ref(Id id);
  const Matrix& val(const Node& n) const { return n.external ? *n.external : n.value; }

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, Id> param_ids_;
};

// Forward-only InfoNCE value (same formula as Tape::info_nce).
double info_nce_value(const Matrix& x, const Matrix& y, double tau);

}  // namespace molpla
