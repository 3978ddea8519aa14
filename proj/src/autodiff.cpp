#include "molpla/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "molpla/kernels.hpp"

namespace molpla {

Parameter& ParameterStore::add(const std::string& name, int rows, int cols) {
  if (index_.count(name)) throw ShapeError("duplicate parameter " + name);
  Parameter p;
  p.name = name;
  p.value = Matrix(rows, cols);
  p.grad = Matrix(rows, cols);
  p.m = Matrix(rows, cols);
  p.v = Matrix(rows, cols);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("unknown parameter " + name);
  return params_[it->second];
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ShapeError("unknown parameter " + name);
  return params_[it->second];
}

size_t ParameterStore::total_size() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad.zero();
}

Tape::Id Tape::push(Matrix value, bool requires_grad, std::function<void(Tape&, Node&)> back) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size()) - 1;
}

Matrix& Tape::grad_ref(Id id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    const Matrix& v = val(n);
    n.grad = Matrix(v.rows, v.cols);
    n.has_grad = true;
  }
  return n.grad;
}

Tape::Id Tape::constant(Matrix m) { return push(std::move(m), false, nullptr); }

Tape::Id Tape::param(Parameter& p) {
  auto it = param_ids_.find(&p);
  if (it != param_ids_.end()) return it->second;
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.requires_grad = true;
  n.back = [](Tape&, Node& self) {
    Matrix& g = self.param->grad;
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
  };
  nodes_.push_back(std::move(n));
  const Id id = static_cast<Id>(nodes_.size()) - 1;
  param_ids_[&p] = id;
  return id;
}

const Matrix& Tape::value(Id id) const { return val(nodes_.at(id)); }

Matrix Tape::grad(Id id) const {
  const Node& n = nodes_.at(id);
  if (n.has_grad) return n.grad;
  const Matrix& v = val(n);
  return Matrix(v.rows, v.cols);
}

Tape::Id Tape::embed_sum(const std::vector<Id>& tables, std::vector<int> indices, int rows) {
  const int f = static_cast<int>(tables.size());
  if (f == 0) throw ShapeError("embed_sum needs at least one table");
  if (static_cast<int>(indices.size()) != rows * f) throw ShapeError("embed_sum index count mismatch");
  const int d = value(tables[0]).cols;
  Matrix out(rows, d);
  bool req = false;
  for (int t = 0; t < f; ++t) {
    const Matrix& tab = value(tables[t]);
    if (tab.cols != d) throw ShapeError("embed_sum tables differ in width");
    req = req || needs(tables[t]);
    for (int i = 0; i < rows; ++i) {
      const int idx = indices[static_cast<size_t>(i) * f + t];
      if (idx < 0 || idx >= tab.rows) throw ShapeError("embedding index out of range");
      kernels::axpy_f64(1.0, tab.row(idx), out.row(i), d);
    }
  }
  return push(std::move(out), req, [tables, indices = std::move(indices), rows, f, d](Tape& t, Node& self) {
    for (int k = 0; k < f; ++k) {
      if (!t.needs(tables[k])) continue;
      Matrix& g = t.grad_ref(tables[k]);
      for (int i = 0; i < rows; ++i) {
        kernels::axpy_f64(1.0, self.grad.row(i), g.row(indices[static_cast<size_t>(i) * f + k]), d);
      }
    }
  });
}

Tape::Id Tape::linear(Id x, Id w, Id b) {
  const Matrix& xv = value(x);
  const Matrix& wv = value(w);
  const Matrix& bv = value(b);
  if (bv.rows != 1 || bv.cols != wv.cols) throw ShapeError("linear bias shape mismatch");
  Matrix out;
  gemm_nn(xv, wv, out);
  for (int i = 0; i < out.rows; ++i) kernels::axpy_f64(1.0, bv.row(0), out.row(i), out.cols);
  const bool req = needs(x) || needs(w) || needs(b);
  return push(std::move(out), req, [x, w, b](Tape& t, Node& self) {
    const Matrix& dy = self.grad;
    if (t.needs(x)) gemm_nt(dy, t.value(w), t.grad_ref(x), true);
    if (t.needs(w)) gemm_tn(t.value(x), dy, t.grad_ref(w), true);
    if (t.needs(b)) {
      Matrix& gb = t.grad_ref(b);
      for (int i = 0; i < dy.rows; ++i) kernels::axpy_f64(1.0, dy.row(i), gb.row(0), dy.cols);
    }
  });
}

Tape::Id Tape::relu(Id x) { return leaky_relu(x, 0.0); }

Tape::Id Tape::leaky_relu(Id x, double slope) {
  Matrix out = value(x);
  for (double& v : out.data) {
    if (v < 0.0) v *= slope;
  }
  return push(std::move(out), needs(x), [x, slope](Tape& t, Node& self) {
    const Matrix& xv = t.value(x);
    Matrix& g = t.grad_ref(x);
    for (size_t i = 0; i < g.data.size(); ++i) {
      g.data[i] += xv.data[i] > 0.0 ? self.grad.data[i] : slope * self.grad.data[i];
    }
  });
}

Tape::Id Tape::layer_norm(Id x, Id gamma, Id beta, double eps) {
  const Matrix& xv = value(x);
  const Matrix& gv = value(gamma);
  const Matrix& bv = value(beta);
  const int n = xv.rows, d = xv.cols;
  if (gv.cols != d || bv.cols != d) throw ShapeError("layer_norm parameter width mismatch");
  Matrix out(n, d);
  auto xhat = std::make_shared<Matrix>(n, d);
  auto inv_std = std::make_shared<std::vector<double>>(n);
  for (int i = 0; i < n; ++i) {
    const double* r = xv.row(i);
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += r[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (r[j] - mean) * (r[j] - mean);
    var /= d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (int j = 0; j < d; ++j) {
      const double h = (r[j] - mean) * is;
      (*xhat)(i, j) = h;
      out(i, j) = h * gv(0, j) + bv(0, j);
    }
  }
  const bool req = needs(x) || needs(gamma) || needs(beta);
  return push(std::move(out), req, [x, gamma, beta, xhat, inv_std, n, d](Tape& t, Node& self) {
    const Matrix& dy = self.grad;
    const Matrix& gv = t.value(gamma);
    if (t.needs(gamma) || t.needs(beta)) {
      Matrix* gg = t.needs(gamma) ? &t.grad_ref(gamma) : nullptr;
      Matrix* gb = t.needs(beta) ? &t.grad_ref(beta) : nullptr;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
          if (gg) (*gg)(0, j) += dy(i, j) * (*xhat)(i, j);
          if (gb) (*gb)(0, j) += dy(i, j);
        }
      }
    }
    if (t.needs(x)) {
      Matrix& gx = t.grad_ref(x);
      std::vector<double> dxh(d);
      for (int i = 0; i < n; ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < d; ++j) {
          dxh[j] = dy(i, j) * gv(0, j);
          m1 += dxh[j];
          m2 += dxh[j] * (*xhat)(i, j);
        }
        m1 /= d;
        m2 /= d;
        const double is = (*inv_std)[i];
        for (int j = 0; j < d; ++j) gx(i, j) += is * (dxh[j] - m1 - (*xhat)(i, j) * m2);
      }
    }
  });
}

Tape::Id Tape::gin_aggregate(Id h, Id e, Id eps, std::shared_ptr<const std::vector<DirectedEdge>> edges) {
  const Matrix& hv = value(h);
  const Matrix& ev = value(e);
  const double scale = 1.0 + value(eps)(0, 0);
  const int n = hv.rows, d = hv.cols;
  if (ev.cols != d && ev.rows > 0) throw ShapeError("gin_aggregate edge width mismatch");
  Matrix out(n, d);
  for (int v = 0; v < n; ++v) kernels::axpy_f64(scale, hv.row(v), out.row(v), d);
  for (const DirectedEdge& de : *edges) {
    kernels::axpy_f64(1.0, hv.row(de.src), out.row(de.dst), d);
    kernels::axpy_f64(1.0, ev.row(de.feature), out.row(de.dst), d);
  }
  const bool req = needs(h) || needs(e) || needs(eps);
  return push(std::move(out), req, [h, e, eps, edges, n, d](Tape& t, Node& self) {
    const Matrix& dy = self.grad;
    if (t.needs(h)) {
      Matrix& gh = t.grad_ref(h);
      const double scale = 1.0 + t.value(eps)(0, 0);
      for (int v = 0; v < n; ++v) kernels::axpy_f64(scale, dy.row(v), gh.row(v), d);
      for (const DirectedEdge& de : *edges) kernels::axpy_f64(1.0, dy.row(de.dst), gh.row(de.src), d);
    }
    if (t.needs(e)) {
      Matrix& ge = t.grad_ref(e);
      for (const DirectedEdge& de : *edges) kernels::axpy_f64(1.0, dy.row(de.dst), ge.row(de.feature), d);
    }
    if (t.needs(eps)) {
      const Matrix& hv = t.value(h);
      double s = 0.0;
      for (int v = 0; v < n; ++v) s += kernels::dot_f64(dy.row(v), hv.row(v), d);
      t.grad_ref(eps)(0, 0) += s;
    }
  });
}

Tape::Id Tape::dropout(Id x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ShapeError("dropout rate must be below 1");
  const Matrix& xv = value(x);
  auto mask = std::make_shared<std::vector<double>>(xv.size());
  Matrix out(xv.rows, xv.cols);
  const double keep = 1.0 / (1.0 - rate);
  for (size_t i = 0; i < xv.size(); ++i) {
    (*mask)[i] = rng.uniform() < rate ? 0.0 : keep;
    out.data[i] = xv.data[i] * (*mask)[i];
  }
  return push(std::move(out), needs(x), [x, mask](Tape& t, Node& self) {
    Matrix& g = t.grad_ref(x);
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i] * (*mask)[i];
  });
}

Tape::Id Tape::segment_mean(Id x, std::shared_ptr<const std::vector<std::vector<int>>> groups) {
  const Matrix& xv = value(x);
  const int d = xv.cols;
  Matrix out(static_cast<int>(groups->size()), d);
  for (size_t g = 0; g < groups->size(); ++g) {
    const auto& rows = (*groups)[g];
    if (rows.empty()) throw ShapeError("segment_mean over an empty group");
    const double w = 1.0 / static_cast<double>(rows.size());
    for (int r : rows) kernels::axpy_f64(w, xv.row(r), out.row(static_cast<int>(g)), d);
  }
  return push(std::move(out), needs(x), [x, groups, d](Tape& t, Node& self) {
    Matrix& gx = t.grad_ref(x);
    for (size_t g = 0; g < groups->size(); ++g) {
      const auto& rows = (*groups)[g];
      const double w = 1.0 / static_cast<double>(rows.size());
      for (int r : rows) kernels::axpy_f64(w, self.grad.row(static_cast<int>(g)), gx.row(r), d);
    }
  });
}

Tape::Id Tape::gather_rows(Id x, std::vector<int> rows) {
  const Matrix& xv = value(x);
  const int d = xv.cols;
  Matrix out(static_cast<int>(rows.size()), d);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= xv.rows) throw ShapeError("gather_rows index out of range");
    std::copy(xv.row(rows[i]), xv.row(rows[i]) + d, out.row(static_cast<int>(i)));
  }
  return push(std::move(out), needs(x), [x, rows = std::move(rows), d](Tape& t, Node& self) {
    Matrix& gx = t.grad_ref(x);
    for (size_t i = 0; i < rows.size(); ++i) {
      kernels::axpy_f64(1.0, self.grad.row(static_cast<int>(i)), gx.row(rows[i]), d);
    }
  });
}

Tape::Id Tape::add(Id a, Id b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.rows != bv.rows || av.cols != bv.cols) throw ShapeError("add shape mismatch");
  Matrix out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  return push(std::move(out), needs(a) || needs(b), [a, b](Tape& t, Node& self) {
    for (Id id : {a, b}) {
      if (!t.needs(id)) continue;
      Matrix& g = t.grad_ref(id);
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
    }
  });
}

Tape::Id Tape::scale(Id x, double s) {
  Matrix out = value(x);
  for (double& v : out.data) v *= s;
  return push(std::move(out), needs(x), [x, s](Tape& t, Node& self) {
    Matrix& g = t.grad_ref(x);
    for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += s * self.grad.data[i];
  });
}

Tape::Id Tape::concat_cols(Id a, Id b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.rows != bv.rows) throw ShapeError("concat_cols row mismatch");
  const int ca = av.cols, cb = bv.cols;
  Matrix out(av.rows, ca + cb);
  for (int i = 0; i < av.rows; ++i) {
    std::copy(av.row(i), av.row(i) + ca, out.row(i));
    std::copy(bv.row(i), bv.row(i) + cb, out.row(i) + ca);
  }
  return push(std::move(out), needs(a) || needs(b), [a, b, ca, cb](Tape& t, Node& self) {
    const int n = self.grad.rows;
    if (t.needs(a)) {
      Matrix& g = t.grad_ref(a);
      for (int i = 0; i < n; ++i) kernels::axpy_f64(1.0, self.grad.row(i), g.row(i), ca);
    }
    if (t.needs(b)) {
      Matrix& g = t.grad_ref(b);
      for (int i = 0; i < n; ++i) kernels::axpy_f64(1.0, self.grad.row(i) + ca, g.row(i), cb);
    }
  });
}

Tape::Id Tape::dot_const(Id x, Matrix w) {
  const Matrix& xv = value(x);
  if (xv.rows != w.rows || xv.cols != w.cols) throw ShapeError("dot_const shape mismatch");
  Matrix out(1, 1, kernels::dot_f64(xv.data.data(), w.data.data(), xv.size()));
  return push(std::move(out), needs(x), [x, w = std::move(w)](Tape& t, Node& self) {
    kernels::axpy_f64(self.grad(0, 0), w.data.data(), t.grad_ref(x).data.data(), w.size());
  });
}

Tape::Id Tape::detach(Id x) { return push(value(x), false, nullptr); }

namespace {

Matrix normalized_rows(const Matrix& m, std::vector<double>& norms, const char* which) {
  Matrix out = m;
  norms.assign(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    const double nrm = std::sqrt(kernels::dot_f64(m.row(i), m.row(i), m.cols));
    if (!(nrm > 0.0) || !std::isfinite(nrm)) {
      throw ZeroVectorError(std::string("InfoNCE input ") + which + " row " + std::to_string(i) +
                            " has zero or non-finite norm");
    }
    norms[i] = nrm;
    for (int j = 0; j < m.cols; ++j) out(i, j) /= nrm;
  }
  return out;
}

// Returns the loss; fills dS (dL/dS, scaled for S = cos / tau) when given.
double info_nce_core(const Matrix& xn, const Matrix& yn, double tau, Matrix* ds) {
  const int b = xn.rows;
  Matrix s;
  gemm_nt(xn, yn, s);
  for (double& v : s.data) v /= tau;
  std::vector<double> row_max(b, -INFINITY), col_max(b, -INFINITY);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) {
      row_max[i] = std::max(row_max[i], s(i, j));
      col_max[j] = std::max(col_max[j], s(i, j));
    }
  }
  std::vector<double> row_sum(b, 0.0), col_sum(b, 0.0);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) {
      row_sum[i] += std::exp(s(i, j) - row_max[i]);
      col_sum[j] += std::exp(s(i, j) - col_max[j]);
    }
  }
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double row_lse = row_max[i] + std::log(row_sum[i]);
    const double col_lse = col_max[i] + std::log(col_sum[i]);
    loss += (row_lse - s(i, i)) + (col_lse - s(i, i));
  }
  loss /= 2.0 * b;
  if (ds) {
    *ds = Matrix(b, b);
    const double w = 1.0 / (2.0 * b);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < b; ++j) {
        const double p = std::exp(s(i, j) - row_max[i]) / row_sum[i];
        const double q = std::exp(s(i, j) - col_max[j]) / col_sum[j];
        (*ds)(i, j) = w * (p + q - (i == j ? 2.0 : 0.0));
      }
    }
  }
  return loss;
}

}  // namespace

double info_nce_value(const Matrix& x, const Matrix& y, double tau) {
  if (x.rows != y.rows || x.cols != y.cols) throw ShapeError("info_nce shape mismatch");
  if (x.rows == 0) throw ShapeError("info_nce needs at least one pair");
  std::vector<double> nx, ny;
  const Matrix xn = normalized_rows(x, nx, "x");
  const Matrix yn = normalized_rows(y, ny, "y");
  return info_nce_core(xn, yn, tau, nullptr);
}

Tape::Id Tape::info_nce(Id x, Id y, double tau) {
  const Matrix& xv = value(x);
  const Matrix& yv = value(y);
  if (xv.rows != yv.rows || xv.cols != yv.cols) throw ShapeError("info_nce shape mismatch");
  if (xv.rows == 0) throw ShapeError("info_nce needs at least one pair");
  if (!(tau > 0.0)) throw ShapeError("info_nce temperature must be positive");
  auto nx = std::make_shared<std::vector<double>>();
  auto ny = std::make_shared<std::vector<double>>();
  auto xn = std::make_shared<Matrix>(normalized_rows(xv, *nx, "x"));
  auto yn = std::make_shared<Matrix>(normalized_rows(yv, *ny, "y"));
  auto ds = std::make_shared<Matrix>();
  const double loss = info_nce_core(*xn, *yn, tau, ds.get());
  Matrix out(1, 1, loss);
  return push(std::move(out), needs(x) || needs(y), [x, y, tau, nx, ny, xn, yn, ds](Tape& t, Node& self) {
    const double g = self.grad(0, 0);
    // through the unit-norm projection: dx = (dxh - xh <xh, dxh>) / |x|
    auto project = [&](const Matrix& unit, const std::vector<double>& norms, const Matrix& dunit, Matrix& out) {
      const int d = unit.cols;
      for (int i = 0; i < unit.rows; ++i) {
        const double c = kernels::dot_f64(unit.row(i), dunit.row(i), d);
        for (int j = 0; j < d; ++j) out(i, j) += g * (dunit(i, j) - unit(i, j) * c) / norms[i];
      }
    };
    if (t.needs(x)) {
      Matrix dxn;
      gemm_nn(*ds, *yn, dxn);
      for (double& v : dxn.data) v /= tau;
      project(*xn, *nx, dxn, t.grad_ref(x));
    }
    if (t.needs(y)) {
      Matrix dyn;
      gemm_tn(*ds, *xn, dyn);
      for (double& v : dyn.data) v /= tau;
      project(*yn, *ny, dyn, t.grad_ref(y));
    }
  });
}

void Tape::backward(Id scalar) {
  const Matrix& v = value(scalar);
  if (v.rows != 1 || v.cols != 1) throw ShapeError("backward target must be 1 x 1");
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Matrix();
  }
  if (!nodes_[scalar].requires_grad) return;
  grad_ref(scalar)(0, 0) = 1.0;
  for (Id id = scalar; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.has_grad && n.back) n.back(*this, n);
  }
}

}  // namespace molpla
