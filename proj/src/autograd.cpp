#include "cdl/autograd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "cdl/hash.hpp"

namespace cdl::ag {

std::size_t ParameterStore::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  Parameter p;
  p.name = std::move(name);
  p.value = Matrix::Zero(rows, cols);
  p.grad = Matrix::Zero(rows, cols);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

double ParameterStore::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_) s += p.grad.squaredNorm();
  return std::sqrt(s);
}

std::uint64_t ParameterStore::hash() const {
  Fnv1a h;
  for (const auto& p : params_) {
    h.update(p.name);
    h.update_value(p.value.rows());
    h.update_value(p.value.cols());
    h.update(p.value.data(), sizeof(double) * static_cast<std::size_t>(p.value.size()));
  }
  return h.digest();
}

bool ParameterStore::operator==(const ParameterStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols() ||
        a.value != b.value)
      return false;
  }
  return true;
}

const Matrix& Var::value() const { return graph->value(id); }

Var Graph::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.sink = record_ ? &p.grad : nullptr;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::constant_ref(const Matrix& m) {
  Node n;
  n.external = &m;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::constant(Matrix m) {
  Node n;
  n.value = std::move(m);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

const Matrix& Graph::value(int id) const {
  const auto& n = nodes_[static_cast<std::size_t>(id)];
  return n.external ? *n.external : n.value;
}

Matrix& Graph::grad(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.sink) return *n.sink;
  if (n.grad.size() == 0) {
    const Matrix& v = n.external ? *n.external : n.value;
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

Var Graph::push(Matrix value, std::initializer_list<Var> inputs, std::function<void(Graph&, int)> backward) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(backward));
}

Var Graph::push(Matrix value, std::span<const Var> inputs, std::function<void(Graph&, int)> backward) {
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (const Var& v : inputs)
      if (nodes_[static_cast<std::size_t>(v.id)].needs_grad) n.needs_grad = true;
    if (n.needs_grad) n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Graph::backward(Var loss) {
  if (!record_) throw std::logic_error("backward on a non-recording graph");
  if (loss.value().size() != 1) throw std::logic_error("backward needs a scalar loss");
  if (!needs_grad(loss.id)) return;
  grad(loss.id)(0, 0) += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, i);
  }
}

namespace {

Graph& graph_of(Var a) { return *a.graph; }

inline void acc(Graph& g, Var v, const Matrix& delta) {
  if (g.needs_grad(v.id)) g.grad(v.id) += delta;
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a);
  return g.push(a.value() * b.value(), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& d = g.grad(self);
    if (g.needs_grad(a.id)) g.grad(a.id).noalias() += d * g.value(b.id).transpose();
    if (g.needs_grad(b.id)) g.grad(b.id).noalias() += g.value(a.id).transpose() * d;
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a);
  return g.push(a.value() + b.value(), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& d = g.grad(self);
    acc(g, a, d);
    acc(g, b, d);
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a);
  return g.push(a.value() - b.value(), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& d = g.grad(self);
    acc(g, a, d);
    if (g.needs_grad(b.id)) g.grad(b.id) -= d;
  });
}

Var cmul(Var a, Var b) {
  Graph& g = graph_of(a);
  return g.push(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Graph& g, int self) {
    const Matrix& d = g.grad(self);
    if (g.needs_grad(a.id)) g.grad(a.id) += d.cwiseProduct(g.value(b.id));
    if (g.needs_grad(b.id)) g.grad(b.id) += d.cwiseProduct(g.value(a.id));
  });
}

Var scale(Var a, double s) {
  Graph& g = graph_of(a);
  return g.push(a.value() * s, {a}, [a, s](Graph& g, int self) { acc(g, a, g.grad(self) * s); });
}

Var scale_by(Var s, Var a) {
  Graph& g = graph_of(a);
  return g.push(a.value() * s.scalar(), {s, a}, [s, a](Graph& g, int self) {
    const Matrix& d = g.grad(self);
    if (g.needs_grad(s.id)) g.grad(s.id)(0, 0) += d.cwiseProduct(g.value(a.id)).sum();
    if (g.needs_grad(a.id)) g.grad(a.id) += d * g.value(s.id)(0, 0);
  });
}

Var one_minus(Var a) {
  Graph& g = graph_of(a);
  return g.push((1.0 - a.value().array()).matrix(), {a}, [a](Graph& g, int self) {
    if (g.needs_grad(a.id)) g.grad(a.id) -= g.grad(self);
  });
}

Var sigmoid(Var a) {
  Graph& g = graph_of(a);
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return g.push(std::move(y), {a}, [a](Graph& g, int self) {
    const Matrix& y = g.value(self);
    acc(g, a, g.grad(self).cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Var tanh(Var a) {
  Graph& g = graph_of(a);
  return g.push(a.value().array().tanh().matrix(), {a}, [a](Graph& g, int self) {
    const Matrix& y = g.value(self);
    acc(g, a, g.grad(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var relu(Var a) {
  Graph& g = graph_of(a);
  return g.push(a.value().cwiseMax(0.0), {a}, [a](Graph& g, int self) {
    const Matrix& x = g.value(a.id);
    acc(g, a, g.grad(self).cwiseProduct((x.array() > 0.0).cast<double>().matrix()));
  });
}

Var log(Var a) {
  Graph& g = graph_of(a);
  return g.push(a.value().array().log().matrix(), {a}, [a](Graph& g, int self) {
    acc(g, a, g.grad(self).cwiseQuotient(g.value(a.id)));
  });
}

Var sum(Var a) {
  Graph& g = graph_of(a);
  return g.push(Matrix::Constant(1, 1, a.value().sum()), {a}, [a](Graph& g, int self) {
    if (g.needs_grad(a.id)) g.grad(a.id).array() += g.grad(self)(0, 0);
  });
}

Var norm(Var a) {
  Graph& g = graph_of(a);
  return g.push(Matrix::Constant(1, 1, a.value().norm()), {a}, [a](Graph& g, int self) {
    const double n = g.value(self)(0, 0);
    if (n > 0.0) acc(g, a, g.value(a.id) * (g.grad(self)(0, 0) / n));
  });
}

Var pick(Var a, Eigen::Index r, Eigen::Index c) {
  Graph& g = graph_of(a);
  return g.push(Matrix::Constant(1, 1, a.value()(r, c)), {a}, [a, r, c](Graph& g, int self) {
    if (g.needs_grad(a.id)) g.grad(a.id)(r, c) += g.grad(self)(0, 0);
  });
}

Var rows(Var a, Eigen::Index start, Eigen::Index n) {
  Graph& g = graph_of(a);
  return g.push(a.value().middleRows(start, n), {a}, [a, start, n](Graph& g, int self) {
    if (g.needs_grad(a.id)) g.grad(a.id).middleRows(start, n) += g.grad(self);
  });
}

Var vcat(std::initializer_list<Var> parts) { return vcat(std::span<const Var>(parts.begin(), parts.size())); }

Var vcat(std::span<const Var> parts) {
  Graph& g = graph_of(parts.front());
  Eigen::Index total = 0;
  const Eigen::Index cols = parts.front().cols();
  for (const Var& p : parts) total += p.rows();
  Matrix y(total, cols);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    y.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.push(std::move(y), parts, [inputs](Graph& g, int self) {
    const Matrix& d = g.grad(self);
    Eigen::Index off = 0;
    for (const Var& p : inputs) {
      const Eigen::Index r = g.value(p.id).rows();
      if (g.needs_grad(p.id)) g.grad(p.id) += d.middleRows(off, r);
      off += r;
    }
  });
}

Var hcat(std::span<const Var> parts) {
  Graph& g = graph_of(parts.front());
  Eigen::Index total = 0;
  const Eigen::Index rows_ = parts.front().rows();
  for (const Var& p : parts) total += p.cols();
  Matrix y(rows_, total);
  Eigen::Index off = 0;
  for (const Var& p : parts) {
    y.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.push(std::move(y), parts, [inputs](Graph& g, int self) {
    const Matrix& d = g.grad(self);
    Eigen::Index off = 0;
    for (const Var& p : inputs) {
      const Eigen::Index c = g.value(p.id).cols();
      if (g.needs_grad(p.id)) g.grad(p.id) += d.middleCols(off, c);
      off += c;
    }
  });
}

Var transpose(Var a) {
  Graph& g = graph_of(a);
  return g.push(a.value().transpose(), {a}, [a](Graph& g, int self) {
    if (g.needs_grad(a.id)) g.grad(a.id) += g.grad(self).transpose();
  });
}

Var add_colwise(Var m, Var b) {
  Graph& g = graph_of(m);
  Matrix y = m.value().colwise() + b.value().col(0);
  return g.push(std::move(y), {m, b}, [m, b](Graph& g, int self) {
    const Matrix& d = g.grad(self);
    acc(g, m, d);
    if (g.needs_grad(b.id)) g.grad(b.id) += d.rowwise().sum();
  });
}

Var rowmax(Var m) {
  Graph& g = graph_of(m);
  const Matrix& x = m.value();
  Matrix y(x.rows(), 1);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < x.cols(); ++c)
      if (x(r, c) > x(r, best)) best = c;
    arg[static_cast<std::size_t>(r)] = best;
    y(r, 0) = x(r, best);
  }
  return g.push(std::move(y), {m}, [m, arg](Graph& g, int self) {
    if (!g.needs_grad(m.id)) return;
    const Matrix& d = g.grad(self);
    Matrix& gm = g.grad(m.id);
    for (std::size_t r = 0; r < arg.size(); ++r) gm(static_cast<Eigen::Index>(r), arg[r]) += d(static_cast<Eigen::Index>(r), 0);
  });
}

namespace {

void softmax_backward(Graph& g, int self, Var a) {
  if (!g.needs_grad(a.id)) return;
  const Matrix& y = g.value(self);
  const Matrix& d = g.grad(self);
  const double dot = y.cwiseProduct(d).sum();
  g.grad(a.id) += (y.array() * (d.array() - dot)).matrix();
}

}  // namespace

Var softmax(Var a) {
  Graph& g = graph_of(a);
  const Matrix& x = a.value();
  Matrix y = (x.array() - x.maxCoeff()).exp().matrix();
  y /= y.sum();
  return g.push(std::move(y), {a}, [a](Graph& g, int self) { softmax_backward(g, self, a); });
}

Var masked_softmax(Var a, const std::vector<std::uint8_t>& mask) {
  Graph& g = graph_of(a);
  const Matrix& x = a.value();
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (mask[static_cast<std::size_t>(i)] && x(i) > mx) mx = x(i);
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  double z = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    y(i) = std::exp(x(i) - mx);
    z += y(i);
  }
  y /= z;
  // Masked entries have y = 0, so the generic softmax Jacobian already
  // routes no gradient to them.
  return g.push(std::move(y), {a}, [a](Graph& g, int self) { softmax_backward(g, self, a); });
}

Var column(Var table, Eigen::Index index) {
  Graph& g = graph_of(table);
  return g.push(table.value().col(index), {table}, [table, index](Graph& g, int self) {
    if (g.needs_grad(table.id)) g.grad(table.id).col(index) += g.grad(self);
  });
}

Var windows(Var m, Eigen::Index width) {
  Graph& g = graph_of(m);
  const Matrix& x = m.value();
  const Eigen::Index d = x.rows();
  const Eigen::Index n = x.cols() - width + 1;
  Matrix y(width * d, n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index k = 0; k < width; ++k) y.block(k * d, c, d, 1) = x.col(c + k);
  return g.push(std::move(y), {m}, [m, width, d, n](Graph& g, int self) {
    if (!g.needs_grad(m.id)) return;
    const Matrix& dy = g.grad(self);
    Matrix& gm = g.grad(m.id);
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::Index k = 0; k < width; ++k) gm.col(c + k) += dy.block(k * d, c, d, 1);
  });
}

Var mask_mul(Var a, Matrix mask) {
  Graph& g = graph_of(a);
  Matrix y = a.value().cwiseProduct(mask);
  return g.push(std::move(y), {a}, [a, mask = std::move(mask)](Graph& g, int self) {
    acc(g, a, g.grad(self).cwiseProduct(mask));
  });
}

}  // namespace cdl::ag
