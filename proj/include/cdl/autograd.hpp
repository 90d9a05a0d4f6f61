#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cdl::ag {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// A named trainable matrix with its accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

/// Owns a model's parameters in registration order. Copying the store
/// copies the values (models have value semantics).
class ParameterStore {
 public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  void zero_grad();
  double grad_norm() const;
  /// Fingerprint of all values (bitwise).
  std::uint64_t hash() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  bool operator==(const ParameterStore& other) const;

 private:
  std::vector<Parameter> params_;
};

class Graph;

/// Handle to a node on a Graph tape.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Matrix& value() const;
  double scalar() const { return value()(0, 0); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode tape. Nodes are appended in topological order; `backward`
/// walks them in reverse. With recording off no closures are kept and the
/// graph is a plain forward evaluator.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  /// Leaf bound to a parameter; gradients accumulate into `p.grad`.
  Var param(Parameter& p);
  /// Leaf that reads `m` without copying; `m` must outlive the graph.
  Var constant_ref(const Matrix& m);
  Var constant(Matrix m);
  Var scalar(double v);

  const Matrix& value(int id) const;
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  /// Gradient buffer of a node (zero-initialized on first use).
  Matrix& grad(int id);

  void backward(Var loss);
  std::size_t size() const { return nodes_.size(); }

  // Used by op implementations.
  Var push(Matrix value, std::initializer_list<Var> inputs, std::function<void(Graph&, int)> backward);
  Var push(Matrix value, std::span<const Var> inputs, std::function<void(Graph&, int)> backward);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    Matrix* sink = nullptr;
    bool needs_grad = false;
    std::function<void(Graph&, int)> backward;
  };
  bool record_;
  std::vector<Node> nodes_;
};

// Elementwise / linear algebra ops. Shapes follow Eigen semantics.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);
Var scale(Var a, double s);
/// s (1x1) times every element of a.
Var scale_by(Var s, Var a);
/// 1 - a.
Var one_minus(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var log(Var a);
/// Sum of all elements (1x1).
Var sum(Var a);
/// Euclidean (Frobenius) norm (1x1).
Var norm(Var a);
/// Element (r, c) as 1x1.
Var pick(Var a, Eigen::Index r, Eigen::Index c = 0);
/// Rows [start, start + n).
Var rows(Var a, Eigen::Index start, Eigen::Index n);
/// Vertical concatenation of equal-width blocks.
Var vcat(std::span<const Var> parts);
Var vcat(std::initializer_list<Var> parts);
/// Horizontal concatenation of equal-height blocks.
Var hcat(std::span<const Var> parts);
Var transpose(Var a);
/// Adds column vector b to every column of m.
Var add_colwise(Var m, Var b);
/// Per-row maximum over columns (rows x 1); ties go to the first column.
Var rowmax(Var m);
/// Softmax over all elements.
Var softmax(Var a);
/// Softmax restricted to entries with mask != 0; masked entries get exactly 0.
Var masked_softmax(Var a, const std::vector<std::uint8_t>& mask);
/// Column `index` of a (rows x 1), e.g. an embedding lookup.
Var column(Var table, Eigen::Index index);
/// Stacks w consecutive columns of m (d x n) into one column per window:
/// result is (w*d) x (n - w + 1).
Var windows(Var m, Eigen::Index width);
/// Elementwise product with a constant mask (dropout).
Var mask_mul(Var a, Matrix mask);

}  // namespace cdl::ag
