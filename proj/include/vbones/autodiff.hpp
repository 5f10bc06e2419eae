#pragma once

#include <Eigen/Core>

#include <functional>
#include <span>
#include <vector>

// Reverse-mode differentiation over dense double matrices.
//
// A Graph records every operation in creation order; backward() walks the
// record in reverse. Batched tensors are laid out as matrices with one sample
// (or one sample-frame) per row. Graphs are single-use and not thread-safe;
// build one per forward pass.
namespace vbones::ad {

using Matrix = Eigen::MatrixXd;

class Graph;

class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return graph_ != nullptr; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Convenience for 1x1 results.
  double scalar() const;

 private:
  friend class Graph;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  int id_ = -1;
};

class Graph {
 public:
  using Backward = std::function<void(Graph&, const Matrix& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  // Leaf whose gradient is collected by backward().
  Var variable(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id()].value; }
  // Accumulated gradient; a zero matrix if nothing reached the node.
  Matrix grad(Var v) const;

  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Seeds d(output)/d(output) = 1 for a 1x1 output and propagates.
  void backward(Var output);

  std::size_t size() const noexcept { return nodes_.size(); }

  // Records a derived node. `inputs` decide whether it needs a gradient; the
  // callback receives the node's gradient and must accumulate into inputs
  // through accumulate().
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, std::span<const Var> inputs, Backward backward);
  void accumulate(Var target, const Matrix& g);
  // Accumulate into a column block without materialising a full-size matrix.
  void accumulate_cols(Var target, Eigen::Index start, const Matrix& g);
  void accumulate_rows(Var target, Eigen::Index start, const Matrix& g);
  void accumulate_row(Var target, Eigen::Index row, const Eigen::RowVectorXd& g);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };

  Matrix& grad_slot(Var v);

  std::vector<Node> nodes_;
};

// Linear algebra.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);
Var scale(Var a, double s);
// Adds a 1 x C row to every row of a.
Var add_row(Var a, Var row);
Var elu(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// Shape manipulation.
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var gather_rows(Var a, std::span<const Eigen::Index> rows);
// [N, C] -> [N, k * C], every column repeated k times consecutively.
Var repeat_cols(Var a, int k);

// Row-wise grouped vector operations on contiguous column groups of width g.
// [N, g*K] -> [N, K] Euclidean norms.
Var group_norm(Var a, int g);
// [N, g*K] -> [N, g*K] with every group scaled to unit length.
Var group_normalize(Var a, int g);

// Rows are grouped in consecutive segments of `segment` rows. Softmax over
// the rows of each segment, independently per column.
Var segment_softmax(Var a, int segment);
// [S*segment, C] -> [S, C] sum over each segment.
Var segment_sum(Var a, int segment);

Var sum(Var a);
Var mean(Var a);

// Pinhole projection of [N, 3J] camera-frame points using per-row intrinsics
// [N, 4] = (fx, fy, u0, v0). Throws BehindCamera when any depth <= 0.
Var project_pinhole(Var points, const Matrix& intrinsics);

}  // namespace vbones::ad
