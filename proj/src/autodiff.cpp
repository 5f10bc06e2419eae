#include "vbones/autodiff.hpp"

#include "vbones/error.hpp"

#include <cmath>
#include <string>

namespace vbones::ad {

const Matrix& Var::value() const { return graph_->value(*this); }

double Var::scalar() const {
  const auto& v = value();
  require(v.rows() == 1 && v.cols() == 1, ErrorKind::Internal, "scalar() on a non 1x1 value");
  return v(0, 0);
}

Var Graph::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, false, false, {}});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::variable(Matrix value) {
  nodes_.push_back({std::move(value), {}, true, false, {}});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Matrix Graph::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (!n.has_grad) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Graph::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Graph::record(Matrix value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) {
    require(v.graph_ == this, ErrorKind::Internal, "mixing variables from different graphs");
    needs = needs || nodes_[v.id()].requires_grad;
  }
  nodes_.push_back({std::move(value), {}, needs, false, needs ? std::move(backward) : Backward{}});
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Matrix& Graph::grad_slot(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::accumulate(Var target, const Matrix& g) {
  if (!nodes_[target.id()].requires_grad) return;
  grad_slot(target) += g;
}

void Graph::accumulate_cols(Var target, Eigen::Index start, const Matrix& g) {
  if (!nodes_[target.id()].requires_grad) return;
  grad_slot(target).middleCols(start, g.cols()) += g;
}

void Graph::accumulate_rows(Var target, Eigen::Index start, const Matrix& g) {
  if (!nodes_[target.id()].requires_grad) return;
  grad_slot(target).middleRows(start, g.rows()) += g;
}

void Graph::accumulate_row(Var target, Eigen::Index row, const Eigen::RowVectorXd& g) {
  if (!nodes_[target.id()].requires_grad) return;
  grad_slot(target).row(row) += g;
}

void Graph::backward(Var output) {
  require(output.graph_ == this, ErrorKind::Internal, "backward on a foreign variable");
  const auto& out = nodes_[output.id()].value;
  require(out.rows() == 1 && out.cols() == 1, ErrorKind::Internal,
          "backward() needs a scalar output");
  if (!nodes_[output.id()].requires_grad) return;
  grad_slot(output)(0, 0) += 1.0;
  for (int id = output.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    // Inputs always have smaller ids, so this slot is not written while the
    // callback runs.
    n.backward(*this, n.grad);
  }
}

namespace {

void same_shape(Var a, Var b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::Internal,
          std::string(op) + ": shape mismatch");
}

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), ErrorKind::Internal, "matmul: inner dimensions differ");
  Graph& g = a.graph();
  return g.record(a.value() * b.value(), {a, b}, [a, b](Graph& g, const Matrix& og) {
    if (g.requires_grad(a)) g.accumulate(a, og * b.value().transpose());
    if (g.requires_grad(b)) g.accumulate(b, a.value().transpose() * og);
  });
}

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  return a.graph().record(a.value() + b.value(), {a, b}, [a, b](Graph& g, const Matrix& og) {
    g.accumulate(a, og);
    g.accumulate(b, og);
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  return a.graph().record(a.value() - b.value(), {a, b}, [a, b](Graph& g, const Matrix& og) {
    g.accumulate(a, og);
    g.accumulate(b, -og);
  });
}

Var cmul(Var a, Var b) {
  same_shape(a, b, "cmul");
  return a.graph().record(a.value().cwiseProduct(b.value()), {a, b},
                          [a, b](Graph& g, const Matrix& og) {
                            if (g.requires_grad(a)) g.accumulate(a, og.cwiseProduct(b.value()));
                            if (g.requires_grad(b)) g.accumulate(b, og.cwiseProduct(a.value()));
                          });
}

Var scale(Var a, double s) {
  return a.graph().record(a.value() * s, {a},
                          [a, s](Graph& g, const Matrix& og) { g.accumulate(a, og * s); });
}

Var add_row(Var a, Var row) {
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorKind::Internal,
          "add_row: row shape mismatch");
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.graph().record(std::move(out), {a, row}, [a, row](Graph& g, const Matrix& og) {
    g.accumulate(a, og);
    if (g.requires_grad(row)) g.accumulate(row, og.colwise().sum());
  });
}

Var elu(Var a) {
  const Matrix& x = a.value();
  Matrix out = x.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Matrix& og) {
    const Matrix& x = a.value();
    g.accumulate(a, og.binaryExpr(x, [](double gv, double v) {
      return v > 0.0 ? gv : gv * std::exp(v);
    }));
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::Internal, "concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, ErrorKind::Internal, "concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().graph().record(std::move(out), inputs,
                                      [inputs](Graph& g, const Matrix& og) {
                                        Eigen::Index at = 0;
                                        for (const Var& p : inputs) {
                                          if (g.requires_grad(p)) {
                                            g.accumulate(p, og.middleCols(at, p.cols()));
                                          }
                                          at += p.cols();
                                        }
                                      });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::Internal, "concat_rows: no inputs");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, ErrorKind::Internal, "concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().graph().record(std::move(out), inputs,
                                      [inputs](Graph& g, const Matrix& og) {
                                        Eigen::Index at = 0;
                                        for (const Var& p : inputs) {
                                          if (g.requires_grad(p)) {
                                            g.accumulate(p, og.middleRows(at, p.rows()));
                                          }
                                          at += p.rows();
                                        }
                                      });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), ErrorKind::Internal,
          "slice_cols: out of range");
  return a.graph().record(a.value().middleCols(start, count), {a},
                          [a, start](Graph& g, const Matrix& og) {
                            g.accumulate_cols(a, start, og);
                          });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), ErrorKind::Internal,
          "slice_rows: out of range");
  return a.graph().record(a.value().middleRows(start, count), {a},
                          [a, start](Graph& g, const Matrix& og) {
                            g.accumulate_rows(a, start, og);
                          });
}

Var gather_rows(Var a, std::span<const Eigen::Index> rows) {
  const Matrix& x = a.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < x.rows(), ErrorKind::Internal, "gather_rows: out of range");
    out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  }
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  return a.graph().record(std::move(out), {a}, [a, idx](Graph& g, const Matrix& og) {
    if (!g.requires_grad(a)) return;
    Matrix acc = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) acc.row(idx[i]) += og.row(static_cast<Eigen::Index>(i));
    g.accumulate(a, acc);
  });
}

Var repeat_cols(Var a, int k) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols() * k);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (int r = 0; r < k; ++r) out.col(c * k + r) = x.col(c);
  }
  return a.graph().record(std::move(out), {a}, [a, k](Graph& g, const Matrix& og) {
    Matrix acc = Matrix::Zero(a.rows(), a.cols());
    for (Eigen::Index c = 0; c < acc.cols(); ++c) {
      for (int r = 0; r < k; ++r) acc.col(c) += og.col(c * k + r);
    }
    g.accumulate(a, acc);
  });
}

Var group_norm(Var a, int gsize) {
  const Matrix& x = a.value();
  require(gsize > 0 && x.cols() % gsize == 0, ErrorKind::Internal,
          "group_norm: width not divisible by group size");
  const Eigen::Index groups = x.cols() / gsize;
  Matrix out(x.rows(), groups);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index k = 0; k < groups; ++k) out(r, k) = x.row(r).segment(k * gsize, gsize).norm();
  }
  Matrix norms = out;
  return a.graph().record(std::move(out), {a}, [a, gsize, norms](Graph& g, const Matrix& og) {
    const Matrix& x = a.value();
    Matrix acc = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index k = 0; k < norms.cols(); ++k) {
        const double n = norms(r, k);
        if (n > 0.0) {
          acc.row(r).segment(k * gsize, gsize) = (og(r, k) / n) * x.row(r).segment(k * gsize, gsize);
        }
      }
    }
    g.accumulate(a, acc);
  });
}

Var group_normalize(Var a, int gsize) {
  const Matrix& x = a.value();
  require(gsize > 0 && x.cols() % gsize == 0, ErrorKind::Internal,
          "group_normalize: width not divisible by group size");
  const Eigen::Index groups = x.cols() / gsize;
  Matrix out(x.rows(), x.cols());
  Matrix norms(x.rows(), groups);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index k = 0; k < groups; ++k) {
      const double n = x.row(r).segment(k * gsize, gsize).norm();
      require(n > 0.0, ErrorKind::Validation, "cannot normalise a zero vector");
      norms(r, k) = n;
      out.row(r).segment(k * gsize, gsize) = x.row(r).segment(k * gsize, gsize) / n;
    }
  }
  Matrix unit = out;
  return a.graph().record(std::move(out), {a},
                          [a, gsize, norms, unit](Graph& g, const Matrix& og) {
                            Matrix acc(unit.rows(), unit.cols());
                            for (Eigen::Index r = 0; r < unit.rows(); ++r) {
                              for (Eigen::Index k = 0; k < norms.cols(); ++k) {
                                const auto y = unit.row(r).segment(k * gsize, gsize);
                                const auto gy = og.row(r).segment(k * gsize, gsize);
                                acc.row(r).segment(k * gsize, gsize) =
                                    (gy - y * y.dot(gy)) / norms(r, k);
                              }
                            }
                            g.accumulate(a, acc);
                          });
}

Var segment_softmax(Var a, int segment) {
  const Matrix& x = a.value();
  require(segment > 0 && x.rows() % segment == 0, ErrorKind::Internal,
          "segment_softmax: rows not divisible by segment");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index s = 0; s < x.rows(); s += segment) {
    const auto block = x.middleRows(s, segment);
    const Eigen::RowVectorXd mx = block.colwise().maxCoeff();
    Matrix e = (block.rowwise() - mx).array().exp().matrix();
    const Eigen::RowVectorXd denom = e.colwise().sum();
    out.middleRows(s, segment) = e.array().rowwise() / denom.array();
  }
  Matrix w = out;
  return a.graph().record(std::move(out), {a}, [a, segment, w](Graph& g, const Matrix& og) {
    Matrix acc(w.rows(), w.cols());
    for (Eigen::Index s = 0; s < w.rows(); s += segment) {
      const auto ws = w.middleRows(s, segment);
      const auto gs = og.middleRows(s, segment);
      const Eigen::RowVectorXd dot = ws.cwiseProduct(gs).colwise().sum();
      acc.middleRows(s, segment) = ws.cwiseProduct(gs.rowwise() - dot);
    }
    g.accumulate(a, acc);
  });
}

Var segment_sum(Var a, int segment) {
  const Matrix& x = a.value();
  require(segment > 0 && x.rows() % segment == 0, ErrorKind::Internal,
          "segment_sum: rows not divisible by segment");
  Matrix out(x.rows() / segment, x.cols());
  for (Eigen::Index s = 0; s < out.rows(); ++s) {
    out.row(s) = x.middleRows(s * segment, segment).colwise().sum();
  }
  return a.graph().record(std::move(out), {a}, [a, segment](Graph& g, const Matrix& og) {
    Matrix acc(a.rows(), a.cols());
    for (Eigen::Index s = 0; s < og.rows(); ++s) {
      acc.middleRows(s * segment, segment).rowwise() = og.row(s);
    }
    g.accumulate(a, acc);
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph().record(std::move(out), {a}, [a](Graph& g, const Matrix& og) {
    g.accumulate(a, Matrix::Constant(a.rows(), a.cols(), og(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  require(n > 0, ErrorKind::Internal, "mean of an empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var project_pinhole(Var points, const Matrix& intrinsics) {
  const Matrix& x = points.value();
  require(x.cols() % 3 == 0, ErrorKind::Internal, "project_pinhole: width must be 3J");
  require(intrinsics.rows() == x.rows() && intrinsics.cols() == 4, ErrorKind::Internal,
          "project_pinhole: need one (fx, fy, u0, v0) row per sample");
  const Eigen::Index joints = x.cols() / 3;
  Matrix out(x.rows(), 2 * joints);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index j = 0; j < joints; ++j) {
      const double z = x(r, 3 * j + 2);
      require(z > 0.0, ErrorKind::BehindCamera, "estimated joint is behind the camera (Z <= 0)");
      out(r, 2 * j) = intrinsics(r, 0) * x(r, 3 * j) / z + intrinsics(r, 2);
      out(r, 2 * j + 1) = intrinsics(r, 1) * x(r, 3 * j + 1) / z + intrinsics(r, 3);
    }
  }
  return points.graph().record(
      std::move(out), {points}, [points, intrinsics](Graph& g, const Matrix& og) {
        const Matrix& x = points.value();
        Matrix acc(x.rows(), x.cols());
        const Eigen::Index joints = x.cols() / 3;
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
          for (Eigen::Index j = 0; j < joints; ++j) {
            const double X = x(r, 3 * j), Y = x(r, 3 * j + 1), z = x(r, 3 * j + 2);
            const double gu = og(r, 2 * j) * intrinsics(r, 0);
            const double gv = og(r, 2 * j + 1) * intrinsics(r, 1);
            acc(r, 3 * j) = gu / z;
            acc(r, 3 * j + 1) = gv / z;
            acc(r, 3 * j + 2) = -(gu * X + gv * Y) / (z * z);
          }
        }
        g.accumulate(points, acc);
      });
}

}  // namespace vbones::ad
