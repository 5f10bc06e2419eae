#include "vbones/metrics.hpp"

#include "vbones/data.hpp"
#include "vbones/error.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace vbones {

namespace {

void check_pair(const Sequence3& pred, const Sequence3& gt) {
  require(!gt.empty(), ErrorKind::Validation, "metrics need at least one frame");
  require(pred.size() == gt.size(), ErrorKind::Validation, "prediction and target frame counts differ");
  for (std::size_t t = 0; t < gt.size(); ++t) {
    require(pred[t].rows() == gt[t].rows() && gt[t].rows() > 0, ErrorKind::Validation,
            "prediction and target joint counts differ");
  }
}

double frame_error(const Pose3& a, const Pose3& b) { return (a - b).rowwise().norm().mean(); }

}  // namespace

double mpjpe(const Sequence3& pred, const Sequence3& gt) {
  check_pair(pred, gt);
  double acc = 0.0;
  for (std::size_t t = 0; t < gt.size(); ++t) acc += frame_error(pred[t], gt[t]);
  return acc / static_cast<double>(gt.size());
}

Pose3 procrustes_align(const Pose3& pred, const Pose3& gt, bool* degenerate) {
  const Eigen::RowVector3d mu_p = pred.colwise().mean();
  const Eigen::RowVector3d mu_g = gt.colwise().mean();
  const Pose3 x = pred.rowwise() - mu_p;
  const Pose3 y = gt.rowwise() - mu_g;
  const double var_x = x.squaredNorm();
  if (degenerate) *degenerate = false;
  if (var_x <= 1e-24) {
    if (degenerate) *degenerate = true;
    return x.rowwise() + mu_g;
  }
  const Eigen::Matrix3d h = x.transpose() * y;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d d(1.0, 1.0, 1.0);
  const Eigen::Matrix3d vu = svd.matrixV() * svd.matrixU().transpose();
  if (vu.determinant() < 0.0) d(2) = -1.0;
  // Row-vector convention: aligned = s * x * R^T with R = V D U^T.
  const Eigen::Matrix3d r = svd.matrixV() * d.asDiagonal() * svd.matrixU().transpose();
  const double s = svd.singularValues().dot(d) / var_x;
  return ((s * x * r.transpose()).rowwise() + mu_g).eval();
}

double p_mpjpe(const Sequence3& pred, const Sequence3& gt, int* degenerate_frames) {
  check_pair(pred, gt);
  double acc = 0.0;
  int flagged = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    bool deg = false;
    acc += frame_error(procrustes_align(pred[t], gt[t], &deg), gt[t]);
    flagged += deg ? 1 : 0;
  }
  if (degenerate_frames) *degenerate_frames = flagged;
  return acc / static_cast<double>(gt.size());
}

double n_mpjpe(const Sequence3& pred, const Sequence3& gt, int* degenerate_frames) {
  check_pair(pred, gt);
  double acc = 0.0;
  int flagged = 0;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    const double pp = pred[t].squaredNorm();
    double s = 1.0;
    if (pp > 0.0) {
      s = pred[t].cwiseProduct(gt[t]).sum() / pp;
    } else {
      ++flagged;
    }
    acc += frame_error(s * pred[t], gt[t]);
  }
  if (degenerate_frames) *degenerate_frames = flagged;
  return acc / static_cast<double>(gt.size());
}

double mpjve(const Sequence3& pred, const Sequence3& gt) {
  check_pair(pred, gt);
  require(gt.size() >= 2, ErrorKind::Validation, "mpjve needs at least two frames");
  double acc = 0.0;
  for (std::size_t t = 0; t + 1 < gt.size(); ++t) {
    acc += frame_error(pred[t + 1] - pred[t], gt[t + 1] - gt[t]);
  }
  return acc / static_cast<double>(gt.size() - 1);
}

void EvalReport::add_sequence(const std::string& action, const Sequence3& pred, const Sequence3& gt) {
  const auto n = static_cast<double>(gt.size());
  Sums& s = sums_[action];
  int deg_p = 0, deg_n = 0;
  s.p1 += n * mpjpe(pred, gt);
  s.p2 += n * p_mpjpe(pred, gt, &deg_p);
  s.p3 += n * n_mpjpe(pred, gt, &deg_n);
  s.frames += static_cast<long>(gt.size());
  if (gt.size() >= 2) {
    s.vel += (n - 1.0) * mpjve(pred, gt);
    s.velocity_frames += static_cast<long>(gt.size()) - 1;
  }
  degenerate_ += deg_p + deg_n;
  actions_[action] = finish(s);
}

ProtocolValues EvalReport::finish(const Sums& s) {
  ProtocolValues v;
  v.frames = s.frames;
  v.velocity_frames = s.velocity_frames;
  if (s.frames > 0) {
    v.mpjpe = s.p1 / static_cast<double>(s.frames);
    v.p_mpjpe = s.p2 / static_cast<double>(s.frames);
    v.n_mpjpe = s.p3 / static_cast<double>(s.frames);
  }
  if (s.velocity_frames > 0) v.mpjve = s.vel / static_cast<double>(s.velocity_frames);
  return v;
}

ProtocolValues EvalReport::aggregate() const {
  Sums total;
  for (const auto& [name, s] : sums_) {
    total.p1 += s.p1;
    total.p2 += s.p2;
    total.p3 += s.p3;
    total.vel += s.vel;
    total.frames += s.frames;
    total.velocity_frames += s.velocity_frames;
  }
  return finish(total);
}

namespace {

nlohmann::json values_json(const ProtocolValues& v) {
  return {{"protocol1_mpjpe", v.mpjpe}, {"protocol2_p_mpjpe", v.p_mpjpe},
          {"protocol3_n_mpjpe", v.n_mpjpe}, {"mpjve", v.mpjve},
          {"frames", v.frames}, {"velocity_frames", v.velocity_frames}};
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json actions = nlohmann::json::object();
  for (const auto& [name, v] : actions_) actions[name] = values_json(v);
  return {{"actions", actions}, {"average", values_json(aggregate())},
          {"degenerate_frames", degenerate_}};
}

std::string EvalReport::to_table() const {
  // Known actions first in their usual order, anything else afterwards.
  std::vector<std::string> columns;
  for (const auto& a : action_names()) {
    if (actions_.count(a)) columns.push_back(a);
  }
  for (const auto& [name, v] : actions_) {
    if (std::find(columns.begin(), columns.end(), name) == columns.end()) columns.push_back(name);
  }
  std::ostringstream out;
  auto cell = [&](const std::string& text, std::size_t width) {
    out << ' ' << std::string(width > text.size() ? width - text.size() : 0, ' ') << text;
  };
  auto width_of = [](const std::string& s) { return std::max<std::size_t>(s.size(), 7); };
  const std::size_t label = 22;
  out << std::string(label, ' ');
  for (const auto& c : columns) cell(c, width_of(c));
  cell("Avg", 7);
  out << '\n';

  const ProtocolValues avg = aggregate();
  const std::pair<const char*, double ProtocolValues::*> rows[] = {
      {"Protocol #1 (MPJPE)", &ProtocolValues::mpjpe},
      {"Protocol #2 (P-MPJPE)", &ProtocolValues::p_mpjpe},
      {"Protocol #3 (N-MPJPE)", &ProtocolValues::n_mpjpe},
      {"MPJVE", &ProtocolValues::mpjve}};
  char buf[32];
  for (const auto& [name, member] : rows) {
    std::string head = name;
    out << head << std::string(label - head.size(), ' ');
    for (const auto& c : columns) {
      std::snprintf(buf, sizeof buf, "%.1f", actions_.at(c).*member);
      cell(buf, width_of(c));
    }
    std::snprintf(buf, sizeof buf, "%.1f", avg.*member);
    cell(buf, 7);
    out << '\n';
  }
  return out.str();
}

}  // namespace vbones
