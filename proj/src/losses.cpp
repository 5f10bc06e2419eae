#include "vbones/losses.hpp"

#include "vbones/error.hpp"

#include <cmath>
#include <functional>
#include <string>

namespace vbones {

void LossWeights::validate() const {
  for (double w : as_array(*this)) {
    require(std::isfinite(w) && w >= 0.0, ErrorKind::Configuration,
            "loss weights must be finite and non-negative");
  }
}

nlohmann::json to_json(const LossWeights& w) {
  return {{"w_L", w.w_L},   {"w_att", w.w_att}, {"w_d", w.w_d}, {"w_js", w.w_js},
          {"w_pd", w.w_pd}, {"w_pl", w.w_pl},   {"w_fc", w.w_fc}};
}

LossWeights loss_weights_from_json(const nlohmann::json& doc) {
  LossWeights w;
  w.w_L = doc.value("w_L", w.w_L);
  w.w_att = doc.value("w_att", w.w_att);
  w.w_d = doc.value("w_d", w.w_d);
  w.w_js = doc.value("w_js", w.w_js);
  w.w_pd = doc.value("w_pd", w.w_pd);
  w.w_pl = doc.value("w_pl", w.w_pl);
  w.w_fc = doc.value("w_fc", w.w_fc);
  w.validate();
  return w;
}

std::array<double, 7> as_array(const LossComponents& c) {
  return {c.length, c.attention, c.direction, c.joint_shift, c.proj_dir, c.proj_len, c.fc};
}

std::array<double, 7> as_array(const LossWeights& w) {
  return {w.w_L, w.w_att, w.w_d, w.w_js, w.w_pd, w.w_pl, w.w_fc};
}

LossBreakdown total_loss(const LossComponents& components, const LossWeights& weights) {
  const auto c = as_array(components);
  for (std::size_t i = 0; i < c.size(); ++i) {
    require(std::isfinite(c[i]), ErrorKind::TrainingDivergence,
            "loss component " + std::string(kLossNames[i]) + " is not finite");
  }
  LossBreakdown out;
  out.weighted = {weights.w_L * components.length,      weights.w_att * components.attention,
                  weights.w_d * components.direction,   weights.w_js * components.joint_shift,
                  weights.w_pd * components.proj_dir,   weights.w_pl * components.proj_len,
                  weights.w_fc * components.fc};
  for (double v : as_array(out.weighted)) out.total += v;
  return out;
}

std::vector<JointPair> joint_shift_pairs(const SkeletonTopology& topology) {
  std::vector<JointPair> pairs;
  const int n = static_cast<int>(topology.num_joints());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (!topology.adjacent(i, j)) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

ad::Matrix flatten(const Pose3& pose) {
  return Eigen::Map<const Eigen::RowVectorXd>(pose.data(), pose.size());
}

ad::Matrix flatten(const Pose2& pose) {
  return Eigen::Map<const Eigen::RowVectorXd>(pose.data(), pose.size());
}

namespace losses {

namespace {

void check_shape(ad::Var est, const ad::Matrix& gt, const char* what) {
  require(est.rows() == gt.rows() && est.cols() == gt.cols(), ErrorKind::Validation,
          std::string(what) + ": estimate and target shapes differ");
}

}  // namespace

ad::Var mean_joint_error(ad::Var est, const ad::Matrix& gt) {
  check_shape(est, gt, "joint error");
  ad::Graph& g = est.graph();
  return ad::mean(ad::group_norm(ad::sub(est, g.constant(gt)), 3));
}

ad::Var mean_row_norm(ad::Var est, const ad::Matrix& gt) {
  check_shape(est, gt, "row norm");
  ad::Graph& g = est.graph();
  return ad::mean(ad::group_norm(ad::sub(est, g.constant(gt)), static_cast<int>(gt.cols())));
}

ad::Var joint_shift(ad::Var est, const ad::Matrix& gt, const std::vector<JointPair>& pairs) {
  check_shape(est, gt, "joint shift");
  ad::Graph& g = est.graph();
  // Column block k of est * M is P_i - P_j for pair k.
  ad::Matrix m = ad::Matrix::Zero(est.cols(), 3 * static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    for (int d = 0; d < 3; ++d) {
      m(3 * pairs[k].first + d, 3 * static_cast<Eigen::Index>(k) + d) = 1.0;
      m(3 * pairs[k].second + d, 3 * static_cast<Eigen::Index>(k) + d) = -1.0;
    }
  }
  const ad::Var residual = ad::matmul(ad::sub(est, g.constant(gt)), g.constant(std::move(m)));
  return ad::scale(ad::sum(ad::group_norm(residual, 3)), 1.0 / static_cast<double>(gt.rows()));
}

ad::Var projection_consistency(ad::Var first, ad::Var second, const ad::Matrix& observed_first,
                               const ad::Matrix& observed_second, const ad::Matrix& intrinsics) {
  ad::Graph& g = first.graph();
  require(first.rows() == second.rows() && first.cols() == second.cols(), ErrorKind::Validation,
          "projection consistency: frame pair shapes differ");
  require(observed_first.rows() == first.rows() && observed_second.rows() == first.rows() &&
              observed_first.cols() * 3 == first.cols() * 2 &&
              observed_second.cols() == observed_first.cols(),
          ErrorKind::Validation, "projection consistency: observed 2D shape mismatch");
  if (first.rows() == 0) return g.constant(ad::Matrix::Zero(1, 1));
  const ad::Var moved = ad::sub(ad::project_pinhole(second, intrinsics),
                                ad::project_pinhole(first, intrinsics));
  const ad::Var residual = ad::sub(moved, g.constant(observed_second - observed_first));
  return ad::mean(ad::group_norm(residual, 2));
}

}  // namespace losses

namespace {

void same_pose_shape(const Pose3& est, const Pose3& gt) {
  require(est.rows() == gt.rows(), ErrorKind::Validation, "estimate and target joint counts differ");
}

double evaluate(const std::function<ad::Var(ad::Graph&)>& build) {
  ad::Graph g;
  return build(g).scalar();
}

}  // namespace

double projection_consistency_loss(const Sequence3& est3d, const Sequence2& gt2d,
                                   const CameraIntrinsics& camera) {
  camera.validate();
  require(est3d.size() >= 2, ErrorKind::Validation, "projection consistency needs T >= 2");
  require(est3d.size() == gt2d.size(), ErrorKind::Validation, "estimate and 2D frame counts differ");
  const auto t = static_cast<Eigen::Index>(est3d.size());
  const auto j = est3d.front().rows();
  ad::Matrix est(t, 3 * j), obs(t, 2 * j);
  for (Eigen::Index i = 0; i < t; ++i) {
    require(est3d[i].rows() == j && gt2d[i].rows() == j, ErrorKind::Validation,
            "joint count differs between frames");
    est.row(i) = flatten(est3d[i]);
    obs.row(i) = flatten(gt2d[i]);
  }
  ad::Matrix intr(t - 1, 4);
  intr.rowwise() = Eigen::RowVector4d(camera.fx, camera.fy, camera.u0, camera.v0);
  return evaluate([&](ad::Graph& g) {
    const ad::Var e = g.constant(est);
    return losses::projection_consistency(ad::slice_rows(e, 0, t - 1), ad::slice_rows(e, 1, t - 1),
                                          obs.topRows(t - 1), obs.bottomRows(t - 1), intr);
  });
}

double length_loss(const Pose3& est, const Pose3& gt) {
  same_pose_shape(est, gt);
  return evaluate([&](ad::Graph& g) {
    return losses::mean_joint_error(g.constant(flatten(est)), flatten(gt));
  });
}

double fc_loss(const Pose3& est, const Pose3& gt) { return length_loss(est, gt); }

double attention_loss(const Eigen::VectorXd& est_lengths, const Eigen::VectorXd& gt_lengths) {
  require(est_lengths.size() == gt_lengths.size(), ErrorKind::Validation,
          "attention loss: length vectors differ in size");
  return (est_lengths - gt_lengths).norm();
}

double direction_loss(const BoneVectors& est_dirs, const BoneVectors& gt_dirs) {
  require(est_dirs.rows() == gt_dirs.rows(), ErrorKind::Validation,
          "direction loss: bone counts differ");
  for (Eigen::Index i = 0; i < gt_dirs.rows(); ++i) {
    require(std::abs(gt_dirs.row(i).norm() - 1.0) <= 1e-6, ErrorKind::Validation,
            "direction loss: target directions must be unit vectors");
  }
  return (est_dirs - gt_dirs).norm();
}

double joint_shift_loss(const Pose3& est, const Pose3& gt, const SkeletonTopology& topology) {
  same_pose_shape(est, gt);
  require(est.rows() == static_cast<Eigen::Index>(topology.num_joints()), ErrorKind::Validation,
          "joint shift loss: joint count does not match the skeleton");
  const auto pairs = joint_shift_pairs(topology);
  return evaluate([&](ad::Graph& g) {
    return losses::joint_shift(g.constant(flatten(est)), flatten(gt), pairs);
  });
}

}  // namespace vbones
