#pragma once

#include "vbones/autodiff.hpp"
#include "vbones/geometry.hpp"
#include "vbones/skeleton.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <string_view>
#include <vector>

namespace vbones {

struct LossWeights {
  double w_L = 1.0;
  double w_att = 0.05;
  double w_d = 0.02;
  double w_js = 0.1;
  double w_pd = 1.0;
  double w_pl = 1.0;
  double w_fc = 1.0;

  void validate() const;
};

nlohmann::json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const nlohmann::json& doc);

// Unweighted loss values, one per objective term.
struct LossComponents {
  double length = 0.0;
  double attention = 0.0;
  double direction = 0.0;
  double joint_shift = 0.0;
  double proj_dir = 0.0;
  double proj_len = 0.0;
  double fc = 0.0;
};

inline constexpr std::array<std::string_view, 7> kLossNames = {
    "length", "attention", "direction", "joint_shift", "proj_dir", "proj_len", "fc"};

std::array<double, 7> as_array(const LossComponents& c);
std::array<double, 7> as_array(const LossWeights& w);

struct LossBreakdown {
  double total = 0.0;
  LossComponents weighted;
};

// Weighted sum; throws TrainingDivergence on a non-finite component.
LossBreakdown total_loss(const LossComponents& components, const LossWeights& weights);

// Mean over frame pairs and joints of |proj displacement - observed displacement|.
double projection_consistency_loss(const Sequence3& est3d, const Sequence2& gt2d,
                                   const CameraIntrinsics& camera);
double length_loss(const Pose3& est, const Pose3& gt);
double attention_loss(const Eigen::VectorXd& est_lengths, const Eigen::VectorXd& gt_lengths);
double direction_loss(const BoneVectors& est_dirs, const BoneVectors& gt_dirs);
double joint_shift_loss(const Pose3& est, const Pose3& gt, const SkeletonTopology& topology);
double fc_loss(const Pose3& est, const Pose3& gt);

// Unordered joint pairs not connected by a real bone.
std::vector<JointPair> joint_shift_pairs(const SkeletonTopology& topology);

// Flattens a [J x 3] pose into a 1 x 3J row (x0, y0, z0, x1, ...).
ad::Matrix flatten(const Pose3& pose);
ad::Matrix flatten(const Pose2& pose);

// Batched differentiable forms. Rows are samples; every loss is averaged over
// the batch rows.
namespace losses {

// Mean over rows and joints of the per-joint Euclidean error. [N, 3J].
ad::Var mean_joint_error(ad::Var est, const ad::Matrix& gt);
// Mean over rows of the norm of the whole row residual.
ad::Var mean_row_norm(ad::Var est, const ad::Matrix& gt);
// Mean over rows of the summed relative-offset error over `pairs`.
ad::Var joint_shift(ad::Var est, const ad::Matrix& gt, const std::vector<JointPair>& pairs);
// Mean over pairs and joints. `first`/`second` are [P, 3J] camera-frame
// estimates of consecutive frames; observed 2D are [P, 2J]; intrinsics [P, 4].
ad::Var projection_consistency(ad::Var first, ad::Var second, const ad::Matrix& observed_first,
                               const ad::Matrix& observed_second, const ad::Matrix& intrinsics);

}  // namespace losses

}  // namespace vbones
