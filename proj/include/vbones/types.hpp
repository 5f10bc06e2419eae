#pragma once

#include <Eigen/Core>

#include <vector>

namespace vbones {

// One row per joint.
using Pose3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Pose2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

// Time-indexed joint arrays, [T][J x 3] and [T][J x 2].
using Sequence3 = std::vector<Pose3>;
using Sequence2 = std::vector<Pose2>;

// One row per bone.
using BoneVectors = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

}  // namespace vbones
