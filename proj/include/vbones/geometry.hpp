#pragma once

#include "vbones/skeleton.hpp"
#include "vbones/types.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>

namespace vbones {

// Pinhole intrinsics in pixels: fx = f/dx, fy = f/dy, principal point (u0, v0).
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double u0 = 0.0;
  double v0 = 0.0;

  void validate() const;

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

nlohmann::json to_json(const CameraIntrinsics& camera);
CameraIntrinsics camera_from_json(const nlohmann::json& doc);

struct PoseSequence {
  std::optional<Sequence2> joints2d;  // pixels
  std::optional<Sequence3> joints3d;  // mm, camera frame
  std::optional<CameraIntrinsics> camera;
  double frame_rate = 50.0;

  std::size_t num_frames() const;
  std::size_t num_joints() const;
  void validate() const;
};

// Root-relative position reached by walking `path` with the given bone vectors.
Eigen::Vector3d compose_joint_single_path(const BoneVectors& directions,
                                          const Eigen::VectorXd& lengths, const BonePath& path);

Eigen::Vector3d compose_joint_multi_path(const BoneVectors& directions,
                                         const Eigen::VectorXd& lengths, const PathSet& path_set,
                                         const Eigen::VectorXd& weights);

Eigen::Vector2d project_pinhole(const Eigen::Vector3d& point, const CameraIntrinsics& camera);
Pose2 project_pose(const Pose3& joints, const CameraIntrinsics& camera);
Sequence2 project_sequence(const Sequence3& joints, const CameraIntrinsics& camera);

// out[t] = seq[t + 1] - seq[t].
Sequence2 displacements(const Sequence2& seq2d);

// Unit vector child - parent for every bone; throws DegenerateBoneError on a
// zero-length bone.
BoneVectors bone_directions_from_joints(const Pose3& joints3d, const BoneSet& bone_set);

// Subtracts the root joint from every joint.
Pose3 root_relative(const Pose3& joints, int root);

void save_pose_sequence(const std::filesystem::path& path, const PoseSequence& seq,
                        const nlohmann::json& extra_meta = nlohmann::json::object());
PoseSequence load_pose_sequence(const std::filesystem::path& path,
                                nlohmann::json* meta_out = nullptr);

}  // namespace vbones
