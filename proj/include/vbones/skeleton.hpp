#pragma once

#include "vbones/types.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vbones {

// Canonical joint indices of the built-in 17-joint skeleton.
namespace joint {
inline constexpr int kPelvis = 0;
inline constexpr int kRightHip = 1;
inline constexpr int kRightKnee = 2;
inline constexpr int kRightAnkle = 3;
inline constexpr int kLeftHip = 4;
inline constexpr int kLeftKnee = 5;
inline constexpr int kLeftAnkle = 6;
inline constexpr int kSpine = 7;
inline constexpr int kThorax = 8;
inline constexpr int kNeck = 9;
inline constexpr int kHead = 10;
inline constexpr int kLeftShoulder = 11;
inline constexpr int kLeftElbow = 12;
inline constexpr int kLeftWrist = 13;
inline constexpr int kRightShoulder = 14;
inline constexpr int kRightElbow = 15;
inline constexpr int kRightWrist = 16;
inline constexpr int kCount = 17;
}  // namespace joint

// A directed edge. The bone vector is position(child) - position(parent).
struct Bone {
  int child = 0;
  int parent = 0;

  friend bool operator==(const Bone&, const Bone&) = default;
};

class SkeletonTopology {
 public:
  // Validates that `parents` describes a single tree. The root is the unique
  // joint whose parent is -1.
  SkeletonTopology(std::vector<std::string> joint_names, std::vector<int> parents);

  std::size_t num_joints() const noexcept { return names_.size(); }
  std::size_t num_real_bones() const noexcept { return real_bones_.size(); }
  int root() const noexcept { return root_; }

  const std::vector<std::string>& joint_names() const noexcept { return names_; }
  const std::vector<int>& parents() const noexcept { return parents_; }
  // Ordered by child joint index; real bone i ends at joint i + 1 for the
  // built-in topology.
  const std::vector<Bone>& real_bones() const noexcept { return real_bones_; }

  int parent(int joint_index) const { return parents_.at(joint_index); }
  std::vector<int> children(int joint_index) const;
  // Number of real bones between the root and `joint_index`.
  int depth(int joint_index) const;
  bool adjacent(int a, int b) const;
  // Joints without children, ascending.
  std::vector<int> end_joints() const;
  std::optional<int> find_joint(std::string_view name) const;
  int joint_index(std::string_view name) const;

  friend bool operator==(const SkeletonTopology&, const SkeletonTopology&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<int> parents_;
  int root_ = -1;
  std::vector<Bone> real_bones_;
};

SkeletonTopology default_topology();

using JointPair = std::pair<int, int>;

inline constexpr std::array<std::string_view, 5> kVirtualConfigNames = {"VB0", "VB5", "VB10",
                                                                        "VB13", "VB23"};

struct VirtualBoneConfig {
  std::string name;
  // Stored with first < second, sorted ascending.
  std::vector<JointPair> pairs;

  friend bool operator==(const VirtualBoneConfig&, const VirtualBoneConfig&) = default;
};

// VB5: root to every end joint. VB10: all end-joint pairs. VB13: root to every
// joint not connected to it by a real bone. VB23: VB10 and VB13 combined.
VirtualBoneConfig make_virtual_config(std::string_view name, const SkeletonTopology& topology);

// Checks the virtual-pair invariants against a topology; throws on violation.
void validate_virtual_config(const VirtualBoneConfig& config, const SkeletonTopology& topology);

class BoneSet {
 public:
  BoneSet(SkeletonTopology topology, VirtualBoneConfig virtual_config);

  const SkeletonTopology& topology() const noexcept { return topology_; }
  const VirtualBoneConfig& virtual_config() const noexcept { return virtual_; }
  // Real bones first, then one bone per virtual pair oriented first -> second.
  const std::vector<Bone>& bones() const noexcept { return bones_; }

  std::size_t size() const noexcept { return bones_.size(); }
  std::size_t num_real() const noexcept { return topology_.num_real_bones(); }
  std::size_t num_virtual() const noexcept { return virtual_.pairs.size(); }
  std::size_t num_joints() const noexcept { return topology_.num_joints(); }
  bool is_real(std::size_t bone_index) const noexcept { return bone_index < num_real(); }

  // Bone indices touching `joint_index`, ascending.
  const std::vector<int>& incident(int joint_index) const { return incident_.at(joint_index); }

 private:
  SkeletonTopology topology_;
  VirtualBoneConfig virtual_;
  std::vector<Bone> bones_;
  std::vector<std::vector<int>> incident_;
};

BoneSet make_bone_set(std::string_view virtual_name);

struct PathStep {
  int bone = 0;
  // +1 when walked parent -> child, -1 when walked against the bone.
  int sign = 1;

  friend bool operator==(const PathStep&, const PathStep&) = default;
  friend auto operator<=>(const PathStep&, const PathStep&) = default;
};

using BonePath = std::vector<PathStep>;

struct PathSet {
  int target_joint = 0;
  std::vector<BonePath> paths;
};

// All simple paths from the root to `target` using at most `max_edges` bones,
// ordered lexicographically by bone index sequence.
PathSet enumerate_paths(const BoneSet& bone_set, int target, int max_edges);

// Joint sequence visited by a path, starting at the root.
std::vector<int> path_joints(const BoneSet& bone_set, const BonePath& path);

Eigen::VectorXd bone_lengths_from_joints(const Pose3& joints3d, const BoneSet& bone_set);

// JSON document with keys `joints`, `parents`, `virtual_bones`.
nlohmann::json to_json(const BoneSet& bone_set);
BoneSet bone_set_from_json(const nlohmann::json& doc);
std::string dump_canonical(const nlohmann::json& doc);

}  // namespace vbones
