#include "vbones/skeleton.hpp"

#include "vbones/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace vbones {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::BehindCamera: return "behind_camera";
    case ErrorKind::DegenerateBone: return "degenerate_bone";
    case ErrorKind::IncompatibleCheckpoint: return "incompatible_checkpoint";
    case ErrorKind::Ingestion: return "ingestion";
    case ErrorKind::TrainingDivergence: return "training_divergence";
    case ErrorKind::CheckFailure: return "check_failure";
    case ErrorKind::Io: return "io";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

SkeletonTopology::SkeletonTopology(std::vector<std::string> joint_names, std::vector<int> parents)
    : names_(std::move(joint_names)), parents_(std::move(parents)) {
  const int n = static_cast<int>(names_.size());
  require(n >= 1, ErrorKind::Validation, "topology needs at least one joint");
  require(static_cast<int>(parents_.size()) == n, ErrorKind::Validation,
          "joints and parents differ in length");
  std::set<std::string> seen;
  for (const auto& name : names_) {
    require(seen.insert(name).second, ErrorKind::Validation, "duplicate joint name: " + name);
  }
  for (int j = 0; j < n; ++j) {
    const int p = parents_[j];
    if (p == -1) {
      require(root_ == -1, ErrorKind::Validation, "topology has more than one root");
      root_ = j;
      continue;
    }
    require(p >= 0 && p < n, ErrorKind::Validation, "parent index out of range");
    require(p != j, ErrorKind::Validation, "joint is its own parent: " + names_[j]);
  }
  require(root_ != -1, ErrorKind::Validation, "topology has no root");

  // Every joint must reach the root within n steps, otherwise there is a cycle.
  for (int j = 0; j < n; ++j) {
    int cur = j;
    int steps = 0;
    while (cur != root_) {
      cur = parents_[cur];
      require(++steps <= n, ErrorKind::Validation, "parent relation has a cycle");
    }
  }
  for (int j = 0; j < n; ++j) {
    if (j != root_) real_bones_.push_back({j, parents_[j]});
  }
}

std::vector<int> SkeletonTopology::children(int joint_index) const {
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(parents_.size()); ++j) {
    if (parents_[j] == joint_index) out.push_back(j);
  }
  return out;
}

int SkeletonTopology::depth(int joint_index) const {
  int d = 0;
  for (int cur = joint_index; cur != root_; cur = parents_.at(cur)) ++d;
  return d;
}

bool SkeletonTopology::adjacent(int a, int b) const {
  return (a != root_ && parents_.at(a) == b) || (b != root_ && parents_.at(b) == a);
}

std::vector<int> SkeletonTopology::end_joints() const {
  std::vector<int> out;
  for (int j = 0; j < static_cast<int>(names_.size()); ++j) {
    if (j != root_ && children(j).empty()) out.push_back(j);
  }
  return out;
}

std::optional<int> SkeletonTopology::find_joint(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

int SkeletonTopology::joint_index(std::string_view name) const {
  const auto idx = find_joint(name);
  require(idx.has_value(), ErrorKind::Validation, "unknown joint: " + std::string(name));
  return *idx;
}

SkeletonTopology default_topology() {
  return SkeletonTopology(
      {"pelvis", "right_hip", "right_knee", "right_ankle", "left_hip", "left_knee", "left_ankle",
       "spine", "thorax", "neck", "head", "left_shoulder", "left_elbow", "left_wrist",
       "right_shoulder", "right_elbow", "right_wrist"},
      {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15});
}

namespace {

JointPair ordered(int a, int b) { return a < b ? JointPair{a, b} : JointPair{b, a}; }

std::vector<JointPair> sorted_unique(std::vector<JointPair> pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

}  // namespace

VirtualBoneConfig make_virtual_config(std::string_view name, const SkeletonTopology& topology) {
  const int root = topology.root();
  const auto ends = topology.end_joints();

  std::vector<JointPair> root_to_ends;
  for (int e : ends) {
    if (!topology.adjacent(root, e)) root_to_ends.push_back(ordered(root, e));
  }
  std::vector<JointPair> among_ends;
  for (std::size_t i = 0; i < ends.size(); ++i) {
    for (std::size_t k = i + 1; k < ends.size(); ++k) {
      if (!topology.adjacent(ends[i], ends[k])) among_ends.push_back(ordered(ends[i], ends[k]));
    }
  }
  std::vector<JointPair> root_to_all;
  for (int j = 0; j < static_cast<int>(topology.num_joints()); ++j) {
    if (j != root && !topology.adjacent(root, j)) root_to_all.push_back(ordered(root, j));
  }

  VirtualBoneConfig config{std::string(name), {}};
  if (name == "VB0") {
  } else if (name == "VB5") {
    config.pairs = root_to_ends;
  } else if (name == "VB10") {
    config.pairs = among_ends;
  } else if (name == "VB13") {
    config.pairs = root_to_all;
  } else if (name == "VB23") {
    config.pairs = among_ends;
    config.pairs.insert(config.pairs.end(), root_to_all.begin(), root_to_all.end());
  } else {
    fail(ErrorKind::Configuration, "unknown virtual bone configuration: " + std::string(name));
  }
  config.pairs = sorted_unique(std::move(config.pairs));
  return config;
}

void validate_virtual_config(const VirtualBoneConfig& config, const SkeletonTopology& topology) {
  const int n = static_cast<int>(topology.num_joints());
  std::set<JointPair> seen;
  for (const auto& [a, b] : config.pairs) {
    require(a >= 0 && a < n && b >= 0 && b < n, ErrorKind::Validation,
            "virtual bone joint index out of range");
    require(a != b, ErrorKind::Validation, "virtual bone is a self-loop");
    require(!topology.adjacent(a, b), ErrorKind::Validation,
            "virtual bone duplicates a real bone: " + topology.joint_names()[a] + "-" +
                topology.joint_names()[b]);
    require(seen.insert(ordered(a, b)).second, ErrorKind::Validation, "duplicate virtual bone");
  }
}

BoneSet::BoneSet(SkeletonTopology topology, VirtualBoneConfig virtual_config)
    : topology_(std::move(topology)), virtual_(std::move(virtual_config)) {
  validate_virtual_config(virtual_, topology_);
  for (auto& p : virtual_.pairs) p = ordered(p.first, p.second);
  std::sort(virtual_.pairs.begin(), virtual_.pairs.end());

  bones_ = topology_.real_bones();
  for (const auto& [a, b] : virtual_.pairs) bones_.push_back({b, a});

  incident_.assign(topology_.num_joints(), {});
  for (int i = 0; i < static_cast<int>(bones_.size()); ++i) {
    incident_[bones_[i].child].push_back(i);
    incident_[bones_[i].parent].push_back(i);
  }
  for (auto& list : incident_) std::sort(list.begin(), list.end());
}

BoneSet make_bone_set(std::string_view virtual_name) {
  auto topology = default_topology();
  auto config = make_virtual_config(virtual_name, topology);
  return BoneSet(std::move(topology), std::move(config));
}

namespace {

struct PathSearch {
  const BoneSet& bones;
  int target;
  int max_edges;
  std::vector<bool> on_path;
  BonePath current;
  std::vector<BonePath> found;

  void visit(int joint) {
    if (joint == target) {
      found.push_back(current);
      return;
    }
    if (static_cast<int>(current.size()) == max_edges) return;
    for (int b : bones.incident(joint)) {
      const Bone& bone = bones.bones()[b];
      const bool forward = bone.parent == joint;
      const int next = forward ? bone.child : bone.parent;
      if (on_path[next]) continue;
      on_path[next] = true;
      current.push_back({b, forward ? 1 : -1});
      visit(next);
      current.pop_back();
      on_path[next] = false;
    }
  }
};

}  // namespace

PathSet enumerate_paths(const BoneSet& bone_set, int target, int max_edges) {
  const auto& topo = bone_set.topology();
  require(target >= 0 && target < static_cast<int>(topo.num_joints()), ErrorKind::Validation,
          "target joint out of range");
  PathSet out{target, {}};
  if (target == topo.root()) {
    out.paths.push_back({});
    return out;
  }
  require(max_edges >= topo.depth(target), ErrorKind::Validation,
          "max_edges is smaller than the target's depth in the real skeleton");

  PathSearch search{bone_set, target, max_edges, std::vector<bool>(topo.num_joints(), false), {}, {}};
  search.on_path[topo.root()] = true;
  search.visit(topo.root());
  require(!search.found.empty(), ErrorKind::Internal, "target joint unreachable from root");
  out.paths = std::move(search.found);
  return out;
}

std::vector<int> path_joints(const BoneSet& bone_set, const BonePath& path) {
  std::vector<int> joints{bone_set.topology().root()};
  for (const auto& step : path) {
    const Bone& bone = bone_set.bones().at(step.bone);
    joints.push_back(step.sign > 0 ? bone.child : bone.parent);
  }
  return joints;
}

Eigen::VectorXd bone_lengths_from_joints(const Pose3& joints3d, const BoneSet& bone_set) {
  require(joints3d.rows() == static_cast<Eigen::Index>(bone_set.num_joints()),
          ErrorKind::Validation, "joint count does not match the skeleton");
  require(joints3d.allFinite(), ErrorKind::Validation, "joint positions must be finite");
  Eigen::VectorXd lengths(bone_set.size());
  for (std::size_t i = 0; i < bone_set.size(); ++i) {
    const Bone& b = bone_set.bones()[i];
    lengths[static_cast<Eigen::Index>(i)] = (joints3d.row(b.child) - joints3d.row(b.parent)).norm();
  }
  return lengths;
}

nlohmann::json to_json(const BoneSet& bone_set) {
  const auto& topo = bone_set.topology();
  nlohmann::json doc;
  doc["joints"] = topo.joint_names();
  doc["parents"] = topo.parents();
  auto virtual_bones = nlohmann::json::array();
  for (const auto& [a, b] : bone_set.virtual_config().pairs) {
    virtual_bones.push_back({topo.joint_names()[a], topo.joint_names()[b]});
  }
  doc["virtual_bones"] = std::move(virtual_bones);
  return doc;
}

BoneSet bone_set_from_json(const nlohmann::json& doc) {
  try {
    SkeletonTopology topo(doc.at("joints").get<std::vector<std::string>>(),
                          doc.at("parents").get<std::vector<int>>());
    VirtualBoneConfig config{"custom", {}};
    for (const auto& pair : doc.at("virtual_bones")) {
      require(pair.is_array() && pair.size() == 2, ErrorKind::Validation,
              "virtual bone entries must be [name_a, name_b]");
      config.pairs.push_back(ordered(topo.joint_index(pair[0].get<std::string>()),
                                     topo.joint_index(pair[1].get<std::string>())));
    }
    validate_virtual_config(config, topo);
    std::sort(config.pairs.begin(), config.pairs.end());
    if (topo == default_topology()) {
      for (auto name : kVirtualConfigNames) {
        if (make_virtual_config(name, topo).pairs == config.pairs) config.name = name;
      }
    }
    return BoneSet(std::move(topo), std::move(config));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Validation, std::string("malformed skeleton document: ") + e.what());
  }
}

std::string dump_canonical(const nlohmann::json& doc) { return doc.dump(2) + "\n"; }

}  // namespace vbones
