#include "vbones/geometry.hpp"

#include "vbones/container.hpp"
#include "vbones/error.hpp"

#include <cmath>
#include <string>

namespace vbones {

void CameraIntrinsics::validate() const {
  require(std::isfinite(fx) && std::isfinite(fy) && std::isfinite(u0) && std::isfinite(v0),
          ErrorKind::Validation, "camera intrinsics must be finite");
  require(fx > 0.0 && fy > 0.0, ErrorKind::Validation, "focal lengths must be positive");
}

nlohmann::json to_json(const CameraIntrinsics& camera) {
  return {{"fx", camera.fx}, {"fy", camera.fy}, {"u0", camera.u0}, {"v0", camera.v0}};
}

CameraIntrinsics camera_from_json(const nlohmann::json& doc) {
  CameraIntrinsics cam;
  try {
    cam.fx = doc.at("fx").get<double>();
    cam.fy = doc.at("fy").get<double>();
    cam.u0 = doc.at("u0").get<double>();
    cam.v0 = doc.at("v0").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Validation, std::string("malformed camera intrinsics: ") + e.what());
  }
  cam.validate();
  return cam;
}

std::size_t PoseSequence::num_frames() const {
  if (joints3d) return joints3d->size();
  if (joints2d) return joints2d->size();
  return 0;
}

std::size_t PoseSequence::num_joints() const {
  if (joints3d && !joints3d->empty()) return static_cast<std::size_t>(joints3d->front().rows());
  if (joints2d && !joints2d->empty()) return static_cast<std::size_t>(joints2d->front().rows());
  return 0;
}

void PoseSequence::validate() const {
  require(joints2d || joints3d, ErrorKind::Validation, "pose sequence holds no joints");
  const std::size_t t = num_frames();
  const std::size_t j = num_joints();
  require(t >= 1, ErrorKind::Validation, "pose sequence needs at least one frame");
  if (joints2d) {
    require(joints2d->size() == t, ErrorKind::Validation, "2D and 3D frame counts differ");
    for (const auto& p : *joints2d) {
      require(static_cast<std::size_t>(p.rows()) == j, ErrorKind::Validation,
              "inconsistent joint count in 2D frames");
    }
  }
  if (joints3d) {
    for (const auto& p : *joints3d) {
      require(static_cast<std::size_t>(p.rows()) == j, ErrorKind::Validation,
              "inconsistent joint count in 3D frames");
    }
  }
  if (camera) camera->validate();
  require(frame_rate > 0.0 && std::isfinite(frame_rate), ErrorKind::Validation,
          "frame rate must be positive");
}

namespace {

Eigen::RowVector3d checked_unit(const BoneVectors& directions, int bone) {
  require(bone >= 0 && bone < directions.rows(), ErrorKind::Validation,
          "path references a bone outside the direction array");
  const double n = directions.row(bone).norm();
  require(std::abs(n - 1.0) <= 1e-6, ErrorKind::Validation,
          "bone direction " + std::to_string(bone) + " is not unit length");
  return directions.row(bone);
}

}  // namespace

Eigen::Vector3d compose_joint_single_path(const BoneVectors& directions,
                                          const Eigen::VectorXd& lengths, const BonePath& path) {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (const auto& step : path) {
    const Eigen::RowVector3d d = checked_unit(directions, step.bone);
    require(step.bone < lengths.size(), ErrorKind::Validation,
            "path references a bone outside the length array");
    const double len = lengths[step.bone];
    require(len >= 0.0, ErrorKind::Validation, "bone lengths must be non-negative");
    p += static_cast<double>(step.sign) * len * d.transpose();
  }
  return p;
}

Eigen::Vector3d compose_joint_multi_path(const BoneVectors& directions,
                                         const Eigen::VectorXd& lengths, const PathSet& path_set,
                                         const Eigen::VectorXd& weights) {
  require(weights.size() == static_cast<Eigen::Index>(path_set.paths.size()),
          ErrorKind::Validation, "one weight per path is required");
  require((weights.array() >= 0.0).all(), ErrorKind::Validation, "path weights must be >= 0");
  require(std::abs(weights.sum() - 1.0) <= 1e-9, ErrorKind::Validation,
          "path weights must sum to 1");
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < path_set.paths.size(); ++i) {
    p += weights[static_cast<Eigen::Index>(i)] *
         compose_joint_single_path(directions, lengths, path_set.paths[i]);
  }
  return p;
}

Eigen::Vector2d project_pinhole(const Eigen::Vector3d& point, const CameraIntrinsics& camera) {
  require(point.z() > 0.0, ErrorKind::BehindCamera, "point is behind the camera (Z <= 0)");
  return {camera.fx * point.x() / point.z() + camera.u0,
          camera.fy * point.y() / point.z() + camera.v0};
}

Pose2 project_pose(const Pose3& joints, const CameraIntrinsics& camera) {
  Pose2 out(joints.rows(), 2);
  for (Eigen::Index j = 0; j < joints.rows(); ++j) {
    out.row(j) = project_pinhole(joints.row(j).transpose(), camera).transpose();
  }
  return out;
}

Sequence2 project_sequence(const Sequence3& joints, const CameraIntrinsics& camera) {
  Sequence2 out;
  out.reserve(joints.size());
  for (const auto& pose : joints) out.push_back(project_pose(pose, camera));
  return out;
}

Sequence2 displacements(const Sequence2& seq2d) {
  require(seq2d.size() >= 2, ErrorKind::Validation, "displacements need at least two frames");
  Sequence2 out;
  out.reserve(seq2d.size() - 1);
  for (std::size_t t = 0; t + 1 < seq2d.size(); ++t) {
    require(seq2d[t + 1].rows() == seq2d[t].rows(), ErrorKind::Validation,
            "joint count changes between frames");
    out.push_back(seq2d[t + 1] - seq2d[t]);
  }
  return out;
}

BoneVectors bone_directions_from_joints(const Pose3& joints3d, const BoneSet& bone_set) {
  require(joints3d.rows() == static_cast<Eigen::Index>(bone_set.num_joints()),
          ErrorKind::Validation, "joint count does not match the skeleton");
  BoneVectors out(bone_set.size(), 3);
  for (std::size_t i = 0; i < bone_set.size(); ++i) {
    const Bone& b = bone_set.bones()[i];
    const Eigen::RowVector3d v = joints3d.row(b.child) - joints3d.row(b.parent);
    const double n = v.norm();
    if (!(n > 0.0)) {
      throw DegenerateBoneError(static_cast<int>(i),
                                "bone " + std::to_string(i) + " has zero length");
    }
    out.row(static_cast<Eigen::Index>(i)) = v / n;
  }
  return out;
}

Pose3 root_relative(const Pose3& joints, int root) {
  Pose3 out = joints;
  const Eigen::RowVector3d r = joints.row(root);
  out.rowwise() -= r;
  return out;
}

namespace {

template <typename Seq>
NamedArray pack(const std::string& name, const Seq& seq, int dims) {
  NamedArray a;
  a.name = name;
  const auto t = static_cast<std::int64_t>(seq.size());
  const auto j = t > 0 ? static_cast<std::int64_t>(seq.front().rows()) : 0;
  a.shape = {t, j, dims};
  a.data.reserve(static_cast<std::size_t>(t * j * dims));
  for (const auto& pose : seq) {
    a.data.insert(a.data.end(), pose.data(), pose.data() + pose.size());
  }
  return a;
}

template <typename Pose>
std::vector<Pose> unpack(const NamedArray& a, int dims) {
  require(a.shape.size() == 3 && a.shape[2] == dims, ErrorKind::Io,
          "array " + a.name + " has the wrong shape");
  std::vector<Pose> out;
  const auto per_frame = static_cast<std::size_t>(a.shape[1] * dims);
  for (std::int64_t t = 0; t < a.shape[0]; ++t) {
    Pose p(a.shape[1], dims);
    std::copy_n(a.data.begin() + static_cast<std::ptrdiff_t>(t * per_frame), per_frame, p.data());
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

void save_pose_sequence(const std::filesystem::path& path, const PoseSequence& seq,
                        const nlohmann::json& extra_meta) {
  seq.validate();
  Container c;
  c.meta = extra_meta;
  c.meta["frame_rate"] = seq.frame_rate;
  if (seq.camera) c.meta["camera"] = to_json(*seq.camera);
  if (seq.joints2d) c.arrays.push_back(pack("joints2d", *seq.joints2d, 2));
  if (seq.joints3d) c.arrays.push_back(pack("joints3d", *seq.joints3d, 3));
  write_container(path, c, kPoseMagic);
}

PoseSequence load_pose_sequence(const std::filesystem::path& path, nlohmann::json* meta_out) {
  const Container c = read_container(path, kPoseMagic);
  PoseSequence seq;
  seq.frame_rate = c.meta.value("frame_rate", 50.0);
  if (c.meta.contains("camera")) seq.camera = camera_from_json(c.meta["camera"]);
  if (const auto* a = c.find("joints2d")) seq.joints2d = unpack<Pose2>(*a, 2);
  if (const auto* a = c.find("joints3d")) seq.joints3d = unpack<Pose3>(*a, 3);
  seq.validate();
  if (meta_out) *meta_out = c.meta;
  return seq;
}

}  // namespace vbones
