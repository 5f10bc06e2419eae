#include "doctest.h"
#include "oracles.hpp"

#include "vbones/container.hpp"
#include "vbones/error.hpp"
#include "vbones/geometry.hpp"

#include <filesystem>

using namespace vbones;

TEST_CASE("single path composition") {
  const auto bs = make_bone_set("VB5");
  BoneVectors dirs = BoneVectors::Zero(static_cast<Eigen::Index>(bs.size()), 3);
  dirs.col(2).setOnes();
  Eigen::VectorXd len = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(bs.size()), 100.0);
  CHECK(compose_joint_single_path(dirs, len, {}).isZero());
  CHECK(compose_joint_single_path(dirs, len, {{0, 1}}).isApprox(Eigen::Vector3d(0, 0, 100)));
  dirs(0, 0) = 0.5;
  CHECK_THROWS_AS(compose_joint_single_path(dirs, len, {{0, 1}}), Error);
}

TEST_CASE("GT-derived bone vectors close every loop") {
  std::mt19937_64 rng(17);
  for (auto name : {"VB5", "VB23"}) {
    const auto bs = make_bone_set(name);
    for (int trial = 0; trial < 5; ++trial) {
      const Pose3 pose = oracle::random_pose(rng);
      const auto dirs = bone_directions_from_joints(pose, bs);
      const auto len = bone_lengths_from_joints(pose, bs);
      for (int j = 0; j < 17; ++j) {
        const Eigen::Vector3d want = (pose.row(j) - pose.row(0)).transpose();
        const auto ps = enumerate_paths(bs, j, 5);
        for (const auto& p : ps.paths) {
          CHECK((compose_joint_single_path(dirs, len, p) - want).norm() <= 1e-9 * std::max(1.0, want.norm()));
        }
        const Eigen::VectorXd w = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(ps.paths.size()), 1.0 / ps.paths.size());
        CHECK((compose_joint_multi_path(dirs, len, ps, w) - want).norm() <= 1e-9 * std::max(1.0, want.norm()));
      }
    }
  }
}

TEST_CASE("multi path weights are validated") {
  const auto bs = make_bone_set("VB5");
  BoneVectors dirs = BoneVectors::Zero(21, 3);
  dirs.col(0).setOnes();
  Eigen::VectorXd len = Eigen::VectorXd::Ones(21);
  const auto ps = enumerate_paths(bs, joint::kRightWrist, 5);
  CHECK_THROWS_AS(compose_joint_multi_path(dirs, len, ps, Eigen::Vector2d(0.7, 0.7)), Error);
  CHECK_THROWS_AS(compose_joint_multi_path(dirs, len, ps, Eigen::Vector2d(1.5, -0.5)), Error);
}

TEST_CASE("pinhole projection") {
  const CameraIntrinsics cam{1000, 900, 500, 400};
  const auto uv = project_pinhole(Eigen::Vector3d(100, -200, 5000), cam);
  CHECK(uv.x() == doctest::Approx(1000 * 100.0 / 5000 + 500));
  CHECK(uv.y() == doctest::Approx(900 * -200.0 / 5000 + 400));
  CHECK(project_pinhole(Eigen::Vector3d(0, 0, 1), cam).isApprox(Eigen::Vector2d(500, 400)));
  CHECK_THROWS_AS(project_pinhole(Eigen::Vector3d(0, 0, 0), cam), Error);
  CHECK_THROWS_AS(project_pinhole(Eigen::Vector3d(0, 0, -10), cam), Error);
  CHECK_THROWS_AS(CameraIntrinsics({-1, 1, 0, 0}).validate(), Error);
}

TEST_CASE("displacements and degenerate bones") {
  Sequence2 s(3, Pose2::Zero(17, 2));
  s[1].array() += 2.0;
  s[2].array() += 5.0;
  const auto d = displacements(s);
  REQUIRE(d.size() == 2);
  CHECK((d[0].array() == 2.0).all());
  CHECK((d[1].array() == 3.0).all());
  CHECK_THROWS_AS(displacements(Sequence2(1, Pose2::Zero(17, 2))), Error);

  Pose3 pose = Pose3::Zero(17, 3);
  for (int j = 0; j < 17; ++j) pose(j, 0) = j;
  pose.row(5) = pose.row(4);
  try {
    bone_directions_from_joints(pose, make_bone_set("VB0"));
    FAIL("expected a degenerate bone");
  } catch (const DegenerateBoneError& e) {
    CHECK(e.bone_index() == 4);
  }
}

TEST_CASE("pose sequence container round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "vbones_geom_test";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(2);
  PoseSequence seq;
  seq.joints3d = oracle::random_sequence(rng, 4);
  for (auto& p : *seq.joints3d) p.col(2).array() += 5000.0;
  seq.camera = CameraIntrinsics{1145, 1144, 512, 515};
  seq.joints2d = project_sequence(*seq.joints3d, *seq.camera);
  seq.frame_rate = 25.0;
  save_pose_sequence(dir / "a.vpose", seq, {{"note", "x"}});
  nlohmann::json meta;
  const auto back = load_pose_sequence(dir / "a.vpose", &meta);
  CHECK(meta["note"] == "x");
  CHECK(back.frame_rate == 25.0);
  CHECK(*back.camera == *seq.camera);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK((*back.joints3d)[t] == (*seq.joints3d)[t]);
    CHECK((*back.joints2d)[t] == (*seq.joints2d)[t]);
  }
  // A checkpoint magic is rejected by the pose reader.
  write_container(dir / "b.vpose", Container{}, kCheckpointMagic);
  CHECK_THROWS_AS(load_pose_sequence(dir / "b.vpose"), Error);
  std::filesystem::remove_all(dir);
}
