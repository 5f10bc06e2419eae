#include "doctest.h"
#include "oracles.hpp"

#include "vbones/error.hpp"
#include "vbones/losses.hpp"

using namespace vbones;

namespace {

Pose3 offset_pose(const Pose3& p, Eigen::RowVector3d d) { return p.rowwise() + d; }

}  // namespace

TEST_CASE("total loss weights and breakdown") {
  LossWeights w;
  LossComponents ones{1, 1, 1, 1, 1, 1, 1};
  CHECK(total_loss(ones, w).total == doctest::Approx(4.17).epsilon(1e-12));
  CHECK(total_loss(LossComponents{}, w).total == 0.0);
  LossComponents one;
  one.joint_shift = 3.0;
  CHECK(total_loss(one, w).total == doctest::Approx(0.3));
  const auto b = total_loss(LossComponents{0.5, 2, 3, 4, 5, 6, 7}, w);
  double s = 0;
  for (double v : as_array(b.weighted)) s += v;
  CHECK(std::abs(s - b.total) <= 1e-12 * b.total);
  one.fc = std::nan("");
  CHECK_THROWS_AS(total_loss(one, w), Error);
  LossWeights bad;
  bad.w_d = -1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("length and fc losses") {
  std::mt19937_64 rng(1);
  const Pose3 gt = oracle::random_pose(rng);
  CHECK(length_loss(gt, gt) == 0.0);
  CHECK(length_loss(offset_pose(gt, {3, 4, 0}), gt) == doctest::Approx(5.0));
  CHECK(fc_loss(offset_pose(gt, {0, 0, 5}), gt) == doctest::Approx(5.0));
  const Pose3 est = oracle::random_pose(rng);
  CHECK(length_loss(est, gt) == doctest::Approx(oracle::mean_joint_distance(est, gt)));
  CHECK_THROWS_AS(length_loss(Pose3::Zero(16, 3), gt), Error);
}

TEST_CASE("attention and direction losses") {
  Eigen::VectorXd gt = Eigen::VectorXd::LinSpaced(16, 100, 400);
  CHECK(attention_loss(gt, gt) == 0.0);
  Eigen::VectorXd est = gt;
  est(3) += 7.0;
  CHECK(attention_loss(est, gt) == doctest::Approx(7.0));
  CHECK_THROWS_AS(attention_loss(gt.head(15), gt), Error);

  BoneVectors d = BoneVectors::Zero(16, 3);
  d.col(1).setOnes();
  CHECK(direction_loss(d, d) == 0.0);
  BoneVectors e = d;
  e.row(2) *= -1.0;
  CHECK(direction_loss(e, d) == doctest::Approx(2.0));
  BoneVectors bad = d;
  bad(0, 1) = 2.0;
  CHECK_THROWS_AS(direction_loss(d, bad), Error);
}

TEST_CASE("joint shift loss") {
  const auto topo = default_topology();
  CHECK(joint_shift_pairs(topo).size() == 120);
  std::mt19937_64 rng(2);
  const Pose3 gt = oracle::random_pose(rng);
  CHECK(joint_shift_loss(gt, gt, topo) == 0.0);
  CHECK(joint_shift_loss(offset_pose(gt, {10, -20, 30}), gt, topo) < 1e-9);
  const Pose3 est = oracle::random_pose(rng);
  double want = 0.0;
  for (int i = 0; i < 17; ++i) {
    for (int j = i + 1; j < 17; ++j) {
      if (topo.adjacent(i, j)) continue;
      want += ((gt.row(i) - gt.row(j)) - (est.row(i) - est.row(j))).norm();
    }
  }
  CHECK(joint_shift_loss(est, gt, topo) == doctest::Approx(want));
  CHECK(joint_shift_loss(offset_pose(est, {1, 2, 3}), offset_pose(gt, {-4, 0, 9}), topo) ==
        doctest::Approx(want));
}

TEST_CASE("projection consistency loss") {
  const CameraIntrinsics cam{1145, 1145, 512, 515};
  std::mt19937_64 rng(3);
  Sequence3 est = oracle::random_sequence(rng, 5, 400);
  for (auto& p : est) p.col(2).array() += 5000;
  const Sequence2 proj = project_sequence(est, cam);
  CHECK(projection_consistency_loss(est, proj, cam) < 1e-12);

  // Constant per-joint offsets cancel in the displacements.
  Sequence2 shifted = proj;
  Pose2 off = Pose2::Random(17, 2) * 20.0;
  for (auto& p : shifted) p += off;
  CHECK(projection_consistency_loss(est, shifted, cam) < 1e-10);

  // Brute-force recomputation on a random pair.
  Sequence2 obs = proj;
  for (auto& p : obs) p += Pose2::Random(17, 2) * 3.0;
  double acc = 0.0;
  for (std::size_t t = 0; t + 1 < est.size(); ++t) {
    for (int j = 0; j < 17; ++j) {
      const Eigen::Vector2d a = project_pinhole(est[t].row(j).transpose(), cam);
      const Eigen::Vector2d b = project_pinhole(est[t + 1].row(j).transpose(), cam);
      acc += ((b - a) - (obs[t + 1].row(j) - obs[t].row(j)).transpose()).norm();
    }
  }
  CHECK(projection_consistency_loss(est, obs, cam) == doctest::Approx(acc / (4 * 17)));

  CHECK_THROWS_AS(projection_consistency_loss({est[0]}, {proj[0]}, cam), Error);
  Sequence3 behind = est;
  behind[1](3, 2) = -100;
  CHECK_THROWS_AS(projection_consistency_loss(behind, proj, cam), Error);
}
