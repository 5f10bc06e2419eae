#include "doctest.h"
#include "oracles.hpp"

#include "vbones/error.hpp"
#include "vbones/metrics.hpp"

using namespace vbones;

namespace {

Sequence3 transform(const Sequence3& s, const Eigen::Matrix3d& r, double scale, Eigen::RowVector3d t) {
  Sequence3 out;
  for (const auto& p : s) out.push_back(((scale * (p * r.transpose())).rowwise() + t).eval());
  return out;
}

Sequence3 perturb(std::mt19937_64& rng, const Sequence3& s, double sigma) {
  Sequence3 out;
  for (const auto& p : s) out.push_back(p + oracle::random_pose(rng, 17, sigma));
  return out;
}

}  // namespace

TEST_CASE("metrics agree with the reference implementations") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Sequence3 gt = oracle::random_sequence(rng, 6);
    const Sequence3 pred = perturb(rng, gt, 80.0);
    CHECK(mpjpe(pred, gt) == doctest::Approx(oracle::mpjpe(pred, gt)).epsilon(1e-12));
    CHECK(p_mpjpe(pred, gt) == doctest::Approx(oracle::p_mpjpe(pred, gt)).epsilon(1e-9));
    CHECK(n_mpjpe(pred, gt) == doctest::Approx(oracle::n_mpjpe(pred, gt)).epsilon(1e-9));
    CHECK(mpjve(pred, gt) == doctest::Approx(oracle::mpjve(pred, gt)).epsilon(1e-12));
  }
}

TEST_CASE("metric invariances and ordering") {
  std::mt19937_64 rng(12);
  const Sequence3 gt = oracle::random_sequence(rng, 5);
  const Sequence3 sim = transform(gt, oracle::random_rotation(rng), 1.7, {10, -40, 300});
  CHECK(p_mpjpe(sim, gt) < 1e-6);
  CHECK(n_mpjpe(transform(gt, Eigen::Matrix3d::Identity(), 0.4, {0, 0, 0}), gt) < 1e-6);
  CHECK(mpjve(transform(gt, Eigen::Matrix3d::Identity(), 1.0, {5, 6, 7}), gt) < 1e-9);
  CHECK(mpjpe(gt, gt) == 0.0);
  for (int i = 0; i < 30; ++i) {
    const Sequence3 pred = perturb(rng, gt, 100.0);
    const double p1 = mpjpe(pred, gt), p2 = p_mpjpe(pred, gt), p3 = n_mpjpe(pred, gt);
    CHECK(p2 <= p3 + 1e-9);
    CHECK(p3 <= p1 + 1e-9);
  }
}

TEST_CASE("procrustes handles reflections and degenerate frames") {
  std::mt19937_64 rng(13);
  const Pose3 gt = oracle::random_pose(rng);
  Pose3 mirrored = gt;
  mirrored.col(0) *= -1.0;
  bool degenerate = true;
  const Pose3 aligned = procrustes_align(mirrored, gt, &degenerate);
  CHECK_FALSE(degenerate);
  // A proper rotation cannot undo a mirror image.
  CHECK((aligned - gt).rowwise().norm().mean() > 1.0);

  const Pose3 flat = Pose3::Constant(17, 3, 5.0);
  procrustes_align(flat, gt, &degenerate);
  CHECK(degenerate);
  int count = 0;
  const double v = p_mpjpe({flat}, {gt}, &count);
  CHECK(count == 1);
  CHECK(std::isfinite(v));
  CHECK(std::isfinite(n_mpjpe({Pose3::Zero(17, 3)}, {gt})));
}

TEST_CASE("metric input validation") {
  std::mt19937_64 rng(14);
  const Sequence3 a = oracle::random_sequence(rng, 3);
  CHECK_THROWS_AS(mpjpe(a, oracle::random_sequence(rng, 2)), Error);
  CHECK_THROWS_AS(mpjpe({}, {}), Error);
  CHECK_THROWS_AS(mpjve({a[0]}, {a[0]}), Error);
}

TEST_CASE("evaluation report is frame weighted") {
  std::mt19937_64 rng(15);
  const Sequence3 g1 = oracle::random_sequence(rng, 4);
  const Sequence3 g2 = oracle::random_sequence(rng, 12);
  const Sequence3 p1 = perturb(rng, g1, 50.0);
  const Sequence3 p2 = perturb(rng, g2, 20.0);
  EvalReport r;
  r.add_sequence("Walking", p1, g1);
  r.add_sequence("Eating", p2, g2);
  CHECK(r.per_action().size() == 2);
  CHECK(r.per_action().at("Walking").mpjpe == doctest::Approx(mpjpe(p1, g1)));
  Sequence3 pa = p1, ga = g1;
  pa.insert(pa.end(), p2.begin(), p2.end());
  ga.insert(ga.end(), g2.begin(), g2.end());
  const ProtocolValues all = r.aggregate();
  CHECK(all.frames == 16);
  CHECK(all.mpjpe == doctest::Approx(mpjpe(pa, ga)));
  CHECK(all.p_mpjpe == doctest::Approx(p_mpjpe(pa, ga)));
  const auto j = r.to_json();
  CHECK(j.at("actions").size() == 2);
  CHECK(j.at("average").at("protocol1_mpjpe").get<double>() == doctest::Approx(all.mpjpe));
  const std::string table = r.to_table();
  CHECK(table.find("Protocol #1") != std::string::npos);
  CHECK(table.find("Avg") != std::string::npos);
}
