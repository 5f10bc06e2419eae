// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails, except those listed with --known-failure N, which
// still print FAIL but don't change the exit status.

#include "oracles.hpp"

#include "vbones/ablation.hpp"
#include "vbones/error.hpp"
#include "vbones/losses.hpp"
#include "vbones/metrics.hpp"
#include "vbones/train.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <set>
#include <string>

using namespace vbones;

namespace {

// Toy-scale ablation size, sized for the two hour budget on one core.
constexpr int kAblationSequences = 4;
constexpr int kAblationEpochs = 20;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome loop_closure() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  long checked = 0;
  std::vector<Pose3> poses;
  SyntheticMotionSpec ms;
  ms.num_frames = 100;
  ms.seed = 5;
  const PoseSequence seq = generate_synthetic(ms);
  for (const auto& p : *seq.joints3d) poses.push_back(p);
  for (const char* name : {"VB5", "VB10", "VB13", "VB23"}) {
    const BoneSet bs = make_bone_set(name);
    std::vector<PathSet> sets;
    for (int j = 0; j < 17; ++j) sets.push_back(enumerate_paths(bs, j, 8));
    for (const auto& pose : poses) {
      const BoneVectors dirs = bone_directions_from_joints(pose, bs);
      const Eigen::VectorXd len = bone_lengths_from_joints(pose, bs);
      for (int j = 0; j < 17; ++j) {
        const Eigen::Vector3d want = (pose.row(j) - pose.row(0)).transpose();
        for (const auto& path : sets[static_cast<std::size_t>(j)].paths) {
          const double err = (compose_joint_single_path(dirs, len, path) - want).norm() /
                             std::max(1.0, want.norm());
          worst = std::max(worst, err);
          ++checked;
        }
      }
    }
  }
  return {worst <= 1e-9, fmt("%.0f paths composed, worst relative error %.2e", static_cast<double>(checked), worst)};
}

Outcome path_enumeration() {
  long paths = 0;
  int mismatches = 0;
  for (const char* name : {"VB0", "VB5", "VB10", "VB13", "VB23"}) {
    const BoneSet bs = make_bone_set(name);
    for (int j = 0; j < 17; ++j) {
      const PathSet got = enumerate_paths(bs, j, 8);
      const auto want = oracle::all_simple_paths(bs, j, 8);
      const std::set<BonePath> got_set(got.paths.begin(), got.paths.end());
      if (got_set != want || got.paths.size() != want.size()) ++mismatches;
      paths += static_cast<long>(got.paths.size());
    }
  }
  return {mismatches == 0, fmt("%.0f paths over 85 (config, joint) cases, %.0f mismatches",
                               static_cast<double>(paths), mismatches)};
}

Outcome projection_discrimination() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  const CameraIntrinsics cam{1145, 1145, 512, 515};
  SyntheticMotionSpec ms;
  ms.num_frames = 2;
  ms.seed = 9;
  const Sequence3 est = *generate_synthetic(ms).joints3d;
  const Sequence2 proj = project_sequence(est, cam);
  double worst_a = 0.0, worst_b = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::RowVector2d d(u(rng), u(rng));
    // Both cases miss every frame's projection by exactly |d|.
    Sequence2 same = proj, flipped = proj;
    same[0].rowwise() -= d;
    same[1].rowwise() -= d;
    flipped[0].rowwise() -= d;
    flipped[1].rowwise() += d;
    worst_a = std::max(worst_a, std::abs(projection_consistency_loss(est, same, cam)));
    const double want = 2.0 * d.norm();
    worst_b = std::max(worst_b, std::abs(projection_consistency_loss(est, flipped, cam) - want) /
                                    std::max(1.0, want));
  }
  return {worst_a <= 1e-12 && worst_b <= 1e-12,
          fmt("case (a) worst loss %.2e, case (b) worst error vs |2d| %.2e", worst_a, worst_b)};
}

Outcome loss_identities() {
  std::mt19937_64 rng(404);
  const auto topo = default_topology();
  const BoneSet bs = make_bone_set("VB23");
  const CameraIntrinsics cam{1145, 1145, 512, 515};
  SyntheticMotionSpec ms;
  ms.num_frames = 12;
  ms.seed = 4;
  const PoseSequence seq = generate_synthetic(ms);
  const Sequence3& gt3 = *seq.joints3d;
  const Sequence2& gt2 = *seq.joints2d;
  const Pose3& gt = gt3[3];
  const Pose3 rel = root_relative(gt, 0);

  LossComponents c;
  c.length = length_loss(rel, rel);
  const Eigen::VectorXd lens = bone_lengths_from_joints(rel, bs).head(16);
  c.attention = attention_loss(lens, lens);
  const BoneVectors dirs = bone_directions_from_joints(rel, bs);
  c.direction = direction_loss(dirs, dirs);
  c.joint_shift = joint_shift_loss(rel, rel, topo);
  c.proj_dir = projection_consistency_loss(gt3, gt2, cam);
  c.proj_len = projection_consistency_loss({gt3[0], gt3[5], gt3[9]}, {gt2[0], gt2[5], gt2[9]}, cam);
  c.fc = fc_loss(rel, rel);
  double worst_zero = 0.0;
  for (double v : as_array(c)) worst_zero = std::max(worst_zero, std::abs(v));

  // Same identities through the taped versions used for training.
  ad::Graph g;
  const ad::Matrix flat = flatten(rel);
  worst_zero = std::max(worst_zero, losses::mean_joint_error(g.constant(flat), flat).scalar());
  worst_zero = std::max(worst_zero, losses::joint_shift(g.constant(flat), flat, joint_shift_pairs(topo)).scalar());

  double worst_shift = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Pose3 est = oracle::random_pose(rng);
    const Pose3 ref = oracle::random_pose(rng);
    const Eigen::RowVector3d t = oracle::random_pose(rng, 1, 2000.0);
    const double a = joint_shift_loss(est, ref, topo);
    const double b = joint_shift_loss(est.rowwise() + t, ref, topo);
    worst_shift = std::max(worst_shift, std::abs(a - b) / a);
  }

  double worst_offset = 0.0;
  for (int i = 0; i < 20; ++i) {
    Sequence2 noisy = gt2;
    for (auto& p : noisy) p += oracle::random_pose(rng, 17, 3.0).leftCols(2);
    const double a = projection_consistency_loss(gt3, noisy, cam);
    const Pose2 off = oracle::random_pose(rng, 17, 40.0).leftCols(2);
    for (auto& p : noisy) p += off;
    const double b = projection_consistency_loss(gt3, noisy, cam);
    worst_offset = std::max(worst_offset, std::abs(a - b) / a);
  }
  const auto pairs = joint_shift_pairs(topo).size();
  const bool pass = worst_zero <= 1e-9 && worst_shift <= 1e-12 && worst_offset <= 1e-10 && pairs == 120;
  return {pass, fmt("max loss at GT %.2e, shift drift %.2e, 2D offset drift %.2e, %.0f pairs", worst_zero,
                    worst_shift, worst_offset, static_cast<double>(pairs))};
}

Outcome gradient_checks() {
  ModelConfig mc;
  mc.virtual_config = "VB23";
  mc.receptive_field = 9;
  mc.hidden_width = 64;
  mc.num_residual_blocks = 2;
  LiftingModel model = init_params(mc, 5);
  SyntheticDatasetSpec ds;
  ds.sequences_per_subject = 1;
  ds.motion.num_frames = 64;
  ds.motion.noise_sigma_2d = 1.0;
  ds.seed = 5;
  const auto data = prepare_sequences(synthesize_split(ds, "train"), model.bones());
  std::mt19937_64 rng(5);
  const auto batches = epoch_batches(data, 8, rng);
  const Batch b = assemble_batch(data, batches.front(), mc, rng);
  const LossWeights w;
  try {
    const GradCheckResult r = gradient_check(
        model, [&](ad::Graph& g, const std::vector<ad::Var>& p) { return batch_loss(g, model, p, b, w).total; },
        64, 1e-3, 5, 1e-4);
    return {true, fmt("64 parameters, max relative error %.2e", r.max_rel_error)};
  } catch (const Error& e) {
    return {false, e.what()};
  }
}

Outcome metric_oracles() {
  std::mt19937_64 rng(606);
  double worst_p = 0.0, worst_n = 0.0, worst_v = 0.0;
  int order_violations = 0;
  std::uniform_real_distribution<double> scale(0.3, 3.0);
  for (int i = 0; i < 100; ++i) {
    const Sequence3 gt = oracle::random_sequence(rng, 3);
    const Eigen::Matrix3d r = oracle::random_rotation(rng);
    const double s = scale(rng);
    const Eigen::RowVector3d t = oracle::random_pose(rng, 1, 1000.0);
    Sequence3 sim, scaled, shifted, noisy;
    for (const auto& p : gt) {
      sim.push_back(((s * p * r.transpose()).rowwise() + t).eval());
      scaled.push_back(s * p);
      shifted.push_back(p.rowwise() + t);
      noisy.push_back(p + oracle::random_pose(rng, 17, 150.0));
    }
    worst_p = std::max(worst_p, p_mpjpe(sim, gt));
    worst_n = std::max(worst_n, n_mpjpe(scaled, gt));
    worst_v = std::max(worst_v, mpjve(shifted, gt));
    const double p1 = mpjpe(noisy, gt), p2 = p_mpjpe(noisy, gt), p3 = n_mpjpe(noisy, gt);
    if (!(p2 <= p3 + 1e-9 && p3 <= p1 + 1e-9)) ++order_violations;
  }
  return {worst_p <= 1e-6 && worst_n <= 1e-6 && worst_v <= 1e-6 && order_violations == 0,
          fmt("p_mpjpe %.2e mm, n_mpjpe %.2e mm, mpjve %.2e mm, %.0f ordering violations", worst_p, worst_n,
              worst_v, order_violations)};
}

Outcome overfit() {
  SyntheticMotionSpec ms;
  ms.num_frames = 512;
  ms.seed = 7;
  LabeledSequence ls;
  ls.sequence_id = "S1/Walking.cam0";
  ls.subject = "S1";
  ls.action = "Walking";
  ls.camera_id = "cam0";
  ls.sequence = generate_synthetic(ms);
  ModelConfig mc;
  mc.virtual_config = "VB23";
  mc.receptive_field = 9;
  mc.hidden_width = 128;
  mc.num_residual_blocks = 2;
  LiftingModel model = init_params(mc, 1);
  const auto data = prepare_sequences({ls}, model.bones());
  TrainingConfig tc;
  tc.epochs = 200;
  tc.batch_size = 32;
  tc.lr = 1e-3;
  tc.lr_decay_per_epoch = 0.98;
  tc.seed = 0;
  train(model, data, tc);
  const double err = evaluate(model, data).aggregate().mpjpe;
  return {err < 5.0, fmt("train MPJPE %.2f mm after 200 epochs (threshold 5 mm)", err)};
}

Outcome ablation_trend() {
  SyntheticDatasetSpec ds;
  ds.sequences_per_subject = kAblationSequences;
  ds.motion.num_frames = 512;
  ds.train_noise_sigma = 2.0;
  ds.test_noise_sigma = 2.0;
  ds.seed = 11;
  const auto train_set = synthesize_split(ds, "train");
  const auto test_set = synthesize_split(ds, "test");
  AblationSpec spec;
  spec.model.receptive_field = 9;
  spec.model.hidden_width = 128;
  spec.model.num_residual_blocks = 2;
  spec.training.epochs = kAblationEpochs;
  spec.training.batch_size = 64;
  spec.training.lr_decay_per_epoch = 0.95;
  spec.seeds = {0, 1, 2};
  // Three cells answer both questions: VB0 vs VB23 without PCL, and VB0
  // with vs without PCL.
  AblationSpec base = spec;
  base.virtual_configs = {"VB0"};
  base.pcl_settings = {false, true};
  AblationSpec vb = spec;
  vb.virtual_configs = {"VB23"};
  vb.pcl_settings = {false};
  auto progress = [](const std::string& s) { std::printf("    %s\n", s.c_str()); std::fflush(stdout); };
  auto rows = run_ablation(base, train_set, test_set, progress);
  for (auto& r : run_ablation(vb, train_set, test_set, progress)) rows.push_back(r);
  const double vb0 = find_row(rows, "VB0", false).median.mpjpe;
  const double vb23 = find_row(rows, "VB23", false).median.mpjpe;
  const double pcl = find_row(rows, "VB0", true).median.mpjpe;
  std::printf("%s", ablation_table(rows).c_str());
  return {vb23 <= vb0 && pcl <= vb0,
          fmt("median Protocol 1: VB0 %.2f, VB23 %.2f, VB0+PCL %.2f mm", vb0, vb23, pcl)};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> all = {
      {1, "loop closure", 30, loop_closure},
      {2, "path enumeration equivalence", 60, path_enumeration},
      {3, "projection consistency discrimination", 5, projection_discrimination},
      {4, "loss identities and invariances", 10, loss_identities},
      {5, "gradient check", 300, gradient_checks},
      {6, "metric oracles", 30, metric_oracles},
      {7, "overfit smoke test", 900, overfit},
      {8, "ablation trend", 7200, ablation_trend},
  };
  // Optional list of criterion ids to run, e.g. `acceptance 1 2 3`.
  std::set<int> only, known;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--known-failure") == 0 && i + 1 < argc) {
      known.insert(std::atoi(argv[++i]));
    } else {
      only.insert(std::atoi(argv[i]));
    }
  }

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    const bool excused = !pass && known.count(c.id);
    if (!pass && !excused) ++failed;
    std::printf("criterion %d %s: %s (%s; %.1f s of %.0f s budget)%s\n", c.id, c.name, pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs, c.budget_s, excused ? " [known failure]" : "");
    std::fflush(stdout);
  }
  std::printf("criterion 9 full-scale harness: SKIPPED (optional, needs licensed data)\n");
  return failed == 0 ? 0 : 1;
}
