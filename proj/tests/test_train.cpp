#include "doctest.h"
#include "oracles.hpp"

#include "vbones/error.hpp"
#include "vbones/train.hpp"

#include <filesystem>
#include <fstream>

using namespace vbones;
namespace fs = std::filesystem;

namespace {

LabeledSequence make_sequence(std::uint64_t seed, int frames, double noise = 0.0) {
  SyntheticMotionSpec ms;
  ms.num_frames = frames;
  ms.seed = seed;
  ms.noise_sigma_2d = noise;
  LabeledSequence ls;
  ls.subject = "S1";
  ls.action = action_names()[seed % action_names().size()];
  ls.camera_id = "cam0";
  ls.sequence_id = ls.subject + "/" + ls.action + "." + ls.camera_id;
  ls.sequence = generate_synthetic(ms);
  return ls;
}

ModelConfig tiny_model() {
  ModelConfig c;
  c.hidden_width = 16;
  c.num_residual_blocks = 1;
  c.num_random_frames = 4;
  return c;
}

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainingConfig c;
  c.lr = 0.002;
  c.lr_decay_per_epoch = 0.9;
  CHECK(lr_at_epoch(c, 0) == 0.002);
  CHECK(lr_at_epoch(c, 3) == doctest::Approx(0.002 * 0.9 * 0.9 * 0.9).epsilon(1e-15));
  CHECK(training_config_from_json(to_json(c)).lr_decay_per_epoch == 0.9);
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.epochs = 1;
  c.lr_decay_per_epoch = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK(TrainingConfig::default_batch_size(243) == 1024);
  CHECK(TrainingConfig::default_batch_size(9) == 2048);
}

TEST_CASE("middle frame pairing matches a brute-force search") {
  std::mt19937_64 rng(4);
  std::vector<WindowLabel> w;
  for (int i = 0; i < 60; ++i) {
    w.push_back({static_cast<int>(bounded(rng, 3)), bounded(rng, 2) ? "a" : "b",
                 static_cast<int>(bounded(rng, 8))});
  }
  std::vector<std::pair<int, int>> want;
  for (int i = 0; i < 60; ++i) {
    for (int j = 0; j < 60; ++j) {
      const auto& a = w[static_cast<std::size_t>(i)];
      const auto& b = w[static_cast<std::size_t>(j)];
      if (a.sequence == b.sequence && a.camera_id == b.camera_id && b.middle == a.middle + 1) want.emplace_back(i, j);
    }
  }
  CHECK(pair_middle_frames(w) == want);
  CHECK(pair_middle_frames({}).empty());
}

TEST_CASE("root anchoring") {
  std::mt19937_64 rng(5);
  const Sequence3 rel = oracle::random_sequence(rng, 3);
  Eigen::MatrixXd roots(3, 3);
  roots << 1, 2, 3000, 4, 5, 3100, -7, 8, 3200;
  const Sequence3 abs = anchor_root(rel, roots);
  for (int t = 0; t < 3; ++t) {
    CHECK((abs[static_cast<std::size_t>(t)].rowwise() - roots.row(t) - rel[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(anchor_root(rel, roots.topRows(2)), Error);
}

TEST_CASE("batches keep frame pairs together") {
  const auto data = prepare_sequences({make_sequence(1, 30), make_sequence(2, 25)}, make_bone_set("VB23"));
  CHECK(data[0].gt_relative.row(0).head(3).norm() < 1e-12);
  std::mt19937_64 rng(6);
  const auto batches = epoch_batches(data, 8, rng);
  std::size_t total = 0;
  std::size_t paired = 0;
  for (const auto& b : batches) {
    total += b.size();
    const Batch batch = assemble_batch(data, b, tiny_model(), rng);
    CHECK(batch.inputs.random_frames.rows() == batch.size() * 4);
    CHECK(batch.inputs.windows.rows() == batch.size() * 9);
    paired += batch.pairs.size();
  }
  CHECK(total == 55);
  // Frame pairs (t, t+1) are shuffled as units; at most one unit per
  // sequence is a singleton.
  CHECK(paired >= 25);
}

TEST_CASE("batch loss is zero-weighted when projection terms are off") {
  const auto data = prepare_sequences({make_sequence(3, 40)}, make_bone_set("VB23"));
  const LiftingModel m = init_params(tiny_model(), 1);
  std::mt19937_64 rng(7);
  const auto batches = epoch_batches(data, 16, rng);
  const Batch batch = assemble_batch(data, batches[0], m.config(), rng);
  LossWeights w;
  ad::Graph g;
  const auto p = m.bind(g, true);
  const BatchLoss on = batch_loss(g, m, p, batch, w);
  CHECK(on.components.proj_dir > 0.0);
  CHECK(on.total.scalar() == doctest::Approx(total_loss(on.components, w).total));
  w.w_pd = 0.0;
  w.w_pl = 0.0;
  ad::Graph g2;
  const BatchLoss off = batch_loss(g2, m, m.bind(g2, true), batch, w);
  CHECK(off.components.proj_dir == 0.0);
  CHECK(off.components.proj_len == 0.0);
  CHECK(off.components.fc == doctest::Approx(on.components.fc));
}

TEST_CASE("gradient check on a quadratic") {
  std::vector<ad::Matrix> params = {ad::Matrix::Random(3, 4), ad::Matrix::Random(1, 5)};
  const std::vector<std::string> names = {"a", "b"};
  const ParamLoss loss = [](ad::Graph&, const std::vector<ad::Var>& p) {
    return ad::add(ad::sum(ad::cmul(p[0], p[0])), ad::scale(ad::sum(ad::cmul(p[1], p[1])), 3.0));
  };
  const auto r = gradient_check(params, names, loss, 20, 1e-4);
  CHECK(r.max_rel_error < 1e-8);
  CHECK(r.probes.size() == 20);
  CHECK_THROWS_AS(gradient_check(params, names, loss, 5, 0.0), Error);

  // A wrong backward shows up as a CheckFailure naming the parameter.
  const ParamLoss broken = [](ad::Graph& g, const std::vector<ad::Var>& p) {
    const ad::Matrix frozen = p[1].value();
    return ad::add(ad::sum(ad::cmul(p[0], p[0])), ad::sum(ad::cmul(g.constant(frozen), g.constant(frozen))));
  };
  try {
    gradient_check(params, names, broken, 40, 1e-5);
    FAIL("expected a check failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CheckFailure);
    CHECK(std::string(e.what()).find(" b[") != std::string::npos);
  }
}

TEST_CASE("training is deterministic and logs epochs") {
  const auto data = prepare_sequences({make_sequence(4, 40)}, make_bone_set("VB23"));
  TrainingConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.seed = 3;
  LiftingModel a = init_params(tiny_model(), 2);
  LiftingModel b = init_params(tiny_model(), 2);
  const auto dir = fs::temp_directory_path() / "vbones_train_run";
  fs::remove_all(dir);
  TrainOptions opt;
  opt.out_dir = dir;
  const TrainResult ra = train(a, data, tc, opt);
  const TrainResult rb = train(b, data, tc);
  REQUIRE(ra.epochs.size() == 2);
  CHECK(ra.epochs[0].total == rb.epochs[0].total);
  CHECK(ra.epochs[1].total == rb.epochs[1].total);
  CHECK(ra.steps == 6);
  for (std::size_t i = 0; i < a.params().size(); ++i) CHECK(a.params().value(i) == b.params().value(i));
  CHECK(fs::exists(dir / "final.vbckpt"));
  std::ifstream log(dir / "train_log.jsonl");
  int steps = 0, epochs = 0;
  for (std::string line; std::getline(log, line);) {
    const auto rec = nlohmann::json::parse(line);
    (rec.at("kind") == "step" ? steps : epochs)++;
  }
  CHECK(steps == 6);
  CHECK(epochs == 2);
  fs::remove_all(dir);
}

TEST_CASE("fc-only training lowers the loss monotonically early on") {
  const auto data = prepare_sequences({make_sequence(5, 64)}, make_bone_set("VB23"));
  TrainingConfig tc;
  tc.epochs = 10;
  tc.batch_size = 64;
  tc.lr = 5e-4;
  tc.weights = LossWeights{0, 0, 0, 0, 0, 0, 1};
  LiftingModel m = init_params(tiny_model(), 4);
  const TrainResult r = train(m, data, tc);
  for (std::size_t e = 1; e < r.epochs.size(); ++e) CHECK(r.epochs[e].total < r.epochs[e - 1].total);
}

TEST_CASE("prediction covers every frame") {
  const auto data = prepare_sequences({make_sequence(6, 20)}, make_bone_set("VB5"));
  ModelConfig mc = tiny_model();
  mc.virtual_config = "VB5";
  const LiftingModel m = init_params(mc, 1);
  const Sequence3 pred = predict_sequence(m, data[0]);
  CHECK(pred.size() == 20);
  CHECK(pred[0].row(0).norm() < 1e-12);
  CHECK(evaluate(m, data).aggregate().frames == 20);
}
