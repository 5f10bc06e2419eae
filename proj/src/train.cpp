#include "vbones/train.hpp"

#include "vbones/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace vbones {

void TrainingConfig::validate() const {
  require(epochs >= 1, ErrorKind::Configuration, "epochs must be >= 1");
  require(batch_size >= 1, ErrorKind::Configuration, "batch_size must be >= 1");
  require(std::isfinite(lr) && lr > 0.0, ErrorKind::Configuration, "lr must be positive");
  require(lr_decay_per_epoch > 0.0 && lr_decay_per_epoch <= 1.0, ErrorKind::Configuration,
          "lr_decay_per_epoch must be in (0, 1]");
  require(checkpoint_interval >= 0, ErrorKind::Configuration, "checkpoint_interval must be >= 0");
  weights.validate();
}

nlohmann::json to_json(const TrainingConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"lr_decay_per_epoch", c.lr_decay_per_epoch},
          {"weights", to_json(c.weights)},
          {"seed", c.seed},
          {"deterministic", c.deterministic},
          {"device", c.device},
          {"projection_consistency", c.projection_consistency},
          {"checkpoint_interval", c.checkpoint_interval}};
}

TrainingConfig training_config_from_json(const nlohmann::json& doc) {
  TrainingConfig c;
  try {
    c.epochs = doc.value("epochs", c.epochs);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.lr = doc.value("lr", c.lr);
    c.lr_decay_per_epoch = doc.value("lr_decay_per_epoch", c.lr_decay_per_epoch);
    if (doc.contains("weights")) c.weights = loss_weights_from_json(doc["weights"]);
    c.seed = doc.value("seed", c.seed);
    c.deterministic = doc.value("deterministic", c.deterministic);
    c.device = doc.value("device", c.device);
    c.projection_consistency = doc.value("projection_consistency", c.projection_consistency);
    c.checkpoint_interval = doc.value("checkpoint_interval", c.checkpoint_interval);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Configuration, std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

double lr_at_epoch(const TrainingConfig& config, int epoch) {
  return config.lr * std::pow(config.lr_decay_per_epoch, epoch);
}

PreparedSequence prepare_sequence(const LabeledSequence& ls, const BoneSet& bones) {
  const PoseSequence& seq = ls.sequence;
  seq.validate();
  require(seq.joints2d && seq.joints3d && seq.camera, ErrorKind::Validation,
          "sequence " + ls.sequence_id + " needs 2D, 3D and camera");
  const auto t = static_cast<Eigen::Index>(seq.num_frames());
  const auto j = static_cast<Eigen::Index>(seq.num_joints());
  require(j == static_cast<Eigen::Index>(bones.num_joints()), ErrorKind::Validation,
          "sequence " + ls.sequence_id + " joint count does not match the skeleton");
  const int root = bones.topology().root();
  const auto r = static_cast<Eigen::Index>(bones.num_real());
  const auto b = static_cast<Eigen::Index>(bones.size());

  PreparedSequence p;
  p.sequence_id = ls.sequence_id;
  p.action = ls.action;
  p.camera_id = ls.camera_id;
  p.camera = *seq.camera;
  p.inputs.resize(t, 2 * j);
  p.pixels.resize(t, 2 * j);
  p.gt_relative.resize(t, 3 * j);
  p.roots.resize(t, 3);
  p.lengths.resize(t, r);
  p.directions.resize(t, 3 * b);
  for (Eigen::Index i = 0; i < t; ++i) {
    const auto ti = static_cast<std::size_t>(i);
    const Pose3& pose = (*seq.joints3d)[ti];
    p.inputs.row(i) = flatten(normalize_2d((*seq.joints2d)[ti], p.camera));
    p.pixels.row(i) = flatten((*seq.joints2d)[ti]);
    p.gt_relative.row(i) = flatten(root_relative(pose, root));
    p.roots.row(i) = pose.row(root);
    p.lengths.row(i) = bone_lengths_from_joints(pose, bones).head(r).transpose();
    const BoneVectors dirs = bone_directions_from_joints(pose, bones);
    p.directions.row(i) = Eigen::Map<const Eigen::RowVectorXd>(dirs.data(), dirs.size());
  }
  return p;
}

std::vector<PreparedSequence> prepare_sequences(const std::vector<LabeledSequence>& seqs,
                                                const BoneSet& bones) {
  std::vector<PreparedSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(prepare_sequence(s, bones));
  return out;
}

std::vector<std::pair<int, int>> pair_middle_frames(const std::vector<WindowLabel>& windows) {
  // Hash on (sequence, camera, middle) and look up the successor frame.
  std::map<std::tuple<int, std::string, int>, std::vector<int>> by_key;
  for (int i = 0; i < static_cast<int>(windows.size()); ++i) {
    const auto& w = windows[static_cast<std::size_t>(i)];
    by_key[{w.sequence, w.camera_id, w.middle}].push_back(i);
  }
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < static_cast<int>(windows.size()); ++i) {
    const auto& w = windows[static_cast<std::size_t>(i)];
    const auto it = by_key.find({w.sequence, w.camera_id, w.middle + 1});
    if (it == by_key.end()) continue;
    for (int j : it->second) pairs.emplace_back(i, j);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

Sequence3 anchor_root(const Sequence3& pred, const Eigen::MatrixXd& roots) {
  require(roots.cols() == 3 && roots.rows() == static_cast<Eigen::Index>(pred.size()),
          ErrorKind::Validation, "root trajectory must be [T, 3] matching the prediction");
  Sequence3 out;
  out.reserve(pred.size());
  for (std::size_t t = 0; t < pred.size(); ++t) {
    out.push_back(pred[t].rowwise() + roots.row(static_cast<Eigen::Index>(t)));
  }
  return out;
}

namespace {

Eigen::RowVectorXd tile_root(const Eigen::RowVector3d& root, Eigen::Index joints) {
  return root.replicate(1, joints);
}

Eigen::RowVector4d intrinsics_row(const CameraIntrinsics& c) {
  return {c.fx, c.fy, c.u0, c.v0};
}

ad::Matrix rows_of(const ad::Matrix& m, const std::vector<Eigen::Index>& idx) {
  ad::Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

}  // namespace

Batch assemble_batch(const std::vector<PreparedSequence>& data, const std::vector<SampleRef>& samples,
                     const ModelConfig& config, std::mt19937_64& rng) {
  require(!samples.empty(), ErrorKind::Validation, "empty batch");
  const auto n = static_cast<Eigen::Index>(samples.size());
  const int f = config.num_random_frames;
  const int rf = config.receptive_field;
  const Eigen::Index j = config.num_joints;
  const Eigen::Index r = data.front().lengths.cols();
  const Eigen::Index b3 = data.front().directions.cols();

  Batch batch;
  auto& in = batch.inputs;
  in.random_frames.resize(n * f, 2 * j);
  in.current.resize(n, 2 * j);
  in.windows.resize(n * rf, 2 * j);
  batch.gt_current.resize(n, 3 * j);
  batch.gt_random.resize(n * f, 3 * j);
  batch.gt_lengths.resize(n, r);
  batch.gt_directions.resize(n, b3);
  batch.roots_current.resize(n, 3 * j);
  batch.roots_random.resize(n * f, 3 * j);
  batch.pixels_current.resize(n, 2 * j);
  batch.pixels_random.resize(n * f, 2 * j);
  batch.intrinsics_current.resize(n, 4);
  batch.intrinsics_random.resize(n * f, 4);

  for (Eigen::Index k = 0; k < n; ++k) {
    const SampleRef& s = samples[static_cast<std::size_t>(k)];
    const PreparedSequence& seq = data.at(static_cast<std::size_t>(s.sequence));
    const int t = s.frame;
    require(t >= 0 && t < seq.num_frames(), ErrorKind::Internal, "sample frame out of range");
    const auto intr = intrinsics_row(seq.camera);

    const auto frames = sample_random_frames(seq.num_frames(), f, rng);
    for (int q = 0; q < f; ++q) {
      const Eigen::Index row = k * f + q;
      const int fr = frames[static_cast<std::size_t>(q)];
      in.random_frames.row(row) = seq.inputs.row(fr);
      batch.gt_random.row(row) = seq.gt_relative.row(fr);
      batch.roots_random.row(row) = tile_root(seq.roots.row(fr), j);
      batch.pixels_random.row(row) = seq.pixels.row(fr);
      batch.intrinsics_random.row(row) = intr;
    }
    const auto window = window_frames(seq.num_frames(), t, rf);
    for (int q = 0; q < rf; ++q) {
      in.windows.row(k * rf + q) = seq.inputs.row(window[static_cast<std::size_t>(q)]);
    }
    in.current.row(k) = seq.inputs.row(t);
    batch.gt_current.row(k) = seq.gt_relative.row(t);
    batch.gt_lengths.row(k) = seq.lengths.row(t);
    batch.gt_directions.row(k) = seq.directions.row(t);
    batch.roots_current.row(k) = tile_root(seq.roots.row(t), j);
    batch.pixels_current.row(k) = seq.pixels.row(t);
    batch.intrinsics_current.row(k) = intr;
    batch.labels.push_back({s.sequence, seq.camera_id, t});
  }
  batch.pairs = pair_middle_frames(batch.labels);
  return batch;
}

std::vector<std::vector<SampleRef>> epoch_batches(const std::vector<PreparedSequence>& data,
                                                  int batch_size, std::mt19937_64& rng) {
  std::vector<std::array<SampleRef, 2>> units;
  std::vector<int> unit_size;
  for (int s = 0; s < static_cast<int>(data.size()); ++s) {
    const int t_max = data[static_cast<std::size_t>(s)].num_frames();
    for (int t = 0; t < t_max; t += 2) {
      units.push_back({SampleRef{s, t}, SampleRef{s, t + 1}});
      unit_size.push_back(t + 1 < t_max ? 2 : 1);
    }
  }
  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[bounded(rng, i)]);
  }
  std::vector<std::vector<SampleRef>> batches;
  std::vector<SampleRef> current;
  for (std::size_t u : order) {
    for (int k = 0; k < unit_size[u]; ++k) current.push_back(units[u][static_cast<std::size_t>(k)]);
    if (static_cast<int>(current.size()) >= batch_size) {
      batches.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) batches.push_back(std::move(current));
  return batches;
}

BatchLoss batch_loss(ad::Graph& g, const LiftingModel& model, const std::vector<ad::Var>& params,
                     const Batch& batch, const LossWeights& w) {
  const ForwardVars fv = model.forward(g, params, batch.inputs);
  const auto& topo = model.bones().topology();
  const auto shift_pairs = joint_shift_pairs(topo);

  std::vector<std::pair<double, ad::Var>> terms;
  BatchLoss out;

  // Coarse joints of every frame the length branch saw.
  const ad::Var coarse_parts[] = {fv.coarse_random, fv.coarse_current};
  ad::Matrix coarse_gt(batch.gt_random.rows() + batch.gt_current.rows(), batch.gt_current.cols());
  coarse_gt << batch.gt_random, batch.gt_current;
  const ad::Var l_len = losses::mean_joint_error(ad::concat_rows(coarse_parts), coarse_gt);
  const ad::Var l_att = losses::mean_row_norm(fv.real_lengths, batch.gt_lengths);
  const ad::Var l_dir = losses::mean_row_norm(fv.directions, batch.gt_directions);
  const ad::Var l_js = losses::joint_shift(fv.joints, batch.gt_current, shift_pairs);
  const ad::Var l_fc = losses::mean_joint_error(fv.joints, batch.gt_current);
  terms = {{w.w_L, l_len}, {w.w_att, l_att}, {w.w_d, l_dir}, {w.w_js, l_js}, {w.w_fc, l_fc}};
  out.components.length = l_len.scalar();
  out.components.attention = l_att.scalar();
  out.components.direction = l_dir.scalar();
  out.components.joint_shift = l_js.scalar();
  out.components.fc = l_fc.scalar();

  if (w.w_pd > 0.0 && !batch.pairs.empty()) {
    std::vector<Eigen::Index> first, second;
    for (const auto& [a, b] : batch.pairs) {
      first.push_back(a);
      second.push_back(b);
    }
    const ad::Var anchored = ad::add(fv.joints, g.constant(batch.roots_current));
    const ad::Var l_pd = losses::projection_consistency(
        ad::gather_rows(anchored, first), ad::gather_rows(anchored, second),
        rows_of(batch.pixels_current, first), rows_of(batch.pixels_current, second),
        rows_of(batch.intrinsics_current, first));
    terms.emplace_back(w.w_pd, l_pd);
    out.components.proj_dir = l_pd.scalar();
  }

  const int f = model.config().num_random_frames;
  if (w.w_pl > 0.0 && f >= 2) {
    // Consecutive entries of each sample's sorted random frames.
    const Eigen::Index n = batch.size();
    std::vector<Eigen::Index> first, second;
    for (Eigen::Index k = 0; k < n; ++k) {
      for (int q = 0; q + 1 < f; ++q) {
        first.push_back(k * f + q);
        second.push_back(k * f + q + 1);
      }
    }
    const ad::Var anchored = ad::add(fv.coarse_random, g.constant(batch.roots_random));
    const ad::Var l_pl = losses::projection_consistency(
        ad::gather_rows(anchored, first), ad::gather_rows(anchored, second),
        rows_of(batch.pixels_random, first), rows_of(batch.pixels_random, second),
        rows_of(batch.intrinsics_random, first));
    terms.emplace_back(w.w_pl, l_pl);
    out.components.proj_len = l_pl.scalar();
  }

  ad::Var total;
  for (const auto& [weight, term] : terms) {
    if (weight == 0.0) continue;
    const ad::Var scaled = ad::scale(term, weight);
    total = total.valid() ? ad::add(total, scaled) : scaled;
  }
  out.total = total.valid() ? total : g.constant(ad::Matrix::Zero(1, 1));
  return out;
}

Adam::Adam(const ParamStore& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(ad::Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
    v_.push_back(m_.back());
  }
}

void Adam::step(ParamStore& params, const std::vector<ad::Matrix>& grads, double lr) {
  require(grads.size() == m_.size(), ErrorKind::Internal, "gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseAbs2();
    params.value(i).array() -=
        lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

namespace {

nlohmann::json components_json(const LossComponents& c) {
  nlohmann::json j;
  const auto values = as_array(c);
  for (std::size_t i = 0; i < values.size(); ++i) j[std::string(kLossNames[i])] = values[i];
  return j;
}

void add_to(LossComponents& acc, const LossComponents& c, double s) {
  acc.length += s * c.length;
  acc.attention += s * c.attention;
  acc.direction += s * c.direction;
  acc.joint_shift += s * c.joint_shift;
  acc.proj_dir += s * c.proj_dir;
  acc.proj_len += s * c.proj_len;
  acc.fc += s * c.fc;
}

}  // namespace

TrainResult train(LiftingModel& model, const std::vector<PreparedSequence>& data,
                  const TrainingConfig& config_in, const TrainOptions& options) {
  config_in.validate();
  require(!data.empty(), ErrorKind::Validation, "training set is empty");
  TrainingConfig config = config_in;
  if (!config.projection_consistency) {
    config.weights.w_pd = 0.0;
    config.weights.w_pl = 0.0;
  }
  for (const auto& s : data) {
    require(s.num_frames() >= model.config().num_random_frames, ErrorKind::Validation,
            "sequence " + s.sequence_id + " is shorter than num_random_frames");
  }

  namespace fs = std::filesystem;
  std::ofstream log;
  if (options.out_dir) {
    fs::create_directories(*options.out_dir);
    log.open(*options.out_dir / "train_log.jsonl");
    require(log.good(), ErrorKind::Io, "cannot open training log");
    save_checkpoint(*options.out_dir / "last_good.vbckpt", model, {{"epoch", -1}});
  }
  const nlohmann::json train_meta = to_json(config);

  std::mt19937_64 rng(config.seed);
  Adam adam(model.params());
  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    const auto batches = epoch_batches(data, config.batch_size, rng);
    EpochSummary summary;
    summary.epoch = epoch;
    summary.lr = lr;
    double seen = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch batch = assemble_batch(data, batches[bi], model.config(), rng);
      ad::Graph g;
      const auto p = model.bind(g, true);
      BatchLoss bl;
      LossBreakdown breakdown;
      try {
        bl = batch_loss(g, model, p, batch, config.weights);
        breakdown = total_loss(bl.components, config.weights);
        require(std::isfinite(bl.total.scalar()), ErrorKind::TrainingDivergence,
                "total loss is not finite");
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::TrainingDivergence && e.kind() != ErrorKind::BehindCamera) throw;
        if (options.out_dir) {
          nlohmann::json dump = {{"epoch", epoch}, {"step", result.steps}, {"lr", lr},
                                 {"reason", e.what()}, {"components", components_json(bl.components)},
                                 {"last_good_checkpoint", (*options.out_dir / "last_good.vbckpt").string()}};
          std::ofstream(*options.out_dir / "divergence_dump.json") << dump.dump(2) << "\n";
        }
        fail(ErrorKind::TrainingDivergence,
             "training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      g.backward(bl.total);
      std::vector<ad::Matrix> grads;
      grads.reserve(p.size());
      for (const auto& v : p) {
        grads.push_back(g.grad(v));
        require(grads.back().allFinite(), ErrorKind::TrainingDivergence,
                "non-finite gradient at epoch " + std::to_string(epoch));
      }
      adam.step(model.params(), grads, lr);
      ++result.steps;

      const double weight = static_cast<double>(batch.size());
      add_to(summary.components, bl.components, weight);
      summary.total += weight * breakdown.total;
      seen += weight;
      if (log.is_open()) {
        nlohmann::json rec = {{"kind", "step"}, {"epoch", epoch}, {"step", result.steps},
                              {"lr", lr}, {"total", breakdown.total},
                              {"losses", components_json(bl.components)}};
        log << rec.dump() << "\n";
      }
    }
    add_to(summary.components, summary.components, 1.0 / seen - 1.0);
    summary.total /= seen;
    result.epochs.push_back(summary);

    if (options.out_dir) {
      const nlohmann::json meta = {{"epoch", epoch}, {"training", train_meta}};
      save_checkpoint(*options.out_dir / "last_good.vbckpt", model, meta);
      if (config.checkpoint_interval > 0 && (epoch + 1) % config.checkpoint_interval == 0) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%04d.vbckpt", epoch);
        save_checkpoint(*options.out_dir / name, model, meta);
      }
      nlohmann::json rec = {{"kind", "epoch"}, {"epoch", epoch}, {"lr", lr},
                            {"total", summary.total}, {"losses", components_json(summary.components)}};
      log << rec.dump() << std::endl;
    }
    if (!options.quiet) {
      std::fprintf(stderr, "epoch %d lr %.6g total %.4f fc %.3f\n", epoch, lr, summary.total,
                   summary.components.fc);
    }
    if (options.on_epoch && !options.on_epoch(summary)) break;
  }
  if (options.out_dir) {
    fs::copy_file(*options.out_dir / "last_good.vbckpt", *options.out_dir / "final.vbckpt",
                  fs::copy_options::overwrite_existing);
  }
  return result;
}

Sequence3 to_sequence3(const ad::Matrix& flat) {
  Sequence3 out;
  out.reserve(static_cast<std::size_t>(flat.rows()));
  for (Eigen::Index i = 0; i < flat.rows(); ++i) {
    Pose3 pose(flat.cols() / 3, 3);
    Eigen::Map<Eigen::RowVectorXd>(pose.data(), pose.size()) = flat.row(i);
    out.push_back(std::move(pose));
  }
  return out;
}

Sequence3 predict_sequence(const LiftingModel& model, const PreparedSequence& seq, std::uint64_t seed) {
  const auto& cfg = model.config();
  require(seq.num_frames() >= cfg.num_random_frames, ErrorKind::Validation,
          "sequence " + seq.sequence_id + " is shorter than num_random_frames");
  std::mt19937_64 rng(seed);
  // One length-branch sample per sequence, reused for every frame.
  const auto frames = sample_random_frames(seq.num_frames(), cfg.num_random_frames, rng);
  const int rf = cfg.receptive_field;
  const Eigen::Index j2 = seq.inputs.cols();
  ad::Matrix joints(seq.num_frames(), 3 * cfg.num_joints);

  constexpr int kChunk = 256;
  for (int start = 0; start < seq.num_frames(); start += kChunk) {
    const int n = std::min(kChunk, seq.num_frames() - start);
    ForwardInputs in;
    in.random_frames.resize(static_cast<Eigen::Index>(n) * cfg.num_random_frames, j2);
    in.current.resize(n, j2);
    in.windows.resize(static_cast<Eigen::Index>(n) * rf, j2);
    for (int k = 0; k < n; ++k) {
      for (int q = 0; q < cfg.num_random_frames; ++q) {
        in.random_frames.row(k * cfg.num_random_frames + q) =
            seq.inputs.row(frames[static_cast<std::size_t>(q)]);
      }
      in.current.row(k) = seq.inputs.row(start + k);
      const auto w = window_frames(seq.num_frames(), start + k, rf);
      for (int q = 0; q < rf; ++q) in.windows.row(k * rf + q) = seq.inputs.row(w[static_cast<std::size_t>(q)]);
    }
    ad::Graph g;
    const auto p = model.bind(g, false);
    joints.middleRows(start, n) = model.forward(g, p, in).joints.value();
  }
  return to_sequence3(joints);
}

EvalReport evaluate(const LiftingModel& model, const std::vector<PreparedSequence>& data,
                    std::uint64_t seed) {
  EvalReport report;
  for (const auto& seq : data) {
    report.add_sequence(seq.action, predict_sequence(model, seq, seed), to_sequence3(seq.gt_relative));
  }
  return report;
}

namespace {

ad::Matrix eval_loss(std::vector<ad::Matrix>& params, const ParamLoss& loss) {
  ad::Graph g;
  std::vector<ad::Var> vars;
  for (auto& m : params) vars.push_back(g.constant(m));
  return loss(g, vars).value();
}

}  // namespace

GradCheckResult gradient_check(std::vector<ad::Matrix>& params, const std::vector<std::string>& names,
                               const ParamLoss& loss, int num_params, double eps,
                               std::uint64_t seed, double tolerance, double floor) {
  require(eps > 0.0 && std::isfinite(eps), ErrorKind::Validation, "eps must be positive");
  require(num_params >= 1, ErrorKind::Validation, "num_params must be >= 1");
  require(names.size() == params.size(), ErrorKind::Internal, "parameter names do not match");

  // Analytic gradients from one taped pass.
  std::vector<ad::Matrix> analytic;
  {
    ad::Graph g;
    std::vector<ad::Var> vars;
    for (auto& m : params) vars.push_back(g.variable(m));
    const ad::Var out = loss(g, vars);
    require(out.rows() == 1 && out.cols() == 1, ErrorKind::Validation, "loss must be scalar");
    g.backward(out);
    for (const auto& v : vars) analytic.push_back(g.grad(v));
  }

  std::vector<Eigen::Index> offsets{0};
  for (const auto& m : params) offsets.push_back(offsets.back() + m.size());
  const auto total = static_cast<std::uint64_t>(offsets.back());
  require(total > 0, ErrorKind::Validation, "no parameters to check");

  std::mt19937_64 rng(seed);
  GradCheckResult result;
  for (int k = 0; k < num_params; ++k) {
    const auto flat = static_cast<Eigen::Index>(bounded(rng, total));
    const auto which = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    const Eigen::Index local = flat - offsets[which];
    ad::Matrix& m = params[which];
    // Column-major storage.
    const Eigen::Index row = local % m.rows();
    const Eigen::Index col = local / m.rows();
    const double saved = m(row, col);
    auto at = [&](double h) {
      m(row, col) = saved + h;
      return eval_loss(params, loss)(0, 0);
    };
    // Fourth-order central stencil: truncation error is O(eps^4), so a
    // larger eps can be used to keep round-off out of the reference.
    const double numeric = (8.0 * (at(eps) - at(-eps)) - (at(2 * eps) - at(-2 * eps))) / (12.0 * eps);
    m(row, col) = saved;

    GradCheckProbe probe;
    probe.param = names[which];
    probe.row = row;
    probe.col = col;
    probe.analytic = analytic[which](row, col);
    probe.numeric = numeric;
    const double denom = std::max({std::abs(probe.analytic), std::abs(probe.numeric), floor});
    probe.rel_error = std::abs(probe.analytic - probe.numeric) / denom;
    result.max_rel_error = std::max(result.max_rel_error, probe.rel_error);
    result.probes.push_back(probe);
  }
  if (result.max_rel_error > tolerance) {
    std::ostringstream msg;
    msg << "gradient check failed (max relative error " << result.max_rel_error << "):";
    for (const auto& p : result.probes) {
      if (p.rel_error > tolerance) {
        msg << " " << p.param << "[" << p.row << "," << p.col << "] analytic=" << p.analytic
            << " numeric=" << p.numeric << ";";
      }
    }
    fail(ErrorKind::CheckFailure, msg.str());
  }
  return result;
}

GradCheckResult gradient_check(LiftingModel& model, const ParamLoss& loss, int num_params, double eps,
                               std::uint64_t seed, double tolerance) {
  auto& store = model.params();
  std::vector<ad::Matrix> values;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < store.size(); ++i) {
    values.push_back(store.value(i));
    names.push_back(store.name(i));
  }
  return gradient_check(values, names, loss, num_params, eps, seed, tolerance);
}

}  // namespace vbones
