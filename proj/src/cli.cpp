#include "vbones/cli.hpp"

#include "vbones/ablation.hpp"
#include "vbones/error.hpp"
#include "vbones/plot.hpp"
#include "vbones/train.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef VBONES_VERSION
#define VBONES_VERSION "unknown"
#endif

namespace vbones::cli {

namespace fs = std::filesystem;

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  bool force = false;
  std::optional<int> frames;
  std::optional<std::string> virtual_config;
  std::optional<std::string> pcl;
};

void add_common(CLI::App* app, Common& c, bool needs_out) {
  app->add_option("--config", c.config, "Configuration JSON file");
  auto* out = app->add_option("--out", c.out, "Output directory");
  if (needs_out) out->required();
  app->add_option("--seed", c.seed, "Seed override");
  app->add_flag("--deterministic", c.deterministic, "Seeded, bit-reproducible execution");
  app->add_flag("--force", c.force, "Allow writing into a non-empty output directory");
}

void add_model_flags(CLI::App* app, Common& c) {
  app->add_option("--frames", c.frames, "Receptive field")->check(CLI::IsMember({9, 27, 81, 243}));
  app->add_option("--virtual", c.virtual_config, "Virtual bone configuration")
      ->check(CLI::IsMember({"VB0", "VB5", "VB10", "VB13", "VB23"}));
  app->add_option("--pcl", c.pcl, "Projection consistency losses")->check(CLI::IsMember({"on", "off"}));
}

nlohmann::json read_json(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  require(in.good(), ErrorKind::Configuration, "cannot read config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Configuration, "config " + path + " is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

void prepare_out(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    require(fs::is_directory(dir), ErrorKind::Io, dir.string() + " exists and is not a directory");
    require(force || fs::is_empty(dir), ErrorKind::Io,
            "refusing to overwrite non-empty " + dir.string() + " (pass --force)");
  }
  fs::create_directories(dir);
}

void write_manifest(const fs::path& dir, const std::string& command, const nlohmann::json& resolved,
                    std::uint64_t seed, const std::vector<std::string>& artifacts) {
  const nlohmann::json manifest = {{"command", command},
                                   {"config", resolved},
                                   {"config_hash", fnv1a_hex(resolved.dump())},
                                   {"seed", seed},
                                   {"code_version", VBONES_VERSION},
                                   {"artifacts", artifacts}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

ModelConfig model_from(const nlohmann::json& doc, const Common& c) {
  ModelConfig m = doc.contains("model") ? model_config_from_json(doc["model"]) : ModelConfig{};
  if (c.frames) m.receptive_field = *c.frames;
  if (c.virtual_config) m.virtual_config = *c.virtual_config;
  if (c.seed) m.seed = *c.seed;
  m.validate();
  return m;
}

TrainingConfig training_from(const nlohmann::json& doc, const Common& c, const ModelConfig& m) {
  TrainingConfig t;
  if (!doc.contains("training") || !doc["training"].contains("batch_size")) {
    t.batch_size = TrainingConfig::default_batch_size(m.receptive_field);
  }
  if (doc.contains("training")) {
    nlohmann::json tj = doc["training"];
    if (!tj.contains("batch_size")) tj["batch_size"] = t.batch_size;
    t = training_config_from_json(tj);
  }
  if (c.seed) t.seed = *c.seed;
  if (c.deterministic) t.deterministic = true;
  if (c.pcl) t.projection_consistency = *c.pcl == "on";
  t.validate();
  return t;
}

SyntheticDatasetSpec dataset_from(const nlohmann::json& doc, const Common& c) {
  SyntheticDatasetSpec s = synthetic_dataset_from_json(doc.value("data", doc));
  if (c.seed) s.seed = *c.seed;
  return s;
}

void apply_threads() {
  if (const char* v = std::getenv("VBONES_NUM_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    require(end != v && *end == '\0' && n >= 1, ErrorKind::Configuration,
            "VBONES_NUM_THREADS must be a positive integer");
    Eigen::setNbThreads(static_cast<int>(n));
  }
}

int cmd_synth(const Common& c, std::ostream& out) {
  const auto doc = read_json(c.config);
  const SyntheticDatasetSpec spec = dataset_from(doc, c);
  const fs::path dir = c.out;
  prepare_out(dir, c.force);
  write_synthetic_dataset(dir, spec);
  write_manifest(dir, "synth", to_json(spec), spec.seed, {"index.json"});
  out << "wrote synthetic dataset to " << dir.string() << "\n";
  return 0;
}

std::vector<LabeledSequence> load_data(const std::string& root, const std::string& split,
                                       std::ostream& err) {
  const DatasetIndex idx = ingest_h36m_format(root, split);
  for (const auto& w : idx.warnings) err << "warning: " << w << "\n";
  require(!idx.entries.empty(), ErrorKind::Ingestion, "no " + split + " sequences under " + root);
  return load_split(idx);
}

int cmd_train(const Common& c, const std::string& data_root, bool verbose, std::ostream& out,
              std::ostream& err) {
  const auto doc = read_json(c.config);
  const ModelConfig mc = model_from(doc, c);
  const TrainingConfig tc = training_from(doc, c, mc);
  const fs::path dir = c.out;
  prepare_out(dir, c.force);

  LiftingModel model = init_params(mc, mc.seed);
  const auto data = prepare_sequences(load_data(data_root, "train", err), model.bones());
  TrainOptions opts;
  opts.out_dir = dir;
  opts.quiet = !verbose;
  const TrainResult res = train(model, data, tc, opts);

  const nlohmann::json resolved = {{"model", to_json(mc)}, {"training", to_json(tc)}, {"data", data_root}};
  write_text(dir / "config.json", resolved.dump(2) + "\n");
  write_manifest(dir, "train", resolved, tc.seed,
                 {"final.vbckpt", "last_good.vbckpt", "train_log.jsonl", "config.json"});
  const auto& last = res.epochs.back();
  out << "trained " << res.epochs.size() << " epochs (" << res.steps << " steps), final loss "
      << last.total << ", checkpoint " << (dir / "final.vbckpt").string() << "\n";
  return 0;
}

Sequence3 load_joints(const std::string& path) {
  const PoseSequence s = load_pose_sequence(path);
  require(s.joints3d.has_value(), ErrorKind::Validation, path + " has no 3D joints");
  Sequence3 rel;
  for (const auto& p : *s.joints3d) rel.push_back(root_relative(p, joint::kPelvis));
  return rel;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& data_root,
             const std::string& split, const std::string& pred, const std::string& gt,
             std::ostream& out, std::ostream& err) {
  const fs::path dir = c.out;
  EvalReport report;
  nlohmann::json resolved;
  std::uint64_t seed = c.seed.value_or(0);
  if (!pred.empty() || !gt.empty()) {
    require(!pred.empty() && !gt.empty(), ErrorKind::Validation, "--pred and --gt go together");
    report.add_sequence("All", load_joints(pred), load_joints(gt));
    resolved = {{"pred", pred}, {"gt", gt}};
  } else {
    require(!checkpoint.empty() && !data_root.empty(), ErrorKind::Validation,
            "eval needs --checkpoint and --data, or --pred and --gt");
    const LiftingModel model = load_checkpoint(checkpoint);
    const auto data = prepare_sequences(load_data(data_root, split, err), model.bones());
    report = evaluate(model, data, seed);
    resolved = {{"checkpoint", checkpoint}, {"data", data_root}, {"split", split}};
  }
  prepare_out(dir, c.force);
  write_text(dir / "report.json", report.to_json().dump(2) + "\n");
  write_text(dir / "report.txt", report.to_table());
  write_manifest(dir, "eval", resolved, seed, {"report.json", "report.txt"});
  out << report.to_table();
  return 0;
}

int cmd_ablate(const Common& c, const std::string& data_root, std::ostream& out, std::ostream& err) {
  const auto doc = read_json(c.config);
  AblationSpec spec;
  spec.model = model_from(doc, c);
  spec.training = training_from(doc, c, spec.model);
  if (doc.contains("seeds")) spec.seeds = doc["seeds"].get<std::vector<std::uint64_t>>();
  if (c.seed) spec.seeds = {*c.seed};
  if (doc.contains("virtual_configs")) {
    spec.virtual_configs = doc["virtual_configs"].get<std::vector<std::string>>();
  }
  if (c.virtual_config) spec.virtual_configs = {*c.virtual_config};
  if (c.pcl) spec.pcl_settings = {*c.pcl == "on"};
  const fs::path dir = c.out;
  prepare_out(dir, c.force);

  std::vector<LabeledSequence> train_set, test_set;
  nlohmann::json data_json;
  if (!data_root.empty()) {
    train_set = load_data(data_root, "train", err);
    test_set = load_data(data_root, "test", err);
    data_json = data_root;
  } else {
    const SyntheticDatasetSpec ds = dataset_from(doc, c);
    train_set = synthesize_split(ds, "train");
    test_set = synthesize_split(ds, "test");
    data_json = to_json(ds);
  }
  const auto rows = run_ablation(spec, train_set, test_set,
                                 [&](const std::string& line) { err << line << std::endl; });
  write_text(dir / "ablation.json", to_json(rows).dump(2) + "\n");
  write_text(dir / "ablation.txt", ablation_table(rows));
  const nlohmann::json resolved = {{"model", to_json(spec.model)},
                                   {"training", to_json(spec.training)},
                                   {"seeds", spec.seeds},
                                   {"virtual_configs", spec.virtual_configs},
                                   {"data", data_json}};
  write_manifest(dir, "ablate", resolved, spec.seeds.front(), {"ablation.json", "ablation.txt"});
  out << ablation_table(rows);
  return 0;
}

int cmd_paths(const std::string& config, const std::string& joint_name, int max_edges,
              std::ostream& out) {
  const BoneSet bones = make_bone_set(config.empty() ? "VB23" : config);
  const auto& topo = bones.topology();
  const int target = topo.joint_index(joint_name);
  const PathSet ps = enumerate_paths(bones, target, max_edges);
  out << ps.paths.size() << " paths to " << joint_name << " (" << bones.size() << " bones, max "
      << max_edges << " edges)\n";
  for (const auto& path : ps.paths) {
    const auto joints = path_joints(bones, path);
    std::string line;
    for (std::size_t k = 0; k < joints.size(); ++k) {
      if (k) line += " -> ";
      line += topo.joint_names()[static_cast<std::size_t>(joints[k])];
    }
    out << line << "\n";
  }
  return 0;
}

int cmd_gradcheck(const Common& c, int num_params, double eps, int batch, std::ostream& out) {
  const auto doc = read_json(c.config);
  ModelConfig mc = doc.contains("model") ? model_config_from_json(doc["model"]) : [] {
    ModelConfig m;
    m.hidden_width = 32;
    m.num_residual_blocks = 1;
    return m;
  }();
  if (c.frames) mc.receptive_field = *c.frames;
  if (c.virtual_config) mc.virtual_config = *c.virtual_config;
  const std::uint64_t seed = c.seed.value_or(mc.seed);
  LossWeights w = doc.contains("weights") ? loss_weights_from_json(doc["weights"]) : LossWeights{};
  if (c.pcl && *c.pcl == "off") w.w_pd = w.w_pl = 0.0;

  LiftingModel model = init_params(mc, seed);
  SyntheticDatasetSpec ds;
  ds.sequences_per_subject = 1;
  ds.motion.num_frames = std::max(64, 2 * mc.receptive_field);
  ds.seed = seed;
  const auto data = prepare_sequences(synthesize_split(ds, "train"), model.bones());
  std::mt19937_64 rng(seed);
  auto batches = epoch_batches(data, batch, rng);
  const Batch b = assemble_batch(data, batches.front(), mc, rng);
  const GradCheckResult res = gradient_check(
      model,
      [&](ad::Graph& g, const std::vector<ad::Var>& p) { return batch_loss(g, model, p, b, w).total; },
      num_params, eps, seed);
  char buf[96];
  std::snprintf(buf, sizeof buf, "gradient check passed: %zu parameters, max relative error %.3e\n",
                res.probes.size(), res.max_rel_error);
  out << buf;
  if (!c.out.empty()) {
    prepare_out(c.out, c.force);
    nlohmann::json probes = nlohmann::json::array();
    for (const auto& p : res.probes) {
      probes.push_back({{"param", p.param}, {"row", p.row}, {"col", p.col}, {"analytic", p.analytic},
                        {"numeric", p.numeric}, {"rel_error", p.rel_error}});
    }
    write_text(fs::path(c.out) / "gradcheck.json",
               nlohmann::json{{"max_rel_error", res.max_rel_error}, {"probes", probes}}.dump(2) + "\n");
    write_manifest(c.out, "gradcheck", {{"model", to_json(mc)}, {"weights", to_json(w)}}, seed,
                   {"gradcheck.json"});
  }
  return 0;
}

// Two predictions of one joint with the same per-frame error: a constant
// offset, and an offset whose sign alternates between frames.
void projection_cases_plot(const fs::path& path) {
  const int t = 12;
  plot::Series gt{"ground truth", {}, {}}, a{"case a constant offset", {}, {}},
      b{"case b alternating offset", {}, {}};
  const double dx = 6.0, dy = -4.0;
  for (int k = 0; k < t; ++k) {
    const double u = 300.0 + 12.0 * k, v = 400.0 - 25.0 * std::sin(0.4 * k);
    gt.x.push_back(u);
    gt.y.push_back(v);
    a.x.push_back(u + dx);
    a.y.push_back(v + dy);
    const double s = k % 2 ? -1.0 : 1.0;
    b.x.push_back(u + s * dx);
    b.y.push_back(v + s * dy);
  }
  plot::trajectory_chart(path, "Same per-frame error, different motion", {gt, a, b});
}

int cmd_plot(const Common& c, const std::string& run_dir, const std::string& data_root,
             const std::string& split, std::ostream& out, std::ostream& err) {
  const fs::path dir = c.out;
  prepare_out(dir, c.force);
  std::vector<std::string> written;
  if (!run_dir.empty()) {
    std::ifstream log(fs::path(run_dir) / "train_log.jsonl");
    require(log.good(), ErrorKind::Io, "no train_log.jsonl in " + run_dir);
    std::vector<plot::Series> series;
    for (auto name : kLossNames) series.push_back({std::string(name), {}, {}});
    series.push_back({"total", {}, {}});
    std::string line;
    while (std::getline(log, line)) {
      const auto rec = nlohmann::json::parse(line);
      if (rec.value("kind", "") != "epoch") continue;
      const double e = rec["epoch"].get<double>();
      for (std::size_t i = 0; i < kLossNames.size(); ++i) {
        series[i].x.push_back(e);
        series[i].y.push_back(rec["losses"][std::string(kLossNames[i])].get<double>());
      }
      series.back().x.push_back(e);
      series.back().y.push_back(rec["total"].get<double>());
    }
    plot::line_chart(dir / "training_curves.png", "Training losses per epoch", series, true);
    written.push_back("training_curves.png");

    if (!data_root.empty()) {
      const LiftingModel model = load_checkpoint(fs::path(run_dir) / "final.vbckpt");
      const auto data = prepare_sequences(load_data(data_root, split, err), model.bones());
      const auto& seq = data.front();
      const Sequence3 pred = predict_sequence(model, seq, c.seed.value_or(0));
      const Sequence3 gt = to_sequence3(seq.gt_relative);
      plot::Series trace{seq.sequence_id, {}, {}};
      const auto j = static_cast<std::size_t>(gt.front().rows());
      std::vector<double> per_joint(j, 0.0);
      for (std::size_t f = 0; f < gt.size(); ++f) {
        const Eigen::VectorXd e = (pred[f] - gt[f]).rowwise().norm();
        trace.x.push_back(static_cast<double>(f));
        trace.y.push_back(e.mean());
        for (std::size_t k = 0; k < j; ++k) per_joint[k] += e(static_cast<Eigen::Index>(k)) / gt.size();
      }
      plot::line_chart(dir / "frame_error.png", "Per-frame MPJPE (mm)", {trace});
      plot::bar_chart(dir / "joint_error.png", "Per-joint error (mm)",
                      default_topology().joint_names(), per_joint);
      written.push_back("frame_error.png");
      written.push_back("joint_error.png");
    }
  }
  projection_cases_plot(dir / "projection_cases.png");
  written.push_back("projection_cases.png");
  write_manifest(dir, "plot", {{"run", run_dir}, {"data", data_root}, {"split", split}},
                 c.seed.value_or(0), written);
  for (const auto& w : written) out << (dir / w).string() << "\n";
  return 0;
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lifting 2D keypoints to 3D with virtual bones", "vbones"};
  app.require_subcommand(1);
  app.set_version_flag("--version", VBONES_VERSION);

  Common c;
  std::string data_root, checkpoint, split = "test", pred, gt, joint, run_dir;
  int max_edges = 8, num_params = 64, batch = 8;
  double eps = 1e-3;
  bool verbose = false;

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  add_common(synth, c, true);

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd, c, true);
  add_model_flags(train_cmd, c);
  train_cmd->add_option("--data", data_root, "Dataset root")->required();
  train_cmd->add_flag("--verbose", verbose, "Print one line per epoch");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint or a prediction file");
  add_common(eval_cmd, c, true);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file");
  eval_cmd->add_option("--data", data_root, "Dataset root");
  eval_cmd->add_option("--split", split, "Dataset split")->check(CLI::IsMember({"train", "test"}));
  eval_cmd->add_option("--pred", pred, "Predicted pose file");
  eval_cmd->add_option("--gt", gt, "Ground-truth pose file");

  auto* ablate = app.add_subcommand("ablate", "Virtual bone and projection loss ablation");
  add_common(ablate, c, true);
  add_model_flags(ablate, c);
  ablate->add_option("--data", data_root, "Dataset root (default: synthesize from config)");

  auto* paths = app.add_subcommand("paths", "Print the bone paths from the root to a joint");
  paths->add_option("--config", c.config, "Virtual bone configuration")
      ->check(CLI::IsMember({"VB0", "VB5", "VB10", "VB13", "VB23"}));
  paths->add_option("--joint", joint, "Target joint name")->required();
  paths->add_option("--max-edges", max_edges, "Maximum path length")->check(CLI::NonNegativeNumber);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the training objective");
  add_common(grad, c, false);
  add_model_flags(grad, c);
  grad->add_option("--params", num_params, "Number of probed parameters")->check(CLI::PositiveNumber);
  grad->add_option("--eps", eps, "Finite-difference step");
  grad->add_option("--batch", batch, "Batch size")->check(CLI::PositiveNumber);

  auto* plot_cmd = app.add_subcommand("plot", "Render training curves and error traces");
  add_common(plot_cmd, c, true);
  plot_cmd->add_option("--run", run_dir, "Training output directory");
  plot_cmd->add_option("--data", data_root, "Dataset root for error traces");
  plot_cmd->add_option("--split", split, "Dataset split")->check(CLI::IsMember({"train", "test"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << VBONES_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: code=usage msg=" << one_line(e.what()) << "\n" << app.help();
    return 2;
  }

  try {
    apply_threads();
    if (*synth) return cmd_synth(c, out);
    if (*train_cmd) return cmd_train(c, data_root, verbose, out, err);
    if (*eval_cmd) return cmd_eval(c, checkpoint, data_root, split, pred, gt, out, err);
    if (*ablate) return cmd_ablate(c, data_root, out, err);
    if (*paths) return cmd_paths(c.config, joint, max_edges, out);
    if (*grad) return cmd_gradcheck(c, num_params, eps, batch, out);
    if (*plot_cmd) return cmd_plot(c, run_dir, data_root, split, out, err);
  } catch (const Error& e) {
    err << "error: code=" << to_string(e.kind()) << " msg=" << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: code=internal msg=" << one_line(e.what()) << "\n";
    return 1;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace vbones::cli
