#pragma once

#include "vbones/autodiff.hpp"
#include "vbones/data.hpp"
#include "vbones/losses.hpp"
#include "vbones/metrics.hpp"
#include "vbones/nets.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace vbones {

struct TrainingConfig {
  int epochs = 60;
  int batch_size = 2048;
  double lr = 0.001;
  double lr_decay_per_epoch = 0.95;
  LossWeights weights;
  std::uint64_t seed = 0;
  bool deterministic = true;
  std::string device = "cpu";
  // Turns both projection consistency terms on or off.
  bool projection_consistency = true;
  // Write epoch_NNNN checkpoints every this many epochs (0: only the latest).
  int checkpoint_interval = 0;

  void validate() const;
  // Full-scale batch size for a given receptive field.
  static int default_batch_size(int receptive_field) { return receptive_field >= 243 ? 1024 : 2048; }
};

nlohmann::json to_json(const TrainingConfig& config);
TrainingConfig training_config_from_json(const nlohmann::json& doc);

// lr * decay^epoch.
double lr_at_epoch(const TrainingConfig& config, int epoch);

// Flattened per-frame tensors for one sequence, prepared for a bone set.
struct PreparedSequence {
  std::string sequence_id;
  std::string action;
  std::string camera_id;
  CameraIntrinsics camera;
  ad::Matrix inputs;      // [T, 2J] normalised 2D
  ad::Matrix pixels;      // [T, 2J]
  ad::Matrix gt_relative; // [T, 3J] root-relative mm
  ad::Matrix roots;       // [T, 3] camera-frame root, mm
  ad::Matrix lengths;     // [T, R] real bone lengths
  ad::Matrix directions;  // [T, 3B] unit bone directions

  int num_frames() const { return static_cast<int>(inputs.rows()); }
};

PreparedSequence prepare_sequence(const LabeledSequence& seq, const BoneSet& bones);
std::vector<PreparedSequence> prepare_sequences(const std::vector<LabeledSequence>& seqs,
                                                const BoneSet& bones);

struct WindowLabel {
  int sequence = 0;  // index into the prepared sequence list
  std::string camera_id;
  int middle = 0;

  friend bool operator==(const WindowLabel&, const WindowLabel&) = default;
};

// (i, j) with windows i and j from the same sequence and camera and
// middle(j) = middle(i) + 1, sorted by (i, j).
std::vector<std::pair<int, int>> pair_middle_frames(const std::vector<WindowLabel>& windows);

// Adds the camera-frame root of every frame to each joint. [T][J x 3] form.
Sequence3 anchor_root(const Sequence3& pred_root_relative, const Eigen::MatrixXd& gt_root_camera);

struct Batch {
  ForwardInputs inputs;
  std::vector<WindowLabel> labels;
  std::vector<std::pair<int, int>> pairs;
  ad::Matrix gt_current;        // [N, 3J]
  ad::Matrix gt_random;         // [N*f, 3J]
  ad::Matrix gt_lengths;        // [N, R]
  ad::Matrix gt_directions;     // [N, 3B]
  ad::Matrix roots_current;     // [N, 3J] root tiled over joints
  ad::Matrix roots_random;      // [N*f, 3J]
  ad::Matrix pixels_current;    // [N, 2J]
  ad::Matrix pixels_random;     // [N*f, 2J]
  ad::Matrix intrinsics_current;  // [N, 4]
  ad::Matrix intrinsics_random;   // [N*f, 4]

  Eigen::Index size() const { return inputs.current.rows(); }
};

struct SampleRef {
  int sequence = 0;
  int frame = 0;
};

Batch assemble_batch(const std::vector<PreparedSequence>& data, const std::vector<SampleRef>& samples,
                     const ModelConfig& config, std::mt19937_64& rng);

// Seeded epoch order: consecutive frame pairs of each sequence are shuffled
// as units so that paired middle frames share a batch.
std::vector<std::vector<SampleRef>> epoch_batches(const std::vector<PreparedSequence>& data,
                                                  int batch_size, std::mt19937_64& rng);

struct BatchLoss {
  ad::Var total;
  LossComponents components;  // unweighted
};

// The weighted objective on one batch. Projection terms are skipped (and
// reported as 0) when their weight is zero.
BatchLoss batch_loss(ad::Graph& g, const LiftingModel& model, const std::vector<ad::Var>& params,
                     const Batch& batch, const LossWeights& weights);

class Adam {
 public:
  explicit Adam(const ParamStore& params, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(ParamStore& params, const std::vector<ad::Matrix>& grads, double lr);
  long steps() const noexcept { return t_; }

 private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<ad::Matrix> m_, v_;
};

struct EpochSummary {
  int epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  LossComponents components;  // batch means
};

struct TrainResult {
  std::vector<EpochSummary> epochs;
  long steps = 0;
};

struct TrainOptions {
  std::optional<std::filesystem::path> out_dir;  // checkpoints, log, dumps
  // Called after every epoch; return false to stop early.
  std::function<bool(const EpochSummary&)> on_epoch;
  bool quiet = true;
};

TrainResult train(LiftingModel& model, const std::vector<PreparedSequence>& data,
                  const TrainingConfig& config, const TrainOptions& options = {});

// Root-relative predictions for every frame of a sequence. Random frames of
// the length branch are drawn from `seed`.
Sequence3 predict_sequence(const LiftingModel& model, const PreparedSequence& seq,
                           std::uint64_t seed = 0);

EvalReport evaluate(const LiftingModel& model, const std::vector<PreparedSequence>& data,
                    std::uint64_t seed = 0);

Sequence3 to_sequence3(const ad::Matrix& flat);

struct GradCheckProbe {
  std::string param;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<GradCheckProbe> probes;
};

using ParamLoss = std::function<ad::Var(ad::Graph&, const std::vector<ad::Var>&)>;

// Fourth-order central differences against the tape on a random subset of scalars.
// Relative error is |a - n| / max(|a|, |n|, floor). Throws CheckFailure listing
// the offending parameters when the maximum exceeds `tolerance`.
GradCheckResult gradient_check(std::vector<ad::Matrix>& params, const std::vector<std::string>& names,
                               const ParamLoss& loss, int num_params = 64, double eps = 1e-5,
                               std::uint64_t seed = 0, double tolerance = 1e-4,
                               double floor = 1e-6);
GradCheckResult gradient_check(LiftingModel& model, const ParamLoss& loss, int num_params = 64,
                               double eps = 1e-5, std::uint64_t seed = 0, double tolerance = 1e-4);

}  // namespace vbones
