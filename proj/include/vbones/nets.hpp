#pragma once

#include "vbones/autodiff.hpp"
#include "vbones/geometry.hpp"
#include "vbones/skeleton.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vbones {

struct ModelConfig {
  int num_joints = 17;
  std::string virtual_config = "VB23";
  int num_random_frames = 10;  // f_len
  int receptive_field = 9;
  int hidden_width = 1024;  // c
  int num_residual_blocks = 2;  // n
  std::uint64_t seed = 0;

  void validate() const;
  // Filter dilations of the temporal stack, one entry per width-3 layer.
  std::vector<int> dilations() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc);

// Named parameter matrices in a fixed creation order.
class ParamStore {
 public:
  ad::Matrix& add(const std::string& name, ad::Matrix value);

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  ad::Matrix& value(std::size_t i) { return values_.at(i); }
  const ad::Matrix& value(std::size_t i) const { return values_.at(i); }
  std::size_t index(const std::string& name) const;
  ad::Matrix& operator[](const std::string& name) { return values_.at(index(name)); }
  const ad::Matrix& operator[](const std::string& name) const { return values_.at(index(name)); }

  std::size_t num_scalars() const;

 private:
  std::vector<std::string> names_;
  std::vector<ad::Matrix> values_;
  std::map<std::string, std::size_t> lookup_;
};

struct LengthNetOutput {
  Sequence3 coarse3d_per_frame;              // [f_len][J x 3], root-relative mm
  Eigen::MatrixXd per_frame_real_lengths;    // [f_len, 16]
  Eigen::MatrixXd attention_weights;         // [f_len, 16]
  Eigen::VectorXd real_lengths;              // [16]
  Eigen::VectorXd virtual_lengths;           // [V]
  Pose3 coarse3d_current;                    // [J x 3]
};

struct DirectionOutput {
  BoneVectors directions;  // [16 + V, 3] for the window's middle frame
};

// Inputs for one batched forward pass; rows are camera-normalised 2D joints
// flattened to (x0, y0, x1, y1, ...).
struct ForwardInputs {
  ad::Matrix random_frames;  // [N * f_len, 2J]
  ad::Matrix current;        // [N, 2J]
  ad::Matrix windows;        // [N * receptive_field, 2J]
};

struct ForwardVars {
  ad::Var coarse_random;    // [N * f_len, 3J]
  ad::Var frame_lengths;    // [N * f_len, R]
  ad::Var attention;        // [N * f_len, R]
  ad::Var real_lengths;     // [N, R]
  ad::Var coarse_current;   // [N, 3J]
  ad::Var virtual_lengths;  // [N, V]
  ad::Var directions;       // [N, 3B]
  ad::Var joints;           // [N, 3J]
};

// Trainable lifting model: a per-frame coarse 3D trunk with attention over
// sampled frames for bone lengths, a dilated temporal convolution stack for
// bone directions, and a fully connected composer producing joints.
class LiftingModel {
 public:
  explicit LiftingModel(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  const BoneSet& bones() const noexcept { return bones_; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  // Binds every parameter into the graph, in store order; constants when
  // `trainable` is false.
  std::vector<ad::Var> bind(ad::Graph& g, bool trainable = true) const;

  ForwardVars forward(ad::Graph& g, const std::vector<ad::Var>& p,
                      const ForwardInputs& in) const;

  // Pieces of the pipeline, exposed for testing and for the per-sample API.
  ad::Var coarse_trunk(ad::Graph& g, const std::vector<ad::Var>& p, ad::Var x2d,
                       ad::Var* features = nullptr) const;
  ad::Var direction_net(ad::Graph& g, const std::vector<ad::Var>& p, ad::Var windows) const;
  ad::Var composer(ad::Graph& g, const std::vector<ad::Var>& p, ad::Var real_lengths,
                   ad::Var virtual_lengths, ad::Var directions) const;

 private:
  const ad::Var& at(const std::vector<ad::Var>& p, const std::string& name) const;

  ModelConfig config_;
  BoneSet bones_;
  ParamStore params_;
  ad::Matrix real_incidence_;     // [3J, 3R]
  ad::Matrix virtual_incidence_;  // [3J, 3V]
  ad::Matrix root_scatter_;       // [3(J-1), 3J]
  ad::Matrix input_transform_;    // [2J, 2J]
};

// Deterministic initialisation from (config, seed).
LiftingModel init_params(ModelConfig config, std::uint64_t seed);

LengthNetOutput length_net_forward(const Sequence2& x_random, const Pose2& x_current,
                                   const LiftingModel& model);
DirectionOutput direction_net_forward(const Sequence2& x_window, const LiftingModel& model);
Pose3 composer_forward(const Eigen::VectorXd& real_lengths, const Eigen::VectorXd& virtual_lengths,
                       const BoneVectors& directions, const LiftingModel& model);

void save_checkpoint(const std::filesystem::path& path, const LiftingModel& model,
                     const nlohmann::json& extra_meta = nlohmann::json::object());
LiftingModel load_checkpoint(const std::filesystem::path& path,
                             nlohmann::json* meta_out = nullptr);
// Rejects a checkpoint whose embedded config differs from `expected`.
LiftingModel load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected,
                             nlohmann::json* meta_out = nullptr);

// Uniform double in [0, 1) from a 64-bit engine, identical on every platform.
double uniform01(std::uint64_t bits) noexcept;

}  // namespace vbones
