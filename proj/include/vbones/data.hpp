#pragma once

#include "vbones/geometry.hpp"
#include "vbones/skeleton.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace vbones {

// Parameters of a forward-kinematic synthetic performer seen by one camera.
struct SyntheticMotionSpec {
  int num_frames = 512;
  double frame_rate = 50.0;
  // One length per real bone, mm, in real-bone order.
  std::vector<double> bone_lengths = default_bone_lengths();
  // Joint angles are cubic (Catmull-Rom) curves through random waypoints.
  double angle_amplitude = 0.6;       // rad, scaled per bone group
  int waypoint_spacing = 25;          // frames between waypoints
  double max_angular_velocity = 0.05; // rad/frame bound on waypoint steps
  CameraIntrinsics camera{1145.0, 1145.0, 512.0, 515.0};
  double root_depth = 5000.0;         // mm along the optical axis
  double root_wander = 300.0;         // mm lateral/depth wander amplitude
  double yaw_amplitude = 0.8;         // rad around facing the camera
  double noise_sigma_2d = 0.0;        // pixels
  std::uint64_t seed = 0;

  void validate() const;
  static std::vector<double> default_bone_lengths();
};

nlohmann::json to_json(const SyntheticMotionSpec& spec);
SyntheticMotionSpec synthetic_spec_from_json(const nlohmann::json& doc);

// 3D joints (camera frame, mm), their projection plus Gaussian pixel noise,
// and the camera. Deterministic in spec.seed.
PoseSequence generate_synthetic(const SyntheticMotionSpec& spec);

struct SequenceEntry {
  std::string sequence_id;  // "<subject>/<action>.<camera>"
  std::string subject;
  std::string action;
  std::string camera_id;
  int frame_begin = 0;
  int frame_end = 0;  // exclusive
  std::filesystem::path path;
};

struct DatasetIndex {
  std::string split;
  std::vector<SequenceEntry> entries;
  std::vector<std::string> warnings;
};

const std::vector<std::string>& split_subjects(const std::string& split);

// Scans root/<subject>/<action>.<camera>.vpose for the subjects of `split`
// ("train" or "test"), sorted by subject, action, camera.
DatasetIndex ingest_h36m_format(const std::filesystem::path& root, const std::string& split);

nlohmann::json to_json(const DatasetIndex& index);
void write_index(const std::filesystem::path& root, const std::vector<DatasetIndex>& splits);

// Pixel -> ((u - u0) / fx, (v - v0) / fy) and back.
Pose2 normalize_2d(const Pose2& joints2d, const CameraIntrinsics& camera);
Pose2 denormalize_2d(const Pose2& normalized, const CameraIntrinsics& camera);

// Uniform in [0, bound) without modulo bias; portable across standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound);
// Standard normal via Box-Muller on uniform01.
double standard_normal(std::mt19937_64& rng);

// f_len distinct frame indices, sorted ascending.
std::vector<int> sample_random_frames(int num_frames, int f_len, std::uint64_t seed);
std::vector<int> sample_random_frames(int num_frames, int f_len, std::mt19937_64& rng);

struct FrameWindow {
  int middle = 0;
  std::vector<int> frames;  // receptive_field indices, edge-replicated
  bool padded = false;
};

// One window per frame, centred on it, replicate-padded at the sequence ends.
std::vector<FrameWindow> sliding_windows(int num_frames, int receptive_field);
std::vector<int> window_frames(int num_frames, int middle, int receptive_field);

// Human3.6M action names used to label synthetic sequences.
const std::vector<std::string>& action_names();

// A sequence plus the labels the trainer and evaluator need.
struct LabeledSequence {
  std::string sequence_id;
  std::string subject;
  std::string action;
  std::string camera_id;
  PoseSequence sequence;
};

std::vector<LabeledSequence> load_split(const DatasetIndex& index);

// A synthetic benchmark laid out like the real one: every subject of a split
// gets `sequences_per_subject` performances with its own bone proportions.
struct SyntheticDatasetSpec {
  int sequences_per_subject = 2;
  SyntheticMotionSpec motion;
  double length_jitter = 0.08;  // relative per-subject bone length spread
  double train_noise_sigma = 0.0;
  double test_noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SyntheticDatasetSpec& spec);
SyntheticDatasetSpec synthetic_dataset_from_json(const nlohmann::json& doc);

std::vector<LabeledSequence> synthesize_split(const SyntheticDatasetSpec& spec, const std::string& split);

// Writes root/<subject>/<action>.<camera>.vpose for both splits plus index.json.
void write_synthetic_dataset(const std::filesystem::path& root, const SyntheticDatasetSpec& spec);

// SplitMix64 finaliser, for deriving independent seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace vbones
