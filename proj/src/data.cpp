#include "vbones/data.hpp"

#include "vbones/error.hpp"
#include "vbones/nets.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <regex>

namespace vbones {

std::vector<double> SyntheticMotionSpec::default_bone_lengths() {
  // Typical adult proportions, roughly 1.7 m tall.
  return {132.0, 442.0, 454.0, 132.0, 442.0, 454.0, 233.0, 257.0,
          121.0, 115.0, 151.0, 278.0, 252.0, 151.0, 278.0, 252.0};
}

void SyntheticMotionSpec::validate() const {
  require(num_frames >= 1, ErrorKind::Validation, "num_frames must be >= 1");
  require(frame_rate > 0.0, ErrorKind::Validation, "frame_rate must be positive");
  require(bone_lengths.size() == 16, ErrorKind::Validation, "need 16 real bone lengths");
  for (double l : bone_lengths) {
    require(std::isfinite(l) && l > 0.0, ErrorKind::Validation, "bone lengths must be positive");
  }
  require(angle_amplitude >= 0.0 && std::isfinite(angle_amplitude), ErrorKind::Validation,
          "angle_amplitude must be >= 0");
  require(waypoint_spacing >= 1, ErrorKind::Validation, "waypoint_spacing must be >= 1");
  require(max_angular_velocity > 0.0, ErrorKind::Validation, "max_angular_velocity must be > 0");
  require(noise_sigma_2d >= 0.0 && std::isfinite(noise_sigma_2d), ErrorKind::Validation,
          "noise_sigma_2d must be >= 0");
  require(root_depth > 0.0, ErrorKind::Validation, "root_depth must be positive");
  camera.validate();
}

nlohmann::json to_json(const SyntheticMotionSpec& s) {
  return {{"num_frames", s.num_frames},
          {"frame_rate", s.frame_rate},
          {"bone_lengths", s.bone_lengths},
          {"angle_amplitude", s.angle_amplitude},
          {"waypoint_spacing", s.waypoint_spacing},
          {"max_angular_velocity", s.max_angular_velocity},
          {"camera", to_json(s.camera)},
          {"root_depth", s.root_depth},
          {"root_wander", s.root_wander},
          {"yaw_amplitude", s.yaw_amplitude},
          {"noise_sigma_2d", s.noise_sigma_2d},
          {"seed", s.seed}};
}

SyntheticMotionSpec synthetic_spec_from_json(const nlohmann::json& doc) {
  SyntheticMotionSpec s;
  try {
    s.num_frames = doc.value("num_frames", s.num_frames);
    s.frame_rate = doc.value("frame_rate", s.frame_rate);
    s.bone_lengths = doc.value("bone_lengths", s.bone_lengths);
    s.angle_amplitude = doc.value("angle_amplitude", s.angle_amplitude);
    s.waypoint_spacing = doc.value("waypoint_spacing", s.waypoint_spacing);
    s.max_angular_velocity = doc.value("max_angular_velocity", s.max_angular_velocity);
    if (doc.contains("camera")) s.camera = camera_from_json(doc["camera"]);
    s.root_depth = doc.value("root_depth", s.root_depth);
    s.root_wander = doc.value("root_wander", s.root_wander);
    s.yaw_amplitude = doc.value("yaw_amplitude", s.yaw_amplitude);
    s.noise_sigma_2d = doc.value("noise_sigma_2d", s.noise_sigma_2d);
    s.seed = doc.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Validation, std::string("malformed synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  require(bound > 0, ErrorKind::Internal, "bounded() needs a positive bound");
  // Lemire's multiply-shift with rejection.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const unsigned __int128 m = static_cast<unsigned __int128>(rng()) * bound;
    if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
  }
}

double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - uniform01(rng());  // (0, 1]
  const double u2 = uniform01(rng());
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

// Body frame: x to the performer's left, y up, z forward.
const std::array<Eigen::Vector3d, 16>& rest_directions() {
  static const std::array<Eigen::Vector3d, 16> dirs = [] {
    const Eigen::Vector3d left(1, 0, 0), right(-1, 0, 0), up(0, 1, 0), down(0, -1, 0);
    return std::array<Eigen::Vector3d, 16>{
        right, down, down,                                   // right leg
        left,  down, down,                                   // left leg
        up,    up,   up,   Eigen::Vector3d(0, 1, 0.25).normalized(),  // spine .. head
        left,  down, down,                                   // left arm
        right, down, down};                                  // right arm
  }();
  return dirs;
}

// Per-bone angle scale: hips and torso move less than limbs.
constexpr std::array<double, 16> kBoneMobility = {0.3, 1.0, 0.8, 0.3, 1.0, 0.8, 0.3, 0.3,
                                                  0.3, 0.4, 0.3, 1.2, 1.0, 0.3, 1.2, 1.0};

// Catmull-Rom curve through random waypoints with bounded step size.
std::vector<double> smooth_curve(std::mt19937_64& rng, int frames, int spacing, double amplitude,
                                 double max_step) {
  const int n_way = frames / spacing + 4;
  std::vector<double> way(static_cast<std::size_t>(n_way));
  double prev = amplitude * (2.0 * uniform01(rng()) - 1.0);
  for (auto& w : way) {
    double target = amplitude * (2.0 * uniform01(rng()) - 1.0);
    const double limit = max_step * spacing;
    target = std::clamp(target, prev - limit, prev + limit);
    w = prev = target;
  }
  std::vector<double> out(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    const int k = t / spacing + 1;
    const double s = static_cast<double>(t % spacing) / spacing;
    const double p0 = way[k - 1], p1 = way[k], p2 = way[k + 1], p3 = way[k + 2];
    out[static_cast<std::size_t>(t)] =
        0.5 * ((2 * p1) + (-p0 + p2) * s + (2 * p0 - 5 * p1 + 4 * p2 - p3) * s * s +
               (-p0 + 3 * p1 - 3 * p2 + p3) * s * s * s);
  }
  return out;
}

Eigen::Matrix3d euler(double rx, double ry, double rz) {
  return (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

Sequence3 forward_kinematics(const SyntheticMotionSpec& spec, std::mt19937_64& rng,
                             double root_depth) {
  const auto topo = default_topology();
  const int frames = spec.num_frames;
  const int bones = 16;

  std::vector<std::array<std::vector<double>, 3>> angles(bones);
  for (int b = 0; b < bones; ++b) {
    for (int a = 0; a < 3; ++a) {
      angles[b][a] = smooth_curve(rng, frames, spec.waypoint_spacing,
                                  spec.angle_amplitude * kBoneMobility[b],
                                  spec.max_angular_velocity);
    }
  }
  std::array<std::vector<double>, 3> root_offset;
  for (auto& c : root_offset) {
    c = smooth_curve(rng, frames, spec.waypoint_spacing * 2, spec.root_wander,
                     spec.max_angular_velocity * 100.0);
  }
  const auto yaw = smooth_curve(rng, frames, spec.waypoint_spacing * 2, spec.yaw_amplitude,
                                spec.max_angular_velocity);

  // Body y-up/z-forward to camera y-down/z-away, performer facing the camera.
  const Eigen::Matrix3d body_to_camera = Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX())
                                             .toRotationMatrix();
  const auto& rest = rest_directions();

  Sequence3 out;
  out.reserve(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    const auto ts = static_cast<std::size_t>(t);
    Pose3 pose(topo.num_joints(), 3);
    const Eigen::Vector3d root(root_offset[0][ts], 0.3 * root_offset[1][ts],
                               root_depth + root_offset[2][ts]);
    pose.row(topo.root()) = root.transpose();
    const Eigen::Matrix3d global =
        body_to_camera * Eigen::AngleAxisd(yaw[ts], Eigen::Vector3d::UnitY()).toRotationMatrix();

    std::vector<Eigen::Matrix3d> frame(topo.num_joints(), global);
    // Real bone i ends at joint i + 1 and parents precede children.
    for (int b = 0; b < bones; ++b) {
      const Bone& bone = topo.real_bones()[static_cast<std::size_t>(b)];
      frame[bone.child] = frame[bone.parent] * euler(angles[b][0][ts], angles[b][1][ts], angles[b][2][ts]);
      const Eigen::Vector3d v = frame[bone.child] * rest[b] * spec.bone_lengths[static_cast<std::size_t>(b)];
      pose.row(bone.child) = pose.row(bone.parent) + v.transpose();
    }
    out.push_back(std::move(pose));
  }
  return out;
}

}  // namespace

PoseSequence generate_synthetic(const SyntheticMotionSpec& spec) {
  spec.validate();
  constexpr double kMinDepth = 100.0;
  double depth = spec.root_depth;
  for (int attempt = 0; attempt < 100; ++attempt, depth += 500.0) {
    std::mt19937_64 rng(spec.seed);
    Sequence3 joints = forward_kinematics(spec, rng, depth);
    bool in_front = true;
    for (const auto& pose : joints) in_front = in_front && (pose.col(2).array() > kMinDepth).all();
    if (!in_front) continue;

    PoseSequence seq;
    seq.frame_rate = spec.frame_rate;
    seq.camera = spec.camera;
    Sequence2 pixels = project_sequence(joints, spec.camera);
    if (spec.noise_sigma_2d > 0.0) {
      std::mt19937_64 noise_rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
      for (auto& p : pixels) {
        for (Eigen::Index i = 0; i < p.size(); ++i) {
          p.data()[i] += spec.noise_sigma_2d * standard_normal(noise_rng);
        }
      }
    }
    seq.joints3d = std::move(joints);
    seq.joints2d = std::move(pixels);
    return seq;
  }
  fail(ErrorKind::Validation, "synthetic performer stays behind the camera after 100 attempts");
}

const std::vector<std::string>& split_subjects(const std::string& split) {
  static const std::vector<std::string> train = {"S1", "S5", "S6", "S7", "S8"};
  static const std::vector<std::string> test = {"S9", "S11"};
  if (split == "train") return train;
  if (split == "test") return test;
  fail(ErrorKind::Validation, "unknown split '" + split + "' (expected train or test)");
}

DatasetIndex ingest_h36m_format(const std::filesystem::path& root, const std::string& split) {
  namespace fs = std::filesystem;
  DatasetIndex index;
  index.split = split;
  const auto& subjects = split_subjects(split);
  if (!fs::is_directory(root)) {
    fail(ErrorKind::Ingestion, "dataset root " + root.string() + " is not a directory");
  }
  static const std::regex name_re(R"(^(.+)\.([^.]+)\.vpose$)");
  for (const auto& subject : subjects) {
    const fs::path dir = root / subject;
    if (!fs::is_directory(dir)) continue;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".vpose") files.push_back(e.path());
    }
    std::vector<SequenceEntry> found;
    for (const auto& file : files) {
      std::smatch m;
      const std::string fname = file.filename().string();
      if (!std::regex_match(fname, m, name_re)) {
        index.warnings.push_back("skipping unrecognised file " + file.string());
        continue;
      }
      SequenceEntry e;
      e.subject = subject;
      e.action = m[1];
      e.camera_id = m[2];
      e.sequence_id = subject + "/" + e.action + "." + e.camera_id;
      e.path = file;
      nlohmann::json meta;
      PoseSequence seq;
      try {
        seq = load_pose_sequence(file, &meta);
      } catch (const Error& err) {
        fail(ErrorKind::Ingestion, "sequence " + e.sequence_id + ": " + err.what());
      }
      require(seq.camera.has_value(), ErrorKind::Ingestion,
              "sequence " + e.sequence_id + " has no camera intrinsics");
      require(seq.joints2d.has_value() && seq.joints3d.has_value(), ErrorKind::Ingestion,
              "sequence " + e.sequence_id + " needs both 2D keypoints and 3D ground truth");
      e.frame_begin = 0;
      e.frame_end = static_cast<int>(seq.num_frames());
      found.push_back(std::move(e));
    }
    std::sort(found.begin(), found.end(), [](const SequenceEntry& a, const SequenceEntry& b) {
      return std::tie(a.action, a.camera_id) < std::tie(b.action, b.camera_id);
    });
    index.entries.insert(index.entries.end(), found.begin(), found.end());
  }
  if (index.entries.empty()) {
    index.warnings.push_back("no " + split + " sequences found under " + root.string());
  }
  return index;
}

nlohmann::json to_json(const DatasetIndex& index) {
  auto entries = nlohmann::json::array();
  for (const auto& e : index.entries) {
    entries.push_back({{"sequence_id", e.sequence_id},
                       {"subject", e.subject},
                       {"action", e.action},
                       {"camera_id", e.camera_id},
                       {"frames", {e.frame_begin, e.frame_end}},
                       {"path", e.path.string()}});
  }
  return {{"split", index.split}, {"sequences", std::move(entries)}};
}

void write_index(const std::filesystem::path& root, const std::vector<DatasetIndex>& splits) {
  nlohmann::json doc;
  for (const auto& s : splits) doc[s.split] = to_json(s)["sequences"];
  std::ofstream out(root / "index.json");
  require(out.good(), ErrorKind::Io, "cannot write index.json under " + root.string());
  out << doc.dump(2) << "\n";
}

Pose2 normalize_2d(const Pose2& joints2d, const CameraIntrinsics& camera) {
  camera.validate();
  Pose2 out(joints2d.rows(), 2);
  out.col(0) = (joints2d.col(0).array() - camera.u0) / camera.fx;
  out.col(1) = (joints2d.col(1).array() - camera.v0) / camera.fy;
  return out;
}

Pose2 denormalize_2d(const Pose2& normalized, const CameraIntrinsics& camera) {
  camera.validate();
  Pose2 out(normalized.rows(), 2);
  out.col(0) = normalized.col(0).array() * camera.fx + camera.u0;
  out.col(1) = normalized.col(1).array() * camera.fy + camera.v0;
  return out;
}

std::vector<int> sample_random_frames(int num_frames, int f_len, std::mt19937_64& rng) {
  require(f_len >= 1, ErrorKind::Validation, "f_len must be >= 1");
  require(num_frames >= f_len, ErrorKind::Validation,
          "sequence has fewer frames than requested random samples");
  // Floyd's subset sampling: O(f_len) draws regardless of sequence length.
  std::vector<int> chosen;
  chosen.reserve(static_cast<std::size_t>(f_len));
  for (int j = num_frames - f_len; j < num_frames; ++j) {
    const int t = static_cast<int>(bounded(rng, static_cast<std::uint64_t>(j) + 1));
    const bool taken = std::find(chosen.begin(), chosen.end(), t) != chosen.end();
    chosen.push_back(taken ? j : t);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::vector<int> sample_random_frames(int num_frames, int f_len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_random_frames(num_frames, f_len, rng);
}

std::vector<int> window_frames(int num_frames, int middle, int receptive_field) {
  const int half = receptive_field / 2;
  std::vector<int> frames(static_cast<std::size_t>(receptive_field));
  for (int k = 0; k < receptive_field; ++k) {
    frames[static_cast<std::size_t>(k)] = std::clamp(middle - half + k, 0, num_frames - 1);
  }
  return frames;
}

std::vector<FrameWindow> sliding_windows(int num_frames, int receptive_field) {
  require(receptive_field >= 1 && receptive_field % 2 == 1, ErrorKind::Validation,
          "receptive_field must be odd");
  require(num_frames >= receptive_field, ErrorKind::Validation,
          "sequence is shorter than the receptive field");
  const int half = receptive_field / 2;
  std::vector<FrameWindow> out;
  out.reserve(static_cast<std::size_t>(num_frames));
  for (int t = 0; t < num_frames; ++t) {
    FrameWindow w;
    w.middle = t;
    w.frames = window_frames(num_frames, t, receptive_field);
    w.padded = t - half < 0 || t + half >= num_frames;
    out.push_back(std::move(w));
  }
  return out;
}

const std::vector<std::string>& action_names() {
  static const std::vector<std::string> names = {
      "Directions", "Discussion", "Eating",  "Greeting", "Phoning",
      "Photo",      "Posing",     "Purchases", "Sitting", "SittingDown",
      "Smoking",    "Waiting",    "WalkDog", "Walking",  "WalkTogether"};
  return names;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<LabeledSequence> load_split(const DatasetIndex& index) {
  std::vector<LabeledSequence> out;
  for (const auto& e : index.entries) {
    LabeledSequence s;
    s.sequence_id = e.sequence_id;
    s.subject = e.subject;
    s.action = e.action;
    s.camera_id = e.camera_id;
    s.sequence = load_pose_sequence(e.path);
    out.push_back(std::move(s));
  }
  return out;
}

void SyntheticDatasetSpec::validate() const {
  require(sequences_per_subject >= 1, ErrorKind::Validation, "sequences_per_subject must be >= 1");
  require(length_jitter >= 0.0 && length_jitter < 0.5, ErrorKind::Validation,
          "length_jitter must be in [0, 0.5)");
  require(train_noise_sigma >= 0.0 && test_noise_sigma >= 0.0, ErrorKind::Validation,
          "noise sigma must be >= 0");
  motion.validate();
}

nlohmann::json to_json(const SyntheticDatasetSpec& s) {
  return {{"sequences_per_subject", s.sequences_per_subject},
          {"motion", to_json(s.motion)},
          {"length_jitter", s.length_jitter},
          {"train_noise_sigma", s.train_noise_sigma},
          {"test_noise_sigma", s.test_noise_sigma},
          {"seed", s.seed}};
}

SyntheticDatasetSpec synthetic_dataset_from_json(const nlohmann::json& doc) {
  SyntheticDatasetSpec s;
  try {
    s.sequences_per_subject = doc.value("sequences_per_subject", s.sequences_per_subject);
    if (doc.contains("motion")) s.motion = synthetic_spec_from_json(doc["motion"]);
    s.length_jitter = doc.value("length_jitter", s.length_jitter);
    s.train_noise_sigma = doc.value("train_noise_sigma", s.train_noise_sigma);
    s.test_noise_sigma = doc.value("test_noise_sigma", s.test_noise_sigma);
    s.seed = doc.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Validation, std::string("malformed synthetic dataset spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<LabeledSequence> synthesize_split(const SyntheticDatasetSpec& spec, const std::string& split) {
  spec.validate();
  const auto& subjects = split_subjects(split);
  // Subject numbers keep seeds stable whichever split is generated first.
  std::vector<LabeledSequence> out;
  for (const auto& subject : subjects) {
    const auto subject_no = static_cast<std::uint64_t>(std::stoi(subject.substr(1)));
    std::mt19937_64 body_rng(mix_seed(spec.seed, subject_no * 1000));
    SyntheticMotionSpec motion = spec.motion;
    const double overall = 1.0 + spec.length_jitter * (2.0 * uniform01(body_rng()) - 1.0);
    for (auto& l : motion.bone_lengths) {
      l *= overall * (1.0 + 0.5 * spec.length_jitter * (2.0 * uniform01(body_rng()) - 1.0));
    }
    motion.noise_sigma_2d = split == "train" ? spec.train_noise_sigma : spec.test_noise_sigma;
    for (int k = 0; k < spec.sequences_per_subject; ++k) {
      motion.seed = mix_seed(spec.seed, subject_no * 1000 + static_cast<std::uint64_t>(k) + 1);
      LabeledSequence ls;
      ls.subject = subject;
      const auto& actions = action_names();
      ls.action = actions[static_cast<std::size_t>(k) % actions.size()];
      if (k >= static_cast<int>(actions.size())) ls.action += "_" + std::to_string(k / actions.size());
      ls.camera_id = "cam0";
      ls.sequence_id = subject + "/" + ls.action + "." + ls.camera_id;
      ls.sequence = generate_synthetic(motion);
      out.push_back(std::move(ls));
    }
  }
  return out;
}

void write_synthetic_dataset(const std::filesystem::path& root, const SyntheticDatasetSpec& spec) {
  std::vector<DatasetIndex> indices;
  for (const std::string split : {"train", "test"}) {
    for (const auto& ls : synthesize_split(spec, split)) {
      std::filesystem::create_directories(root / ls.subject);
      save_pose_sequence(root / ls.subject / (ls.action + "." + ls.camera_id + ".vpose"), ls.sequence,
                         {{"sequence_id", ls.sequence_id}, {"synthetic", true}});
    }
    indices.push_back(ingest_h36m_format(root, split));
  }
  write_index(root, indices);
}

}  // namespace vbones
