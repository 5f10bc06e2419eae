#pragma once

#include "vbones/types.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <string>

namespace vbones {

// All functions take [T][J x 3] sequences in mm. Alignment-based protocols
// align each frame independently.
double mpjpe(const Sequence3& pred, const Sequence3& gt);
// Similarity-aligned (rotation, translation, scale). Frames whose prediction
// collapses to a point fall back to translation-only and are counted in
// `degenerate_frames`.
double p_mpjpe(const Sequence3& pred, const Sequence3& gt, int* degenerate_frames = nullptr);
// Least-squares uniform scale s = <p, g> / <p, p>; s = 1 when p is all zero.
double n_mpjpe(const Sequence3& pred, const Sequence3& gt, int* degenerate_frames = nullptr);
// Error of first temporal differences, mm per frame.
double mpjve(const Sequence3& pred, const Sequence3& gt);

// Best similarity transform of a single frame onto gt, applied to pred.
Pose3 procrustes_align(const Pose3& pred, const Pose3& gt, bool* degenerate = nullptr);

struct ProtocolValues {
  double mpjpe = 0.0;
  double p_mpjpe = 0.0;
  double n_mpjpe = 0.0;
  double mpjve = 0.0;
  long frames = 0;
  long velocity_frames = 0;
};

class EvalReport {
 public:
  // Adds one sequence under `action`; sums are frame-weighted.
  void add_sequence(const std::string& action, const Sequence3& pred, const Sequence3& gt);

  const std::map<std::string, ProtocolValues>& per_action() const noexcept { return actions_; }
  ProtocolValues aggregate() const;
  int degenerate_frames() const noexcept { return degenerate_; }

  nlohmann::json to_json() const;
  // One row per protocol, one column per action followed by Avg.
  std::string to_table() const;

 private:
  struct Sums {
    double p1 = 0, p2 = 0, p3 = 0, vel = 0;
    long frames = 0, velocity_frames = 0;
  };
  static ProtocolValues finish(const Sums& s);

  std::map<std::string, Sums> sums_;
  std::map<std::string, ProtocolValues> actions_;
  int degenerate_ = 0;
};

}  // namespace vbones
