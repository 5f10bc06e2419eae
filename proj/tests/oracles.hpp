#pragma once

// Independent reference computations used by the tests. Each one is written
// the slow, obvious way and shares no code with the library routine it checks.

#include "vbones/skeleton.hpp"
#include "vbones/types.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <vector>

namespace oracle {

using vbones::BonePath;
using vbones::PathStep;

// Every simple root->target path over the bone graph, by unordered DFS over
// an explicit edge list.
inline std::set<BonePath> all_simple_paths(const vbones::BoneSet& bones, int target, int max_edges) {
  const auto& list = bones.bones();
  const int root = bones.topology().root();
  std::set<BonePath> out;
  std::vector<bool> visited(bones.num_joints(), false);
  BonePath path;
  std::function<void(int)> dfs = [&](int at) {
    if (at == target) {
      out.insert(path);
      return;
    }
    if (static_cast<int>(path.size()) == max_edges) return;
    for (int b = static_cast<int>(list.size()) - 1; b >= 0; --b) {
      const auto& bone = list[static_cast<std::size_t>(b)];
      int next = -1, sign = 0;
      if (bone.parent == at) next = bone.child, sign = 1;
      else if (bone.child == at) next = bone.parent, sign = -1;
      if (next < 0 || visited[static_cast<std::size_t>(next)]) continue;
      visited[static_cast<std::size_t>(next)] = true;
      path.push_back({b, sign});
      dfs(next);
      path.pop_back();
      visited[static_cast<std::size_t>(next)] = false;
    }
  };
  visited[static_cast<std::size_t>(root)] = true;
  if (root == target) {
    out.insert(BonePath{});
    return out;
  }
  dfs(root);
  return out;
}

inline double mean_joint_distance(const vbones::Pose3& a, const vbones::Pose3& b) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < a.rows(); ++j) {
    double sq = 0.0;
    for (int d = 0; d < 3; ++d) sq += (a(j, d) - b(j, d)) * (a(j, d) - b(j, d));
    acc += std::sqrt(sq);
  }
  return acc / static_cast<double>(a.rows());
}

inline double mpjpe(const vbones::Sequence3& p, const vbones::Sequence3& g) {
  double acc = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) acc += mean_joint_distance(p[t], g[t]);
  return acc / static_cast<double>(p.size());
}

// Similarity alignment via Eigen's Umeyama solver.
inline double p_mpjpe(const vbones::Sequence3& p, const vbones::Sequence3& g) {
  double acc = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    const Eigen::Matrix3Xd src = p[t].transpose();
    const Eigen::Matrix3Xd dst = g[t].transpose();
    const Eigen::Matrix4d tf = Eigen::umeyama(src, dst, true);
    const Eigen::Matrix3Xd aligned = (tf.topLeftCorner<3, 3>() * src).colwise() + tf.topRightCorner<3, 1>();
    vbones::Pose3 a = aligned.transpose();
    acc += mean_joint_distance(a, g[t]);
  }
  return acc / static_cast<double>(p.size());
}

inline double n_mpjpe(const vbones::Sequence3& p, const vbones::Sequence3& g) {
  double acc = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index j = 0; j < p[t].rows(); ++j) {
      for (int d = 0; d < 3; ++d) {
        num += p[t](j, d) * g[t](j, d);
        den += p[t](j, d) * p[t](j, d);
      }
    }
    vbones::Pose3 scaled = (num / den) * p[t];
    acc += mean_joint_distance(scaled, g[t]);
  }
  return acc / static_cast<double>(p.size());
}

inline double mpjve(const vbones::Sequence3& p, const vbones::Sequence3& g) {
  double acc = 0.0;
  for (std::size_t t = 1; t < p.size(); ++t) {
    vbones::Pose3 dp = p[t] - p[t - 1];
    vbones::Pose3 dg = g[t] - g[t - 1];
    acc += mean_joint_distance(dp, dg);
  }
  return acc / static_cast<double>(p.size() - 1);
}

inline vbones::Pose3 random_pose(std::mt19937_64& rng, int joints = 17, double spread = 500.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  vbones::Pose3 p(joints, 3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return p;
}

inline vbones::Sequence3 random_sequence(std::mt19937_64& rng, int frames, double spread = 500.0) {
  vbones::Sequence3 s;
  for (int t = 0; t < frames; ++t) s.push_back(random_pose(rng, 17, spread));
  return s;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

// Central-difference derivative of a scalar function of a matrix.
template <class F>
Eigen::MatrixXd numeric_grad(F&& f, Eigen::MatrixXd x, double eps = 1e-6) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double s = x.data()[i];
    x.data()[i] = s + eps;
    const double up = f(x);
    x.data()[i] = s - eps;
    const double down = f(x);
    x.data()[i] = s;
    g.data()[i] = (up - down) / (2 * eps);
  }
  return g;
}

}  // namespace oracle
