#include "vbones/nets.hpp"

#include "vbones/container.hpp"
#include "vbones/error.hpp"
#include "vbones/losses.hpp"

#include <cmath>
#include <random>

namespace vbones {

namespace {

// Trunk and composer hidden branches work in metres; bone vectors and joints
// are exchanged in millimetres.
constexpr double kMmPerUnit = 1000.0;
// Camera-normalised offsets from the root span roughly +-0.2; scaled to O(1).
constexpr double kOffsetScale = 10.0;
constexpr double kRootScale = 5.0;

std::string block_name(const char* prefix, int k, const char* leaf) {
  return std::string(prefix) + ".block" + std::to_string(k) + "." + leaf;
}

}  // namespace

double uniform01(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

void ModelConfig::validate() const {
  require(num_joints >= 2, ErrorKind::Configuration, "model needs at least two joints");
  require(num_random_frames >= 1, ErrorKind::Configuration, "num_random_frames must be >= 1");
  require(hidden_width >= 8, ErrorKind::Configuration, "hidden_width must be >= 8");
  require(num_residual_blocks >= 1, ErrorKind::Configuration, "num_residual_blocks must be >= 1");
  require(receptive_field >= 3 && receptive_field % 2 == 1, ErrorKind::Configuration,
          "receptive_field must be odd and >= 3");
  int rf = receptive_field;
  while (rf % 3 == 0) rf /= 3;
  require(rf == 1, ErrorKind::Configuration,
          "receptive_field must be a power of three (e.g. 9 or 243)");
  bool known = false;
  for (auto name : kVirtualConfigNames) known = known || name == virtual_config;
  require(known, ErrorKind::Configuration, "unknown virtual bone configuration: " + virtual_config);
}

std::vector<int> ModelConfig::dilations() const {
  std::vector<int> out;
  int reach = 1;
  for (int d = 1; reach < receptive_field; d *= 3) {
    out.push_back(d);
    reach += 2 * d;
  }
  return out;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"num_joints", c.num_joints},
          {"virtual_config", c.virtual_config},
          {"num_random_frames", c.num_random_frames},
          {"receptive_field", c.receptive_field},
          {"hidden_width", c.hidden_width},
          {"num_residual_blocks", c.num_residual_blocks},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& doc) {
  ModelConfig c;
  try {
    c.num_joints = doc.value("num_joints", c.num_joints);
    c.virtual_config = doc.value("virtual_config", c.virtual_config);
    c.num_random_frames = doc.value("num_random_frames", c.num_random_frames);
    c.receptive_field = doc.value("receptive_field", c.receptive_field);
    c.hidden_width = doc.value("hidden_width", c.hidden_width);
    c.num_residual_blocks = doc.value("num_residual_blocks", c.num_residual_blocks);
    c.seed = doc.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Configuration, std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

ad::Matrix& ParamStore::add(const std::string& name, ad::Matrix value) {
  require(!lookup_.contains(name), ErrorKind::Internal, "duplicate parameter " + name);
  lookup_[name] = values_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
  return values_.back();
}

std::size_t ParamStore::index(const std::string& name) const {
  const auto it = lookup_.find(name);
  require(it != lookup_.end(), ErrorKind::Internal, "no parameter named " + name);
  return it->second;
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

LiftingModel::LiftingModel(ModelConfig config)
    : config_(std::move(config)), bones_(make_bone_set(config_.virtual_config)) {
  config_.validate();
  require(static_cast<int>(bones_.num_joints()) == config_.num_joints, ErrorKind::Configuration,
          "num_joints does not match the built-in skeleton");

  const auto j = static_cast<Eigen::Index>(bones_.num_joints());
  const auto r = static_cast<Eigen::Index>(bones_.num_real());
  const auto v = static_cast<Eigen::Index>(bones_.num_virtual());
  const auto b = r + v;
  const auto c = static_cast<Eigen::Index>(config_.hidden_width);
  const int root = bones_.topology().root();

  real_incidence_ = ad::Matrix::Zero(3 * j, 3 * r);
  virtual_incidence_ = ad::Matrix::Zero(3 * j, 3 * v);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Bone& bone = bones_.bones()[static_cast<std::size_t>(i)];
    auto& m = i < r ? real_incidence_ : virtual_incidence_;
    const Eigen::Index col = i < r ? i : i - r;
    for (int d = 0; d < 3; ++d) {
      m(3 * bone.child + d, 3 * col + d) += 1.0;
      m(3 * bone.parent + d, 3 * col + d) -= 1.0;
    }
  }
  root_scatter_ = ad::Matrix::Zero(3 * (j - 1), 3 * j);
  for (Eigen::Index k = 0, o = 0; k < j; ++k) {
    if (k == root) continue;
    for (int d = 0; d < 3; ++d) root_scatter_(3 * o + d, 3 * k + d) = 1.0;
    ++o;
  }

  // Root slot keeps the absolute root position, other slots become offsets.
  input_transform_ = ad::Matrix::Zero(2 * j, 2 * j);
  for (Eigen::Index k = 0; k < j; ++k) {
    for (int d = 0; d < 2; ++d) {
      if (k == root) {
        input_transform_(2 * k + d, 2 * k + d) = kRootScale;
        continue;
      }
      input_transform_(2 * k + d, 2 * k + d) = kOffsetScale;
      input_transform_(2 * root + d, 2 * k + d) = -kOffsetScale;
    }
  }

  // Shapes only; values are filled by init_params.
  const Eigen::Index in2d = 2 * j;
  const Eigen::Index out3d = 3 * (j - 1);
  params_.add("trunk.in.W", ad::Matrix::Zero(in2d, c));
  params_.add("trunk.in.b", ad::Matrix::Zero(1, c));
  for (int k = 0; k < config_.num_residual_blocks; ++k) {
    params_.add(block_name("trunk", k, "fc1.W"), ad::Matrix::Zero(c, c));
    params_.add(block_name("trunk", k, "fc1.b"), ad::Matrix::Zero(1, c));
    params_.add(block_name("trunk", k, "fc2.W"), ad::Matrix::Zero(c, c));
    params_.add(block_name("trunk", k, "fc2.b"), ad::Matrix::Zero(1, c));
  }
  params_.add("trunk.out.W", ad::Matrix::Zero(c, out3d));
  params_.add("trunk.out.b", ad::Matrix::Zero(1, out3d));
  params_.add("attention.W", ad::Matrix::Zero(c, r));
  params_.add("attention.b", ad::Matrix::Zero(1, r));

  const auto dil = config_.dilations();
  params_.add("direction.expand.W", ad::Matrix::Zero(3 * in2d, c));
  params_.add("direction.expand.b", ad::Matrix::Zero(1, c));
  for (std::size_t k = 1; k < dil.size(); ++k) {
    params_.add(block_name("direction", static_cast<int>(k), "conv.W"), ad::Matrix::Zero(3 * c, c));
    params_.add(block_name("direction", static_cast<int>(k), "conv.b"), ad::Matrix::Zero(1, c));
    params_.add(block_name("direction", static_cast<int>(k), "fc.W"), ad::Matrix::Zero(c, c));
    params_.add(block_name("direction", static_cast<int>(k), "fc.b"), ad::Matrix::Zero(1, c));
  }
  params_.add("direction.out.W", ad::Matrix::Zero(c, 3 * b));
  params_.add("direction.out.b", ad::Matrix::Zero(1, 3 * b));

  params_.add("composer.skip.W", ad::Matrix::Zero(3 * b, out3d));
  params_.add("composer.skip.b", ad::Matrix::Zero(1, out3d));
  params_.add("composer.hidden.W", ad::Matrix::Zero(3 * b, c));
  params_.add("composer.hidden.b", ad::Matrix::Zero(1, c));
  params_.add("composer.out.W", ad::Matrix::Zero(c, out3d));
  params_.add("composer.out.b", ad::Matrix::Zero(1, out3d));
}

LiftingModel init_params(ModelConfig config, std::uint64_t seed) {
  config.seed = seed;
  LiftingModel model(std::move(config));
  std::mt19937_64 rng(seed);
  auto& ps = model.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const std::string& name = ps.name(i);
    ad::Matrix& w = ps.value(i);
    const bool is_weight = name.ends_with(".W");
    if (!is_weight || name.starts_with("composer.skip") || name.starts_with("composer.out")) {
      continue;
    }
    // LeCun uniform: variance 1 / fan_in. The trunk head starts small so the
    // first coarse poses stay near the root (and in front of the camera).
    const double gain = name == "trunk.out.W" ? 0.1 : 1.0;
    const double a = gain * std::sqrt(3.0 / static_cast<double>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = a * (2.0 * uniform01(rng()) - 1.0);
    }
  }

  // Identity routing: each non-root joint starts as the sum of the real bone
  // vectors on its tree path, so virtual inputs begin unused.
  const auto& topo = model.bones().topology();
  std::vector<int> bone_of_child(topo.num_joints(), -1);
  for (std::size_t i = 0; i < topo.real_bones().size(); ++i) {
    bone_of_child[topo.real_bones()[i].child] = static_cast<int>(i);
  }
  ad::Matrix& skip = ps["composer.skip.W"];
  for (int k = 0, o = 0; k < static_cast<int>(topo.num_joints()); ++k) {
    if (k == topo.root()) continue;
    for (int cur = k; cur != topo.root(); cur = topo.parent(cur)) {
      for (int d = 0; d < 3; ++d) skip(3 * bone_of_child[cur] + d, 3 * o + d) = 1.0;
    }
    ++o;
  }
  return model;
}

std::vector<ad::Var> LiftingModel::bind(ad::Graph& g, bool trainable) const {
  std::vector<ad::Var> out;
  out.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back(trainable ? g.variable(params_.value(i)) : g.constant(params_.value(i)));
  }
  return out;
}

const ad::Var& LiftingModel::at(const std::vector<ad::Var>& p, const std::string& name) const {
  return p.at(params_.index(name));
}

namespace {

ad::Var affine(ad::Var x, ad::Var w, ad::Var b) { return ad::add_row(ad::matmul(x, w), b); }

// [batch * t_in, C] -> [batch * t_out, 3C], row (b, t) holding frames
// t, t + d, t + 2d of sample b.
ad::Var unfold3(ad::Var x, Eigen::Index batch, Eigen::Index t_in, int d) {
  const Eigen::Index t_out = t_in - 2 * d;
  std::vector<ad::Var> taps;
  for (int k = 0; k < 3; ++k) {
    std::vector<Eigen::Index> rows;
    rows.reserve(static_cast<std::size_t>(batch * t_out));
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index t = 0; t < t_out; ++t) rows.push_back(b * t_in + t + k * d);
    }
    taps.push_back(ad::gather_rows(x, rows));
  }
  return ad::concat_cols(taps);
}

ad::Var crop(ad::Var x, Eigen::Index batch, Eigen::Index t_in, Eigen::Index offset,
             Eigen::Index t_out) {
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(batch * t_out));
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index t = 0; t < t_out; ++t) rows.push_back(b * t_in + offset + t);
  }
  return ad::gather_rows(x, rows);
}

}  // namespace

ad::Var LiftingModel::coarse_trunk(ad::Graph& g, const std::vector<ad::Var>& p, ad::Var x2d,
                                   ad::Var* features) const {
  require(x2d.cols() == 2 * config_.num_joints, ErrorKind::Validation,
          "trunk input must hold 2J coordinates per row");
  const ad::Var x = ad::matmul(x2d, g.constant(input_transform_));
  ad::Var h = ad::elu(affine(x, at(p, "trunk.in.W"), at(p, "trunk.in.b")));
  for (int k = 0; k < config_.num_residual_blocks; ++k) {
    ad::Var y = ad::elu(affine(h, at(p, block_name("trunk", k, "fc1.W")),
                               at(p, block_name("trunk", k, "fc1.b"))));
    y = ad::elu(affine(y, at(p, block_name("trunk", k, "fc2.W")),
                       at(p, block_name("trunk", k, "fc2.b"))));
    h = ad::add(h, y);
  }
  if (features) *features = h;
  const ad::Var out = affine(h, at(p, "trunk.out.W"), at(p, "trunk.out.b"));
  return ad::scale(ad::matmul(out, g.constant(root_scatter_)), kMmPerUnit);
}

ad::Var LiftingModel::direction_net(ad::Graph& g, const std::vector<ad::Var>& p,
                                    ad::Var windows) const {
  const Eigen::Index rf = config_.receptive_field;
  require(windows.cols() == 2 * config_.num_joints && windows.rows() % rf == 0,
          ErrorKind::Validation, "direction net input must be whole windows of receptive_field frames");
  const Eigen::Index batch = windows.rows() / rf;
  const auto dil = config_.dilations();

  Eigen::Index t = rf;
  const ad::Var x = ad::matmul(windows, g.constant(input_transform_));
  ad::Var h = ad::elu(affine(unfold3(x, batch, t, dil[0]), at(p, "direction.expand.W"),
                             at(p, "direction.expand.b")));
  t -= 2 * dil[0];
  for (std::size_t k = 1; k < dil.size(); ++k) {
    const int d = dil[k];
    const int ki = static_cast<int>(k);
    ad::Var y = ad::elu(affine(unfold3(h, batch, t, d), at(p, block_name("direction", ki, "conv.W")),
                               at(p, block_name("direction", ki, "conv.b"))));
    y = ad::elu(affine(y, at(p, block_name("direction", ki, "fc.W")),
                       at(p, block_name("direction", ki, "fc.b"))));
    const Eigen::Index t_out = t - 2 * d;
    h = ad::add(crop(h, batch, t, d, t_out), y);
    t = t_out;
  }
  require(t == 1, ErrorKind::Internal, "temporal stack did not reduce to one frame");
  return ad::group_normalize(affine(h, at(p, "direction.out.W"), at(p, "direction.out.b")), 3);
}

ad::Var LiftingModel::composer(ad::Graph& g, const std::vector<ad::Var>& p, ad::Var real_lengths,
                               ad::Var virtual_lengths, ad::Var directions) const {
  const auto r = static_cast<Eigen::Index>(bones_.num_real());
  const auto v = static_cast<Eigen::Index>(bones_.num_virtual());
  require(real_lengths.cols() == r && virtual_lengths.cols() == v &&
              directions.cols() == 3 * (r + v),
          ErrorKind::Configuration, "composer inputs do not match the model's bone set");
  const ad::Var parts[] = {real_lengths, virtual_lengths};
  const ad::Var lengths = ad::concat_cols(parts);
  const ad::Var bone_vectors = ad::cmul(directions, ad::repeat_cols(lengths, 3));

  const ad::Var skip = affine(bone_vectors, at(p, "composer.skip.W"), at(p, "composer.skip.b"));
  const ad::Var hidden = ad::elu(affine(ad::scale(bone_vectors, 1.0 / kMmPerUnit),
                                        at(p, "composer.hidden.W"), at(p, "composer.hidden.b")));
  const ad::Var refine =
      ad::scale(affine(hidden, at(p, "composer.out.W"), at(p, "composer.out.b")), kMmPerUnit);
  return ad::matmul(ad::add(skip, refine), g.constant(root_scatter_));
}

ForwardVars LiftingModel::forward(ad::Graph& g, const std::vector<ad::Var>& p,
                                  const ForwardInputs& in) const {
  const Eigen::Index n = in.current.rows();
  const int f = config_.num_random_frames;
  require(in.random_frames.rows() == n * f, ErrorKind::Configuration,
          "random frame block does not match num_random_frames");
  require(in.windows.rows() == n * config_.receptive_field, ErrorKind::Validation,
          "window block does not match receptive_field");

  ForwardVars out;
  ad::Var features;
  out.coarse_random = coarse_trunk(g, p, g.constant(in.random_frames), &features);
  out.frame_lengths =
      ad::group_norm(ad::matmul(out.coarse_random, g.constant(real_incidence_)), 3);
  out.attention =
      ad::segment_softmax(affine(features, at(p, "attention.W"), at(p, "attention.b")), f);
  out.real_lengths = ad::segment_sum(ad::cmul(out.attention, out.frame_lengths), f);

  out.coarse_current = coarse_trunk(g, p, g.constant(in.current));
  out.virtual_lengths =
      ad::group_norm(ad::matmul(out.coarse_current, g.constant(virtual_incidence_)), 3);

  out.directions = direction_net(g, p, g.constant(in.windows));
  out.joints = composer(g, p, out.real_lengths, out.virtual_lengths, out.directions);
  return out;
}

namespace {

ad::Matrix stack(const Sequence2& frames) {
  require(!frames.empty(), ErrorKind::Validation, "no frames given");
  ad::Matrix out(static_cast<Eigen::Index>(frames.size()), frames.front().size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    require(frames[i].rows() == frames.front().rows(), ErrorKind::Validation,
            "joint count differs between frames");
    out.row(static_cast<Eigen::Index>(i)) = flatten(frames[i]);
  }
  return out;
}

Pose3 unflatten3(const Eigen::RowVectorXd& row) {
  Pose3 out(row.size() / 3, 3);
  std::copy_n(row.data(), row.size(), out.data());
  return out;
}

}  // namespace

LengthNetOutput length_net_forward(const Sequence2& x_random, const Pose2& x_current,
                                   const LiftingModel& model) {
  const int f = model.config().num_random_frames;
  require(static_cast<int>(x_random.size()) == f, ErrorKind::Configuration,
          "number of random frames does not match the model's num_random_frames");
  ad::Graph g;
  const auto p = model.bind(g, false);
  ad::Var features;
  const ad::Var coarse = model.coarse_trunk(g, p, g.constant(stack(x_random)), &features);
  const ad::Var current = model.coarse_trunk(g, p, g.constant(flatten(x_current)));

  LengthNetOutput out;
  for (Eigen::Index i = 0; i < f; ++i) out.coarse3d_per_frame.push_back(unflatten3(coarse.value().row(i)));
  out.coarse3d_current = unflatten3(current.value().row(0));

  const BoneSet& bones = model.bones();
  const auto r = static_cast<Eigen::Index>(bones.num_real());
  out.per_frame_real_lengths.resize(f, r);
  for (Eigen::Index i = 0; i < f; ++i) {
    out.per_frame_real_lengths.row(i) =
        bone_lengths_from_joints(out.coarse3d_per_frame[static_cast<std::size_t>(i)], bones)
            .head(r)
            .transpose();
  }
  const auto& ps = model.params();
  ad::Matrix scores = features.value() * ps["attention.W"];
  scores.rowwise() += ps["attention.b"].row(0);
  ad::Graph g2;
  out.attention_weights = ad::segment_softmax(g2.constant(scores), f).value();
  out.real_lengths =
      out.attention_weights.cwiseProduct(out.per_frame_real_lengths).colwise().sum().transpose();
  out.virtual_lengths =
      bone_lengths_from_joints(out.coarse3d_current, bones).tail(bones.num_virtual());
  return out;
}

DirectionOutput direction_net_forward(const Sequence2& x_window, const LiftingModel& model) {
  require(static_cast<int>(x_window.size()) == model.config().receptive_field,
          ErrorKind::Validation, "window length does not match receptive_field");
  ad::Graph g;
  const auto p = model.bind(g, false);
  const ad::Var d = model.direction_net(g, p, g.constant(stack(x_window)));
  DirectionOutput out;
  out.directions.resize(static_cast<Eigen::Index>(model.bones().size()), 3);
  std::copy_n(d.value().data(), d.value().size(), out.directions.data());
  return out;
}

Pose3 composer_forward(const Eigen::VectorXd& real_lengths, const Eigen::VectorXd& virtual_lengths,
                       const BoneVectors& directions, const LiftingModel& model) {
  const BoneSet& bones = model.bones();
  require(virtual_lengths.size() == static_cast<Eigen::Index>(bones.num_virtual()) &&
              real_lengths.size() == static_cast<Eigen::Index>(bones.num_real()) &&
              directions.rows() == static_cast<Eigen::Index>(bones.size()),
          ErrorKind::Configuration, "composer inputs do not match the model's bone set");
  for (Eigen::Index i = 0; i < directions.rows(); ++i) {
    require(std::abs(directions.row(i).norm() - 1.0) <= 1e-5, ErrorKind::Validation,
            "composer directions must be unit vectors");
  }
  ad::Graph g;
  const auto p = model.bind(g, false);
  ad::Matrix dirs(1, directions.size());
  std::copy_n(directions.data(), directions.size(), dirs.data());
  const ad::Var joints = model.composer(g, p, g.constant(real_lengths.transpose()),
                                        g.constant(virtual_lengths.transpose()), g.constant(dirs));
  return unflatten3(joints.value().row(0));
}

void save_checkpoint(const std::filesystem::path& path, const LiftingModel& model,
                     const nlohmann::json& extra_meta) {
  Container c;
  c.meta = extra_meta;
  c.meta["format"] = "vbones-checkpoint";
  c.meta["version"] = 1;
  c.meta["model_config"] = to_json(model.config());
  c.meta["skeleton"] = to_json(model.bones());
  const auto& ps = model.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const ad::Matrix& m = ps.value(i);
    NamedArray a;
    a.name = ps.name(i);
    a.shape = {m.rows(), m.cols()};
    a.data.resize(static_cast<std::size_t>(m.size()));
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.data.data(), m.rows(), m.cols()) = m;
    c.arrays.push_back(std::move(a));
  }
  write_container(path, c, kCheckpointMagic);
}

LiftingModel load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta_out) {
  const Container c = read_container(path, kCheckpointMagic);
  require(c.meta.value("format", "") == "vbones-checkpoint", ErrorKind::IncompatibleCheckpoint,
          path.string() + " is not a model checkpoint");
  ModelConfig config;
  try {
    config = model_config_from_json(c.meta.at("model_config"));
  } catch (const Error& e) {
    fail(ErrorKind::IncompatibleCheckpoint, std::string("checkpoint config invalid: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::IncompatibleCheckpoint, std::string("checkpoint config missing: ") + e.what());
  }
  LiftingModel model(config);
  require(c.meta.contains("skeleton") &&
              dump_canonical(c.meta["skeleton"]) == dump_canonical(to_json(model.bones())),
          ErrorKind::IncompatibleCheckpoint, "checkpoint bone ordering differs from this build");
  auto& ps = model.params();
  require(c.arrays.size() == ps.size(), ErrorKind::IncompatibleCheckpoint,
          "checkpoint parameter count differs from the model");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const NamedArray& a = c.arrays[i];
    ad::Matrix& m = ps.value(i);
    require(a.name == ps.name(i) && a.shape.size() == 2 && a.shape[0] == m.rows() &&
                a.shape[1] == m.cols(),
            ErrorKind::IncompatibleCheckpoint, "checkpoint parameter " + a.name + " does not fit");
    m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.data.data(), m.rows(), m.cols());
  }
  if (meta_out) *meta_out = c.meta;
  return model;
}

LiftingModel load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected,
                             nlohmann::json* meta_out) {
  LiftingModel model = load_checkpoint(path, meta_out);
  const ModelConfig& got = model.config();
  require(got.virtual_config == expected.virtual_config, ErrorKind::IncompatibleCheckpoint,
          "checkpoint uses virtual config " + got.virtual_config + ", expected " +
              expected.virtual_config);
  ModelConfig a = got, b = expected;
  a.seed = b.seed = 0;
  require(a == b, ErrorKind::IncompatibleCheckpoint,
          "checkpoint model config differs from the requested one");
  return model;
}

}  // namespace vbones
