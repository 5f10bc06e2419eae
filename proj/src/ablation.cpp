#include "vbones/ablation.hpp"

#include "vbones/error.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace vbones {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string row_label(const AblationRow& r) {
  const std::string base = r.virtual_config == "VB0" ? "Baseline" : r.virtual_config;
  return base + (r.pcl ? " + PCL" : "");
}

}  // namespace

std::vector<AblationRow> run_ablation(const AblationSpec& spec,
                                      const std::vector<LabeledSequence>& train_set,
                                      const std::vector<LabeledSequence>& test_set,
                                      const std::function<void(const std::string&)>& progress) {
  require(!spec.seeds.empty(), ErrorKind::Configuration, "ablation needs at least one seed");
  std::vector<AblationRow> rows;
  for (const auto& vc : spec.virtual_configs) {
    ModelConfig mc = spec.model;
    mc.virtual_config = vc;
    const BoneSet bones = make_bone_set(vc);
    const auto train_data = prepare_sequences(train_set, bones);
    const auto test_data = prepare_sequences(test_set, bones);
    for (bool pcl : spec.pcl_settings) {
      AblationRow row;
      row.virtual_config = vc;
      row.pcl = pcl;
      for (auto seed : spec.seeds) {
        TrainingConfig tc = spec.training;
        tc.projection_consistency = pcl;
        tc.seed = seed;
        LiftingModel model = init_params(mc, seed);
        train(model, train_data, tc);
        const ProtocolValues v = evaluate(model, test_data, seed).aggregate();
        row.per_seed.push_back(v);
        if (progress) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "%s pcl=%s seed=%llu p1=%.2f p2=%.2f p3=%.2f mpjve=%.2f",
                        vc.c_str(), pcl ? "on" : "off", static_cast<unsigned long long>(seed),
                        v.mpjpe, v.p_mpjpe, v.n_mpjpe, v.mpjve);
          progress(buf);
        }
      }
      auto collect = [&](double ProtocolValues::*m) {
        std::vector<double> xs;
        for (const auto& v : row.per_seed) xs.push_back(v.*m);
        return median_of(xs);
      };
      row.median.mpjpe = collect(&ProtocolValues::mpjpe);
      row.median.p_mpjpe = collect(&ProtocolValues::p_mpjpe);
      row.median.n_mpjpe = collect(&ProtocolValues::n_mpjpe);
      row.median.mpjve = collect(&ProtocolValues::mpjve);
      row.median.frames = row.per_seed.front().frames;
      row.median.velocity_frames = row.per_seed.front().velocity_frames;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

const AblationRow& find_row(const std::vector<AblationRow>& rows, const std::string& vc, bool pcl) {
  for (const auto& r : rows) {
    if (r.virtual_config == vc && r.pcl == pcl) return r;
  }
  fail(ErrorKind::Validation, "no ablation row for " + vc + (pcl ? " with" : " without") + " PCL");
}

nlohmann::json to_json(const std::vector<AblationRow>& rows) {
  auto out = nlohmann::json::array();
  for (const auto& r : rows) {
    auto seeds = nlohmann::json::array();
    for (const auto& v : r.per_seed) {
      seeds.push_back({{"protocol1", v.mpjpe}, {"protocol2", v.p_mpjpe},
                       {"protocol3", v.n_mpjpe}, {"mpjve", v.mpjve}});
    }
    out.push_back({{"model", row_label(r)},
                   {"virtual_config", r.virtual_config},
                   {"pcl", r.pcl},
                   {"protocol1", r.median.mpjpe},
                   {"protocol2", r.median.p_mpjpe},
                   {"protocol3", r.median.n_mpjpe},
                   {"mpjve", r.median.mpjve},
                   {"per_seed", seeds}});
  }
  return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %12s %12s %12s %8s\n", "Model", "Protocol #1",
                "Protocol #2", "Protocol #3", "MPJVE");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-18s %12.2f %12.2f %12.2f %8.2f\n", row_label(r).c_str(),
                  r.median.mpjpe, r.median.p_mpjpe, r.median.n_mpjpe, r.median.mpjve);
    out << buf;
  }
  return out.str();
}

}  // namespace vbones
