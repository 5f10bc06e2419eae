#pragma once

#include "vbones/train.hpp"

#include <functional>
#include <string>
#include <vector>

namespace vbones {

struct AblationSpec {
  std::vector<std::string> virtual_configs = {"VB0", "VB5", "VB10", "VB13", "VB23"};
  std::vector<bool> pcl_settings = {true, false};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  ModelConfig model;
  TrainingConfig training;
};

struct AblationRow {
  std::string virtual_config;
  bool pcl = true;
  ProtocolValues median;  // per-protocol median over seeds
  std::vector<ProtocolValues> per_seed;
};

// Trains and evaluates every (virtual config, PCL) cell for every seed.
// Seeds are shared across cells so comparisons are paired.
std::vector<AblationRow> run_ablation(
    const AblationSpec& spec, const std::vector<LabeledSequence>& train_set,
    const std::vector<LabeledSequence>& test_set,
    const std::function<void(const std::string&)>& progress = {});

const AblationRow& find_row(const std::vector<AblationRow>& rows, const std::string& virtual_config,
                            bool pcl);

nlohmann::json to_json(const std::vector<AblationRow>& rows);
// Model rows with Protocol 1/2/3 and MPJVE columns.
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace vbones
