#pragma once

#include <string>

#include "pdm/config.hpp"
#include "pdm/dataio.hpp"
#include "pdm/denoiser.hpp"
#include "pdm/schedule.hpp"

// Helpers shared by the command implementations (defined in train.cpp).

namespace pdm {

ScheduleKind schedule_kind_from(const std::string& name);
BetaSchedule schedule_from_config(const RunConfig& cfg);
ConditionKind condition_kind_from(const std::string& name);
NetConfig net_config_from(const RunConfig& cfg, int channels, int height, int width);
NormalizationMode normalization_mode_from(const std::string& name);
Dataset load_dataset_from_config(const RunConfig& cfg);
void write_resolved_config(const RunConfig& cfg, const std::string& out_dir);

}  // namespace pdm
