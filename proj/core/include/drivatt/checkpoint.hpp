#pragma once

// JSON checkpoints: trained attention models, calibration networks and the
// two reference predictors (ground-truth oracle, uniform map).

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "drivatt/calibration.hpp"
#include "drivatt/models.hpp"

namespace drivatt::checkpoint {

inline constexpr int kCheckpointFormatVersion = 1;

enum class Kind { attention_model, calibration_net, reference_oracle, reference_uniform };

std::string_view to_string(Kind k);

struct Meta {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  // Sequences per label in each of val/test when the model was trained.
  int per_split = 20;
};

void save_attention_model(const std::filesystem::path& path, const models::AttentionModel& model, const Meta& meta);
void save_calibration_net(const std::filesystem::path& path, const calibration::CalibrationNet& net,
                          const Meta& meta);
void save_reference(const std::filesystem::path& path, Kind kind, ConditionType condition);

Kind checkpoint_kind(const std::filesystem::path& path);
Meta checkpoint_meta(const std::filesystem::path& path);

// Throw FormatError on malformed files or parameter shape mismatches and
// InvalidArgument when the file holds a different kind.
std::unique_ptr<models::AttentionModel> load_attention_model(const std::filesystem::path& path);
std::unique_ptr<calibration::CalibrationNet> load_calibration_net(const std::filesystem::path& path);

// Attention model or reference predictor.
std::unique_ptr<models::AttentionPredictor> load_predictor(const std::filesystem::path& path);

// Copies values between parameter sets with identical names and shapes.
void copy_parameters(const nn::ParameterSet& from, nn::ParameterSet& to);

}  // namespace drivatt::checkpoint
