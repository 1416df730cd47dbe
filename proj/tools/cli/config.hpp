#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "da3d/split.hpp"
#include "da3d/trainer.hpp"

namespace da3d::cli {

enum class SplitMode { Holdout, Kfold };

// Experiment file: one `key = value` per line, `#` starts a comment.
// Unknown keys are errors. Relative paths resolve against the file's folder.
struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir;
  std::string negative_label;
  std::string positive_label;
  SplitMode split_mode = SplitMode::Holdout;
  SplitRatios ratios;
  int kfold_k = 5;
  int kfold_val_per_class = 10;
  TrainConfig train;
};

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace da3d::cli
