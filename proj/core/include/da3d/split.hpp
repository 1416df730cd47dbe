#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "da3d/manifest.hpp"

namespace da3d {

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Either a holdout split (train/val/test) or k folds sharing one held-out
// validation list. For k folds, fold i is the test part of round i and the
// other folds form its training part.
struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
  std::vector<std::vector<std::string>> folds;

  bool is_kfold() const { return !folds.empty(); }
  int fold_count() const { return static_cast<int>(folds.size()); }
  std::vector<std::string> fold_train(int fold) const;
  const std::vector<std::string>& fold_test(int fold) const;
};

// Per-class quotas for a holdout split of `n` samples.
struct ClassQuota {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};
ClassQuota holdout_quota(std::size_t n, const SplitRatios& ratios);

SplitAssignment make_split(const Manifest& manifest, const SplitRatios& ratios,
                           std::uint64_t seed);

SplitAssignment make_kfold(const Manifest& manifest, int k, int held_out_val_per_class,
                           std::uint64_t seed);

// Reconstructs an assignment from `split`/`fold` tags. Entries with a fold
// tag go to that fold; entries tagged val go to val.
SplitAssignment assignment_from_tags(const Manifest& manifest);

// Copy of `manifest` with split/fold tags filled in from `split`.
Manifest tag_manifest(const Manifest& manifest, const SplitAssignment& split);

// Throws DataError when parts overlap or miss a manifest id.
void check_partition(const Manifest& manifest, const SplitAssignment& split);

}  // namespace da3d
