#include "da3d/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "da3d/errors.hpp"
#include "da3d/rng.hpp"

namespace da3d {

namespace {

constexpr double kRatioSlack = 1e-9;

std::size_t floor_share(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + kRatioSlack));
}

// Ids of each class in manifest order, keyed by class index.
std::map<int, std::vector<std::string>> ids_by_class(const Manifest& manifest) {
  std::map<int, std::vector<std::string>> out;
  for (const auto& e : manifest.entries()) out[manifest.class_of(e)].push_back(e.id);
  return out;
}

void sort_by_manifest_order(const Manifest& manifest, std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> order;
  const auto& entries = manifest.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) order[entries[i].id] = i;
  std::sort(ids.begin(), ids.end(),
            [&](const std::string& a, const std::string& b) { return order.at(a) < order.at(b); });
}

std::string label_name(const Manifest& manifest, int cls) {
  for (const auto& [name, idx] : manifest.label_map()) {
    if (idx == cls) return name;
  }
  return std::to_string(cls);
}

}  // namespace

std::vector<std::string> SplitAssignment::fold_train(int fold) const {
  std::vector<std::string> out;
  for (int f = 0; f < fold_count(); ++f) {
    if (f == fold) continue;
    out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  return out;
}

const std::vector<std::string>& SplitAssignment::fold_test(int fold) const {
  if (fold < 0 || fold >= fold_count()) throw DataError("fold index out of range");
  return folds[fold];
}

ClassQuota holdout_quota(std::size_t n, const SplitRatios& ratios) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-6) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  ClassQuota q;
  q.train = floor_share(ratios.train, n);
  q.val = floor_share(ratios.val, n);
  q.test = n - q.train - q.val;
  // Test takes the leftover; hand one back to train if that overshoots.
  if (static_cast<double>(q.test) > ratios.test * static_cast<double>(n) + 1.0 + kRatioSlack) {
    --q.test;
    ++q.train;
  }
  return q;
}

SplitAssignment make_split(const Manifest& manifest, const SplitRatios& ratios,
                           std::uint64_t seed) {
  Rng rng = make_rng(seed, "split");
  SplitAssignment out;
  for (auto& [cls, ids] : ids_by_class(manifest)) {
    if (ids.size() < 3) {
      throw DataError("class '" + label_name(manifest, cls) + "' has " +
                      std::to_string(ids.size()) + " samples; a split needs at least 3");
    }
    std::shuffle(ids.begin(), ids.end(), rng);
    const ClassQuota q = holdout_quota(ids.size(), ratios);
    auto it = ids.begin();
    out.train.insert(out.train.end(), it, it + q.train);
    it += q.train;
    out.val.insert(out.val.end(), it, it + q.val);
    it += q.val;
    out.test.insert(out.test.end(), it, ids.end());
  }
  sort_by_manifest_order(manifest, out.train);
  sort_by_manifest_order(manifest, out.val);
  sort_by_manifest_order(manifest, out.test);
  return out;
}

SplitAssignment make_kfold(const Manifest& manifest, int k, int held_out_val_per_class,
                           std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  if (held_out_val_per_class < 0) throw ConfigError("held-out validation count must be >= 0");

  Rng rng = make_rng(seed, "split");
  SplitAssignment out;
  out.folds.resize(static_cast<std::size_t>(k));
  std::size_t offset = 0;
  for (auto& [cls, ids] : ids_by_class(manifest)) {
    const auto needed = static_cast<std::size_t>(held_out_val_per_class + k);
    if (ids.size() <= needed) {
      throw DataError("class '" + label_name(manifest, cls) + "' has " +
                      std::to_string(ids.size()) + " samples; k-fold with " +
                      std::to_string(held_out_val_per_class) + " held out and k=" +
                      std::to_string(k) + " needs more than " + std::to_string(needed));
    }
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto val_end = ids.begin() + held_out_val_per_class;
    out.val.insert(out.val.end(), ids.begin(), val_end);
    // Round-robin with a running offset so the larger folds rotate between
    // classes instead of piling onto fold 0.
    std::size_t pos = 0;
    for (auto it = val_end; it != ids.end(); ++it, ++pos) {
      out.folds[(pos + offset) % static_cast<std::size_t>(k)].push_back(*it);
    }
    offset = (offset + pos) % static_cast<std::size_t>(k);
  }
  sort_by_manifest_order(manifest, out.val);
  for (auto& f : out.folds) sort_by_manifest_order(manifest, f);
  return out;
}

SplitAssignment assignment_from_tags(const Manifest& manifest) {
  SplitAssignment out;
  int max_fold = -1;
  for (const auto& e : manifest.entries()) {
    if (e.fold) max_fold = std::max(max_fold, *e.fold);
  }
  out.folds.resize(static_cast<std::size_t>(max_fold + 1));
  for (const auto& e : manifest.entries()) {
    if (e.split == SplitTag::Val) {
      out.val.push_back(e.id);
    } else if (e.fold) {
      out.folds[static_cast<std::size_t>(*e.fold)].push_back(e.id);
    } else if (e.split == SplitTag::Train) {
      out.train.push_back(e.id);
    } else if (e.split == SplitTag::Test) {
      out.test.push_back(e.id);
    } else {
      throw DataError("manifest id '" + e.id + "' has no split or fold tag");
    }
  }
  if (out.is_kfold() && (!out.train.empty() || !out.test.empty())) {
    throw DataError("manifest mixes fold tags with train/test tags");
  }
  return out;
}

Manifest tag_manifest(const Manifest& manifest, const SplitAssignment& split) {
  check_partition(manifest, split);
  std::map<std::string, std::pair<std::optional<SplitTag>, std::optional<int>>> tags;
  for (const auto& id : split.train) tags[id] = {SplitTag::Train, std::nullopt};
  for (const auto& id : split.val) tags[id] = {SplitTag::Val, std::nullopt};
  for (const auto& id : split.test) tags[id] = {SplitTag::Test, std::nullopt};
  for (int f = 0; f < split.fold_count(); ++f) {
    for (const auto& id : split.folds[f]) tags[id] = {std::nullopt, f};
  }
  std::vector<ManifestEntry> entries = manifest.entries();
  for (auto& e : entries) std::tie(e.split, e.fold) = tags.at(e.id);
  Manifest out(std::move(entries), manifest.base_dir());
  out.set_label_map(manifest.label_map());
  return out;
}

void check_partition(const Manifest& manifest, const SplitAssignment& split) {
  std::set<std::string> seen;
  auto take = [&](const std::vector<std::string>& ids, const char* part) {
    for (const auto& id : ids) {
      if (!manifest.contains(id)) throw DataError(std::string(part) + " has unknown id '" + id + "'");
      if (!seen.insert(id).second) throw DataError("id '" + id + "' appears in more than one part");
    }
  };
  take(split.train, "train");
  take(split.val, "val");
  take(split.test, "test");
  for (const auto& f : split.folds) take(f, "fold");
  if (seen.size() != manifest.entries().size()) {
    throw DataError("split covers " + std::to_string(seen.size()) + " of " +
                    std::to_string(manifest.entries().size()) + " manifest ids");
  }
}

}  // namespace da3d
