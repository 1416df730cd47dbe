#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace da3d {

enum class SplitTag { Train, Val, Test };

const char* to_string(SplitTag tag);
std::optional<SplitTag> parse_split_tag(const std::string& text);

struct ManifestEntry {
  std::string id;
  std::filesystem::path path;  // as written; see Manifest::resolve
  std::string label;
  std::optional<SplitTag> split;
  std::optional<int> fold;
  // Unrecognized keys, kept verbatim (key -> serialized JSON value) so that
  // rewriting a manifest does not drop producer metadata.
  std::map<std::string, std::string> extra;
};

// Line-delimited JSON records with keys `id`, `path`, `label` and optional
// `split` / `fold`. Relative paths resolve against `base_dir`.
class Manifest {
 public:
  Manifest() = default;
  Manifest(std::vector<ManifestEntry> entries, std::filesystem::path base_dir = {});

  static Manifest load(const std::filesystem::path& file);
  static Manifest parse(const std::string& text, std::filesystem::path base_dir = {});

  void save(const std::filesystem::path& file) const;
  std::string serialize() const;

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::vector<ManifestEntry>& entries() { return entries_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }

  // Label string -> class index. Defaults to sorted unique labels.
  const std::map<std::string, int>& label_map() const { return label_map_; }
  void set_label_map(std::map<std::string, int> map);

  int class_of(const ManifestEntry& entry) const;
  int num_classes() const { return static_cast<int>(label_map_.size()); }

  const ManifestEntry& find(const std::string& id) const;
  bool contains(const std::string& id) const;
  std::vector<std::string> ids() const;

  std::filesystem::path resolve(const ManifestEntry& entry) const;

  // Keeps only entries whose label is one of the two and maps
  // negative -> 0, positive -> 1.
  Manifest binary_task(const std::string& negative_label,
                       const std::string& positive_label) const;

  Manifest subset(const std::vector<std::string>& ids) const;

 private:
  void rebuild_index();

  std::vector<ManifestEntry> entries_;
  std::filesystem::path base_dir_;
  std::map<std::string, int> label_map_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace da3d
