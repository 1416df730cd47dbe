#include "da3d/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "da3d/errors.hpp"
#include "json.hpp"

namespace da3d {

using nlohmann::json;

const char* to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
  }
  return "?";
}

std::optional<SplitTag> parse_split_tag(const std::string& text) {
  if (text == "train") return SplitTag::Train;
  if (text == "val") return SplitTag::Val;
  if (text == "test") return SplitTag::Test;
  return std::nullopt;
}

Manifest::Manifest(std::vector<ManifestEntry> entries, std::filesystem::path base_dir)
    : entries_(std::move(entries)), base_dir_(std::move(base_dir)) {
  std::set<std::string> labels;
  for (const auto& e : entries_) labels.insert(e.label);
  int next = 0;
  for (const auto& l : labels) label_map_[l] = next++;
  rebuild_index();
}

void Manifest::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i].id, i).second) {
      throw DataError("manifest: duplicate id '" + entries_[i].id + "'");
    }
  }
}

Manifest Manifest::parse(const std::string& text, std::filesystem::path base_dir) {
  std::vector<ManifestEntry> entries;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "manifest line " + std::to_string(lineno);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!record.is_object()) throw DataError(where + ": expected an object");

    ManifestEntry entry;
    for (const char* key : {"id", "path", "label"}) {
      if (!record.contains(key) || !record[key].is_string()) {
        throw DataError(where + ": missing string key '" + key + "'");
      }
    }
    entry.id = record["id"].get<std::string>();
    entry.path = record["path"].get<std::string>();
    entry.label = record["label"].get<std::string>();
    if (record.contains("split") && !record["split"].is_null()) {
      const auto tag = record["split"].is_string()
                           ? parse_split_tag(record["split"].get<std::string>())
                           : std::nullopt;
      if (!tag) throw DataError(where + ": split must be train, val or test");
      entry.split = tag;
    }
    if (record.contains("fold") && !record["fold"].is_null()) {
      if (!record["fold"].is_number_integer() || record["fold"].get<int>() < 0) {
        throw DataError(where + ": fold must be a non-negative integer");
      }
      entry.fold = record["fold"].get<int>();
    }
    for (const auto& [key, value] : record.items()) {
      if (key == "id" || key == "path" || key == "label" || key == "split" || key == "fold") continue;
      entry.extra[key] = value.dump();
    }
    entries.push_back(std::move(entry));
  }
  return Manifest(std::move(entries), std::move(base_dir));
}

Manifest Manifest::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open manifest " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str(), file.parent_path());
  } catch (const DataError& e) {
    throw DataError(file.string() + ": " + e.what());
  }
}

std::string Manifest::serialize() const {
  std::string out;
  for (const auto& e : entries_) {
    json record = json::object();
    record["id"] = e.id;
    record["path"] = e.path.generic_string();
    record["label"] = e.label;
    if (e.split) record["split"] = to_string(*e.split);
    if (e.fold) record["fold"] = *e.fold;
    for (const auto& [key, value] : e.extra) record[key] = json::parse(value);
    out += record.dump();
    out += '\n';
  }
  return out;
}

void Manifest::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + file.string());
  out << serialize();
}

void Manifest::set_label_map(std::map<std::string, int> map) {
  for (const auto& e : entries_) {
    if (!map.count(e.label)) throw DataError("label map lacks label '" + e.label + "'");
  }
  label_map_ = std::move(map);
}

int Manifest::class_of(const ManifestEntry& entry) const {
  const auto it = label_map_.find(entry.label);
  if (it == label_map_.end()) throw DataError("unknown label '" + entry.label + "'");
  return it->second;
}

const ManifestEntry& Manifest::find(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw DataError("manifest has no id '" + id + "'");
  return entries_[it->second];
}

bool Manifest::contains(const std::string& id) const { return index_.count(id) != 0; }

std::vector<std::string> Manifest::ids() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.id);
  return out;
}

std::filesystem::path Manifest::resolve(const ManifestEntry& entry) const {
  if (entry.path.is_absolute() || base_dir_.empty()) return entry.path;
  return base_dir_ / entry.path;
}

Manifest Manifest::binary_task(const std::string& negative_label,
                               const std::string& positive_label) const {
  if (negative_label == positive_label) {
    throw ConfigError("task labels must differ (both '" + negative_label + "')");
  }
  for (const auto* l : {&negative_label, &positive_label}) {
    if (!label_map_.count(*l)) throw ConfigError("label '" + *l + "' not in manifest");
  }
  std::vector<ManifestEntry> kept;
  for (const auto& e : entries_) {
    if (e.label == negative_label || e.label == positive_label) kept.push_back(e);
  }
  Manifest out(std::move(kept), base_dir_);
  out.label_map_ = {{negative_label, 0}, {positive_label, 1}};
  return out;
}

Manifest Manifest::subset(const std::vector<std::string>& ids) const {
  std::vector<ManifestEntry> kept;
  kept.reserve(ids.size());
  for (const auto& id : ids) kept.push_back(find(id));
  Manifest out(std::move(kept), base_dir_);
  out.label_map_ = label_map_;
  return out;
}

}  // namespace da3d
