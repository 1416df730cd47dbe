#include "da3d/bag_store.hpp"

#include <vector>

#include "da3d/parallel.hpp"

namespace da3d {

BagStore BagStore::load(const Manifest& manifest) {
  const auto& entries = manifest.entries();
  std::vector<SliceMatrix> matrices(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const auto path = manifest.resolve(entries[i]);
    if (!std::filesystem::exists(path)) {
      throw DataError("id '" + entries[i].id + "': missing file " + path.string());
    }
    try {
      matrices[i] = read_bag_file(path);
    } catch (const FormatError& e) {
      throw FormatError(e.kind(), "id '" + entries[i].id + "': " + e.detail());
    }
  });

  BagStore store;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    store.add({entries[i].id, manifest.class_of(entries[i]), std::move(matrices[i])});
  }
  return store;
}

void BagStore::add(SliceBag bag) {
  validate_slices(bag.slices);
  const int d = static_cast<int>(bag.dim());
  if (dim_ == 0) {
    dim_ = d;
  } else if (d != dim_) {
    throw FormatError(FormatErrorKind::DimensionMismatch,
                      "id '" + bag.subject_id + "' has d=" + std::to_string(d) +
                          ", dataset d=" + std::to_string(dim_));
  }
  const std::string id = bag.subject_id;
  if (!bags_.emplace(id, std::move(bag)).second) {
    throw DataError("duplicate bag id '" + id + "'");
  }
}

const SliceBag& BagStore::get(const std::string& id) const {
  const auto it = bags_.find(id);
  if (it == bags_.end()) throw DataError("no bag loaded for id '" + id + "'");
  return it->second;
}

}  // namespace da3d
