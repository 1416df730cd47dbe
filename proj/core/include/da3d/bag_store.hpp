#pragma once

#include <map>
#include <string>
#include <vector>

#include "da3d/embedding_store.hpp"
#include "da3d/manifest.hpp"

namespace da3d {

// In-memory set of bags keyed by manifest id. All bags share one d.
class BagStore {
 public:
  BagStore() = default;

  // Reads every entry's file. Throws DataError (with the id and path) on a
  // missing file, format error, or d mismatch.
  static BagStore load(const Manifest& manifest);

  void add(SliceBag bag);

  const SliceBag& get(const std::string& id) const;
  bool contains(const std::string& id) const { return bags_.count(id) != 0; }
  std::size_t size() const { return bags_.size(); }
  int dim() const { return dim_; }

 private:
  std::map<std::string, SliceBag> bags_;
  int dim_ = 0;
};

}  // namespace da3d
