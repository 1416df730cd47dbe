#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "da3d/embedding_store.hpp"
#include "da3d/manifest.hpp"

namespace da3d {

// Gaussian slice bags. Every slice is N(0, I_d) background noise; in each bag
// `signal_slices` randomly placed slices additionally carry a shift of length
// `separation` along a unit direction owned by the bag's class.
struct SynthSpec {
  int classes = 2;
  int bags_per_class = 200;
  int slices = 32;
  int dim = 64;
  int signal_slices = 3;
  double separation = 4.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthBag {
  SliceBag bag;
  std::vector<int> signal_rows;  // ascending
};

std::vector<SynthBag> synthesize(const SynthSpec& spec);

// Writes bags/<id>.da3d and manifest.jsonl under `dir`. The manifest carries
// the signal rows of each bag under the extra key "signal_slices".
Manifest write_synthetic(const SynthSpec& spec, const std::filesystem::path& dir);

}  // namespace da3d
