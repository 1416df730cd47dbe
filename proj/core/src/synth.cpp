#include "da3d/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "da3d/errors.hpp"
#include "da3d/rng.hpp"

namespace da3d {

void SynthSpec::validate() const {
  if (classes < 1 || bags_per_class < 1 || slices < 1 || dim < 1) {
    throw ConfigError("synthetic spec needs positive class, bag, slice and dim counts");
  }
  if (signal_slices < 0 || signal_slices > slices) {
    throw ConfigError("signal slice count must lie in [0, slices]");
  }
  if (!(separation >= 0) || !std::isfinite(separation)) {
    throw ConfigError("separation must be finite and >= 0");
  }
}

std::vector<SynthBag> synthesize(const SynthSpec& spec) {
  spec.validate();
  Rng rng = make_rng(spec.seed, "synth");
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Eigen::VectorXd> directions;
  for (int c = 0; c < spec.classes; ++c) {
    Eigen::VectorXd u(spec.dim);
    do {
      for (int k = 0; k < spec.dim; ++k) u[k] = normal(rng);
    } while (u.norm() == 0.0);
    directions.push_back(u / u.norm());
  }

  std::vector<SynthBag> out;
  out.reserve(static_cast<std::size_t>(spec.classes) * spec.bags_per_class);
  std::vector<int> rows(static_cast<std::size_t>(spec.slices));
  for (int c = 0; c < spec.classes; ++c) {
    for (int b = 0; b < spec.bags_per_class; ++b) {
      char id[64];
      std::snprintf(id, sizeof id, "class%d_%05d", c, b);
      SynthBag sb;
      sb.bag.subject_id = id;
      sb.bag.label = c;
      Eigen::MatrixXd z(spec.slices, spec.dim);
      for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);

      std::iota(rows.begin(), rows.end(), 0);
      std::shuffle(rows.begin(), rows.end(), rng);
      sb.signal_rows.assign(rows.begin(), rows.begin() + spec.signal_slices);
      std::sort(sb.signal_rows.begin(), sb.signal_rows.end());
      for (int r : sb.signal_rows) z.row(r) += spec.separation * directions[c].transpose();

      sb.bag.slices = z.cast<float>();
      out.push_back(std::move(sb));
    }
  }
  return out;
}

Manifest write_synthetic(const SynthSpec& spec, const std::filesystem::path& dir) {
  const auto bags = synthesize(spec);
  std::filesystem::create_directories(dir / "bags");
  std::vector<ManifestEntry> entries;
  for (const auto& sb : bags) {
    ManifestEntry e;
    e.id = sb.bag.subject_id;
    e.path = std::filesystem::path("bags") / (e.id + ".da3d");
    e.label = "class" + std::to_string(sb.bag.label);
    std::string rows = "[";
    for (std::size_t i = 0; i < sb.signal_rows.size(); ++i) {
      rows += (i ? "," : "") + std::to_string(sb.signal_rows[i]);
    }
    e.extra["signal_slices"] = rows + "]";
    write_bag_file(sb.bag.slices, dir / e.path);
    entries.push_back(std::move(e));
  }
  Manifest manifest(std::move(entries), dir);
  manifest.save(dir / "manifest.jsonl");
  return manifest;
}

}  // namespace da3d
