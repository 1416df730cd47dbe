#pragma once

// On-disk fixtures shared by the CLI tests and the acceptance runner.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.hpp"
#include "da3d/checkpoint.hpp"
#include "da3d/embedding_store.hpp"
#include "da3d/manifest.hpp"

namespace da3d::fixture {

namespace fs = std::filesystem;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "da3d");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

inline fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A d=2 model whose logits equal relu(z_agg): a one-slice bag [1,0] is
// predicted class 0 and [0,1] class 1. Bags are laid out so the test-set
// confusion is [[174,10],[28,99]] with HC negative and AD positive.
inline void write_reference_matrix_fixture(const fs::path& dir) {
  ModelParams<float> p = ModelParams<float>::zeros({2, 1, 2, 2, 2});
  p.head_w1.setIdentity();
  p.head_w2.setIdentity();
  p.clf_w.setIdentity();
  save_checkpoint({p, R"({"input_dim":2,"task":{"negative_label":"HC","positive_label":"AD"}})", 0},
                  dir / "checkpoint.bin");

  SliceMatrix looks_hc(1, 2), looks_ad(1, 2);
  looks_hc << 1.0f, 0.0f;
  looks_ad << 0.0f, 1.0f;
  fs::create_directories(dir / "bags");
  write_bag_file(looks_hc, dir / "bags" / "hc.da3d");
  write_bag_file(looks_ad, dir / "bags" / "ad.da3d");

  std::ostringstream manifest;
  int serial = 0;
  auto add = [&](const std::string& label, const char* file, int count, const std::string& tag) {
    for (int i = 0; i < count; ++i) {
      manifest << R"({"id":")" << label << '_' << serial++ << R"(","path":"bags/)" << file
               << R"(","label":")" << label << R"(","split":")" << tag << "\"}\n";
    }
  };
  add("HC", "hc.da3d", 174, "test");
  add("HC", "ad.da3d", 10, "test");
  add("AD", "hc.da3d", 28, "test");
  add("AD", "ad.da3d", 99, "test");
  add("HC", "hc.da3d", 3, "train");
  add("AD", "ad.da3d", 3, "train");
  write_text(dir / "manifest.jsonl", manifest.str());
}

}  // namespace da3d::fixture
