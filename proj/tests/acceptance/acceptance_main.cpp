// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Takes an optional scratch directory.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "da3d/bag_store.hpp"
#include "da3d/checkpoint.hpp"
#include "da3d/evaluation.hpp"
#include "da3d/metrics.hpp"
#include "da3d/split.hpp"
#include "json.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace {

using namespace da3d;
namespace fs = std::filesystem;
using fixture::run_cli;
using nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome metric_oracle_replay(const fs::path& work) {
  const ConfusionMatrix c{{174, 10}, {28, 99}};
  const double acc = accuracy(c);
  const double fnr = false_negative_rate(c, 1);
  const double f1 = macro_f1(c).macro;
  bool ok = std::round(acc * 10000) / 100 == 87.78 && std::round(fnr * 10000) / 100 == 22.05 &&
            std::abs(f1 - 0.871) <= 0.001;

  // Same numbers through the eval command on an on-disk fixture.
  const fs::path dir = work / "metric_fixture";
  fs::remove_all(dir);
  fs::create_directories(dir);
  fixture::write_reference_matrix_fixture(dir);
  const auto r = run_cli({"eval", "--checkpoint", (dir / "checkpoint.bin").string(), "--manifest",
                          (dir / "manifest.jsonl").string(), "--out", (dir / "eval").string(),
                          "--subset", "test"});
  double cli_acc = -1;
  if (r.code == 0) cli_acc = json::parse(fixture::slurp(dir / "eval" / "report.json"))["accuracy"];
  ok = ok && std::abs(cli_acc - acc) < 1e-12;

  return {ok, "accuracy " + fmt("%.4f%%", acc * 100) + " fnr " + fmt("%.4f%%", fnr * 100) +
                  " macro_f1 " + fmt("%.6f", f1) + " eval-cli accuracy " + fmt("%.6f", cli_acc)};
}

Outcome gradient_suite() {
  int checked = 0, skipped = 0;
  double worst = 0;
  for (std::uint64_t seed = 0; checked < 150 && seed < 2000; ++seed) {
    const int batch = std::array{2, 4, 8}[seed % 3];
    const auto r = oracle::check_model_gradients(1000 + seed, batch);
    if (r.skipped) {
      ++skipped;
      continue;
    }
    worst = std::max(worst, r.max_error);
    ++checked;
  }
  return {checked >= 100 && worst < 1e-4,
          std::to_string(checked) + " configurations (" + std::to_string(skipped) +
              " skipped near a relu kink), max relative error " + fmt("%.3g", worst)};
}

Outcome structural_invariants() {
  constexpr int kCases = 1000;
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal(0.0, 1.0);
  double simplex = 0, perm = 0, shift = 0, recompose = 0, n1 = 0, pair = 0;

  for (int t = 0; t < kCases; ++t) {
    // Simplex, permutation and shift on a random bag.
    const int d = std::uniform_int_distribution<int>(1, 8)(rng);
    const int n = std::uniform_int_distribution<int>(1, 16)(rng);
    const auto p = ModelParams<double>::glorot({d, 4, 5, 3, 2}, rng());
    Mat<double> z(n, d);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = 3 * normal(rng);
    const auto tr = forward<double>(z, p);
    simplex = std::max(simplex, std::abs(tr.attention.sum() - 1.0));
    if (tr.attention.minCoeff() < 0) simplex = 1;

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Mat<double> zp(n, d);
    for (int i = 0; i < n; ++i) zp.row(i) = z.row(order[static_cast<std::size_t>(i)]);
    const auto tp = forward<double>(zp, p);
    auto rel = [](const Vec<double>& a, const Vec<double>& b) {
      return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff());
    };
    perm = std::max({perm, rel(tr.aggregate, tp.aggregate), rel(tr.logits, tp.logits)});

    const Vec<double> shifted = (tr.scores.array() + 100 * normal(rng)).matrix();
    shift = std::max(shift, (attention_weights(shifted) - tr.attention).cwiseAbs().maxCoeff());

    // N=1 bags: attention parameters get exactly zero gradient.
    const auto single = oracle::random_problem(rng(), 4, 2, {1});
    std::vector<ForwardTrace<double>> traces;
    const auto res = oracle::batch_objective(single, single.params, ObjectiveConfig{}, &traces);
    std::vector<const Mat<double>*> slices;
    for (const auto& b : single.bags) slices.push_back(&b);
    const auto g = backward<double>(traces, slices, single.params, res.logit_grad, res.normalized_grad);
    n1 = std::max({n1, g.att_w1.cwiseAbs().maxCoeff(), g.att_w2.cwiseAbs().maxCoeff()});

    // Recomposition against the literal formulas.
    const auto prob = oracle::random_problem(rng(), std::uniform_int_distribution<int>(2, 8)(rng));
    std::vector<ForwardTrace<double>> pt;
    const auto whole = oracle::batch_objective(prob, prob.params, ObjectiveConfig{}, &pt);
    Mat<double> logits(static_cast<Eigen::Index>(pt.size()), 2);
    Mat<double> h(static_cast<Eigen::Index>(pt.size()), prob.params.dims().embedding_dim);
    for (std::size_t i = 0; i < pt.size(); ++i) {
      logits.row(static_cast<Eigen::Index>(i)) = pt[i].logits.transpose();
      h.row(static_cast<Eigen::Index>(i)) = pt[i].normalized.transpose();
    }
    const long double want = oracle::reference_ce(logits, prob.labels) +
                             oracle::reference_contrastive(h, prob.labels, 0.07L) +
                             0.1L * oracle::reference_variance(h, prob.labels);
    recompose = std::max(recompose, oracle::relative_error(whole.loss.total,
                                                           static_cast<double>(want), 1e-12));

    // B=2 with a shared label.
    Mat<double> two(2, 3);
    for (Eigen::Index i = 0; i < two.size(); ++i) two.data()[i] = normal(rng);
    two.rowwise().normalize();
    const int label = static_cast<int>(rng() % 2);
    pair = std::max(pair, std::abs(contrastive<double>(two, {label, label}, 0.07).value));
  }

  const bool ok = simplex <= 1e-6 && perm <= 1e-6 && shift <= 1e-12 && n1 == 0.0 &&
                  recompose <= 1e-6 && pair == 0.0;
  std::ostringstream os;
  os << kCases << " cases each: simplex " << simplex << ", permutation " << perm << ", shift "
     << shift << ", N=1 attention grad " << n1 << ", recomposition " << recompose
     << ", B=2 same-label contrastive " << pair;
  return {ok, os.str()};
}

// ---------------------------------------------------------------------------

struct SynthRun {
  int code = -1;
  double accuracy = 0, auc = 0;
  double signal_attention = 0, background_attention = 0;
  std::string error;
};

void write_default_config(const fs::path& cfg) {
  fixture::write_text(cfg,
                      "manifest = data/manifest.jsonl\n"
                      "output_dir = run\n"
                      "negative_label = class0\n"
                      "positive_label = class1\n"
                      "epochs = 50\n"
                      "seed = 1\n");
}

SynthRun synthetic_pipeline(const fs::path& dir, double separation) {
  SynthRun out;
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto synth = run_cli({"synth", "--out", (dir / "data").string(), "--classes", "2",
                        "--bags-per-class", "200", "--slices", "32", "--dim", "64",
                        "--signal-slices", "3", "--separation", std::to_string(separation),
                        "--seed", "1"});
  if (synth.code != 0) {
    out.error = synth.err;
    return out;
  }
  write_default_config(dir / "exp.cfg");
  auto tr = run_cli({"train", "--config", (dir / "exp.cfg").string()});
  if (tr.code != 0) {
    out.code = tr.code;
    out.error = tr.err;
    return out;
  }
  auto ev = run_cli({"eval", "--checkpoint", (dir / "run" / "checkpoint.bin").string(),
                     "--manifest", (dir / "run" / "split.jsonl").string(), "--out",
                     (dir / "eval").string(), "--subset", "test"});
  out.code = ev.code;
  if (ev.code != 0) {
    out.error = ev.err;
    return out;
  }
  const json report = json::parse(fixture::slurp(dir / "eval" / "report.json"));
  out.accuracy = report["accuracy"];
  out.auc = report.value("auc", 0.0);

  // Attention on planted rows versus the rest, averaged over test bags.
  const Manifest split = Manifest::load(dir / "run" / "split.jsonl").binary_task("class0", "class1");
  std::vector<std::string> test_ids;
  for (const auto& e : split.entries()) {
    if (e.split == SplitTag::Test) test_ids.push_back(e.id);
  }
  const Manifest test = split.subset(test_ids);
  const BagStore store = BagStore::load(test);
  const auto result = evaluate(load_checkpoint(dir / "run" / "checkpoint.bin").params, test_ids,
                               store, 1);
  double sig_sum = 0, bg_sum = 0;
  for (const auto& s : result.samples) {
    const std::vector<int> rows = json::parse(test.find(s.id).extra.at("signal_slices"));
    double sig = 0, all = 0;
    for (float a : s.attention) all += a;
    for (int r : rows) sig += s.attention[static_cast<std::size_t>(r)];
    sig_sum += sig / rows.size();
    bg_sum += (all - sig) / (s.attention.size() - rows.size());
  }
  out.signal_attention = sig_sum / result.samples.size();
  out.background_attention = bg_sum / result.samples.size();
  return out;
}

Outcome synthetic_end_to_end(const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const SynthRun signal = synthetic_pipeline(work / "synth_sep4", 4.0);
  const SynthRun null = synthetic_pipeline(work / "synth_sep0", 0.0);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (signal.code != 0 || null.code != 0) {
    return {false, "pipeline failed: " + signal.error + null.error};
  }
  const bool ok = signal.accuracy >= 0.95 && signal.auc >= 0.98 && null.auc >= 0.4 &&
                  null.auc <= 0.6 && signal.signal_attention > signal.background_attention;
  std::ostringstream os;
  os << "separation 4: test accuracy " << signal.accuracy << " auc " << signal.auc
     << ", attention signal " << signal.signal_attention << " vs background "
     << signal.background_attention << "; separation 0: auc " << null.auc << "; "
     << fmt("%.1f", seconds) << " s";
  return {ok, os.str()};
}

Outcome determinism(const fs::path& work) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  run_cli({"synth", "--out", (dir / "data").string(), "--bags-per-class", "60", "--seed", "9"});
  write_default_config(dir / "exp.cfg");
  const std::string cfg = (dir / "exp.cfg").string();
  const auto a = run_cli({"train", "--config", cfg, "--out", (dir / "a").string(), "--seed", "3"});
  const auto b = run_cli({"train", "--config", cfg, "--out", (dir / "b").string(), "--seed", "3"});
  if (a.code != 0 || b.code != 0) return {false, "train failed: " + a.err + b.err};
  const bool hist = fixture::slurp(dir / "a" / "history.jsonl") == fixture::slurp(dir / "b" / "history.jsonl");
  const bool ckpt = fixture::slurp(dir / "a" / "checkpoint.bin") == fixture::slurp(dir / "b" / "checkpoint.bin");
  return {hist && ckpt && a.out == b.out,
          std::string("history ") + (hist ? "identical" : "differs") + ", checkpoint " +
              (ckpt ? "identical" : "differs") + " (" +
              std::to_string(fixture::slurp(dir / "a" / "checkpoint.bin").size()) + " bytes)"};
}

// ---------------------------------------------------------------------------

Outcome format_fuzzing() {
  constexpr int kCases = 10000;
  std::mt19937_64 rng(77);
  std::map<std::string, int> by_kind;
  int accepted = 0, uncategorized = 0;
  const char* kind_names[] = {"bad_magic", "unsupported_version", "truncated", "trailing_data",
                              "dimension_mismatch", "non_finite", "empty_bag", "io"};

  for (int t = 0; t < kCases; ++t) {
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    const int d = std::uniform_int_distribution<int>(1, 24)(rng);
    SliceMatrix m(n, d);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    std::ostringstream os;
    write_bag(m, os);
    std::string bytes = os.str();

    auto rand_below = [&](std::size_t k) -> std::size_t {
      if (k == 0) return 0;
      return static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(0, k - 1)(rng));
    };
    // One mutation per case. Chains can rebuild a well-formed file (cut the
    // payload, then append the same number of finite bytes), which no reader
    // of a checksum-free format can tell apart from a real one.
    const std::string original = bytes;
    switch (rng() % 4) {
      case 0:  // truncate
        bytes.resize(rand_below(bytes.size()));
        break;
      case 1: {  // append
        const std::size_t extra = 1 + rand_below(64);
        for (std::size_t i = 0; i < extra; ++i) bytes.push_back(static_cast<char>(rng()));
        break;
      }
      case 2:  // corrupt a header byte
        bytes[rand_below(16)] ^= static_cast<char>(1 + rand_below(255));
        break;
      default: {  // NaN or Inf in the payload
        const std::size_t at = 16 + 4 * rand_below((bytes.size() - 16) / 4);
        std::uint32_t bits = 0x7f800000u;
        if (rng() % 3 != 0) bits |= 1u + static_cast<std::uint32_t>(rand_below(0x7fffff));
        if (rng() % 2) bits |= 0x80000000u;
        std::memcpy(&bytes[at], &bits, 4);
        break;
      }
    }
    if (bytes == original) return {false, "mutation left the file unchanged"};
    std::istringstream in(bytes);
    try {
      read_bag(in, d);
      ++accepted;
    } catch (const FormatError& e) {
      ++by_kind[kind_names[static_cast<int>(e.kind())]];
    } catch (...) {
      ++uncategorized;
    }
  }
  std::ostringstream detail;
  detail << kCases << " mutated files, accepted " << accepted << ", uncategorized "
         << uncategorized << ";";
  for (const auto& [k, v] : by_kind) detail << ' ' << k << ' ' << v;
  return {accepted == 0 && uncategorized == 0, detail.str()};
}

// ---------------------------------------------------------------------------

void write_count_manifest(const fs::path& file, const std::vector<std::pair<std::string, int>>& counts) {
  std::ostringstream os;
  for (const auto& [label, n] : counts) {
    for (int i = 0; i < n; ++i) {
      os << R"({"id":")" << label << '_' << i << R"(","path":"bags/)" << label << '_' << i
         << R"(.da3d","label":")" << label << "\"}\n";
    }
  }
  fixture::write_text(file, os.str());
}

Outcome protocol_replay(const fs::path& work) {
  const fs::path dir = work / "protocol";
  fs::remove_all(dir);
  write_count_manifest(dir / "hc_ad.jsonl", {{"HC", 1831}, {"MCI", 1668}, {"AD", 1270}});
  const auto r = run_cli({"split", "--manifest", (dir / "hc_ad.jsonl").string(), "--out",
                          (dir / "hc_ad_split.jsonl").string(), "--negative", "HC", "--positive",
                          "AD", "--seed", "0"});
  if (r.code != 0) return {false, "split failed: " + r.err};
  std::map<std::string, int> test;
  for (const auto& e : Manifest::load(dir / "hc_ad_split.jsonl").entries()) {
    if (e.split == SplitTag::Test) ++test[e.label];
  }
  const bool hc_ad = test["HC"] == 184 && test["AD"] == 127;

  const std::vector<std::pair<std::string, int>> headache = {
      {"MIG", 96}, {"APTH", 48}, {"PPTH", 49}, {"HC", 104}};
  write_count_manifest(dir / "headache.jsonl", headache);
  const auto k = run_cli({"split", "--manifest", (dir / "headache.jsonl").string(), "--out",
                          (dir / "headache_split.jsonl").string(), "--k", "5", "--val-per-class",
                          "10", "--seed", "0"});
  if (k.code != 0) return {false, "kfold split failed: " + k.err};
  const Manifest tagged = Manifest::load(dir / "headache_split.jsonl");
  std::map<std::string, int> val;
  std::map<std::pair<std::string, int>, int> fold;
  for (const auto& e : tagged.entries()) {
    if (e.split == SplitTag::Val) ++val[e.label];
    if (e.fold) ++fold[{e.label, *e.fold}];
  }
  bool shape = tagged.entries().size() == 297;
  std::ostringstream os;
  os << "HC/AD test " << test["HC"] << " + " << test["AD"] << " = " << test["HC"] + test["AD"]
     << "; headache folds per class:";
  for (const auto& [label, n] : headache) {
    shape = shape && val[label] == 10;
    int total = 0;
    os << ' ' << label << " [";
    for (int f = 0; f < 5; ++f) {
      const int c = fold[{label, f}];
      total += c;
      shape = shape && std::abs(c - (n - 10) / 5.0) <= 1.0;
      os << (f ? "," : "") << c;
    }
    os << "]";
    shape = shape && total == n - 10;
  }
  os << ", 10 held out per class";
  return {hc_ad && shape, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "da3d_acceptance";
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric-oracle-replay", [&] { return metric_oracle_replay(work); }},
      {"gradient-suite", gradient_suite},
      {"structural-invariants", structural_invariants},
      {"synthetic-end-to-end", [&] { return synthetic_end_to_end(work); }},
      {"determinism", [&] { return determinism(work); }},
      {"format-fuzzing", format_fuzzing},
      {"protocol-replay", [&] { return protocol_replay(work); }},
  };

  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
