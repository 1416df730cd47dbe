#include "cli/commands.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>

#include "CLI11.hpp"
#include "cli/config.hpp"
#include "da3d/bag_store.hpp"
#include "da3d/checkpoint.hpp"
#include "da3d/evaluation.hpp"
#include "da3d/split.hpp"
#include "da3d/synth.hpp"
#include "da3d/trainer.hpp"
#include "json.hpp"

namespace da3d::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// Same entries with paths made relative to `dir`, so the copy can be saved there.
Manifest rebased(const Manifest& manifest, const fs::path& dir) {
  std::vector<ManifestEntry> entries = manifest.entries();
  const fs::path target = fs::absolute(dir);
  for (auto& e : entries) {
    e.path = fs::absolute(manifest.resolve(e)).lexically_normal().lexically_relative(target);
  }
  Manifest out(std::move(entries), dir);
  out.set_label_map(manifest.label_map());
  return out;
}

void save_manifest(const Manifest& manifest, const fs::path& file) {
  const fs::path dir = file.parent_path().empty() ? fs::path(".") : file.parent_path();
  fs::create_directories(dir);
  rebased(manifest, dir).save(file);
}

std::vector<std::string> class_names(const Manifest& manifest) {
  std::vector<std::string> names(manifest.label_map().size());
  for (const auto& [name, idx] : manifest.label_map()) names[static_cast<std::size_t>(idx)] = name;
  return names;
}

bool fully_tagged_holdout(const Manifest& m) {
  for (const auto& e : m.entries()) {
    if (!e.split || e.fold) return false;
  }
  return !m.entries().empty();
}

bool has_fold_tags(const Manifest& m) {
  for (const auto& e : m.entries()) {
    if (e.fold) return true;
  }
  return false;
}

std::string checkpoint_config(const ExperimentConfig& cfg, int input_dim) {
  json j;
  j["input_dim"] = input_dim;
  j["task"] = {{"negative_label", cfg.negative_label}, {"positive_label", cfg.positive_label}};
  j["train"] = json::parse(cfg.train.to_json());
  return j.dump();
}

struct ExperimentSetup {
  ExperimentConfig cfg;
  Manifest task;
};

ExperimentSetup prepare(const std::string& config_path, const std::string& manifest_override,
                        const std::string& out_override, const std::optional<std::uint64_t>& seed) {
  ExperimentSetup s{load_config(config_path), {}};
  if (!manifest_override.empty()) s.cfg.manifest = manifest_override;
  if (!out_override.empty()) s.cfg.output_dir = out_override;
  if (seed) s.cfg.train.seed = *seed;
  if (s.cfg.manifest.empty()) throw ConfigError("config key 'manifest' is required");
  if (s.cfg.output_dir.empty()) throw ConfigError("config key 'output_dir' is required");
  if (s.cfg.negative_label.empty() || s.cfg.positive_label.empty()) {
    throw ConfigError("config keys 'negative_label' and 'positive_label' are required");
  }
  s.task = Manifest::load(s.cfg.manifest).binary_task(s.cfg.negative_label, s.cfg.positive_label);
  return s;
}

void write_train_outputs(const fs::path& dir, const ExperimentConfig& cfg, int input_dim,
                         const ModelParams<float>& params, const TrainHistory& history) {
  fs::create_directories(dir);
  save_checkpoint({params, checkpoint_config(cfg, input_dim), cfg.train.seed}, dir / "checkpoint.bin");
  write_text(dir / "history.jsonl", history.to_jsonl(cfg.train.log_wallclock));
}

int do_kfold(const ExperimentSetup& s, std::ostream& out) {
  const SplitAssignment split =
      has_fold_tags(s.task) ? assignment_from_tags(s.task)
                            : make_kfold(s.task, s.cfg.kfold_k, s.cfg.kfold_val_per_class,
                                         s.cfg.train.seed);
  check_partition(s.task, split);
  const BagStore store = BagStore::load(s.task);
  const KFoldReport report = run_kfold(s.cfg.train, split, store, 1);

  const fs::path dir = s.cfg.output_dir;
  fs::create_directories(dir);
  save_manifest(tag_manifest(s.task, split), dir / "split.jsonl");
  for (int f = 0; f < split.fold_count(); ++f) {
    const fs::path fold_dir = dir / ("fold_" + std::to_string(f));
    ExperimentConfig fold_cfg = s.cfg;
    fold_cfg.train.seed = s.cfg.train.seed + static_cast<std::uint64_t>(f);
    write_train_outputs(fold_dir, fold_cfg, store.dim(), report.models[f], report.histories[f]);
    write_text(fold_dir / "report.json", report.folds[f].to_json() + "\n");
    write_text(fold_dir / "confusion.csv", report.folds[f].confusion.to_csv(class_names(s.task)));
  }
  write_text(dir / "kfold_report.json", report.to_json() + "\n");
  out << std::setprecision(6) << "k-fold mean accuracy " << report.mean.accuracy << " auc "
      << report.mean.auc << " macro_f1 " << report.mean.macro_f1 << " fnr " << report.mean.fnr
      << '\n';
  return kExitOk;
}

int cmd_train(const std::string& config, const std::string& manifest, const std::string& out_dir,
              const std::optional<std::uint64_t>& seed, bool force_kfold, std::ostream& out) {
  ExperimentSetup s = prepare(config, manifest, out_dir, seed);
  if (force_kfold || s.cfg.split_mode == SplitMode::Kfold) return do_kfold(s, out);

  const SplitAssignment split = fully_tagged_holdout(s.task)
                                    ? assignment_from_tags(s.task)
                                    : make_split(s.task, s.cfg.ratios, s.cfg.train.seed);
  check_partition(s.task, split);
  const BagStore store = BagStore::load(s.task);
  const TrainResult result = train(s.cfg.train, split.train, split.val, store);

  write_train_outputs(s.cfg.output_dir, s.cfg, store.dim(), result.best, result.history);
  save_manifest(tag_manifest(s.task, split), s.cfg.output_dir / "split.jsonl");
  out << std::setprecision(9) << "best validation loss " << result.history.best_val_total
      << " at epoch " << result.history.best_epoch << '\n';
  return kExitOk;
}

struct LoadedModel {
  Checkpoint checkpoint;
  Manifest task;
  std::vector<std::string> ids;
};

LoadedModel load_for_eval(const std::string& checkpoint_path, const std::string& manifest_path,
                          const std::string& subset) {
  LoadedModel m{load_checkpoint(checkpoint_path), {}, {}};
  Manifest manifest = Manifest::load(manifest_path);
  json cfg = json::object();
  if (!m.checkpoint.config_json.empty()) {
    try {
      cfg = json::parse(m.checkpoint.config_json);
    } catch (const json::exception& e) {
      throw DataError(std::string("checkpoint config echo is not JSON: ") + e.what());
    }
  }
  if (cfg.contains("task")) {
    m.task = manifest.binary_task(cfg["task"].value("negative_label", ""),
                                  cfg["task"].value("positive_label", ""));
  } else {
    m.task = std::move(manifest);
  }

  for (const auto& e : m.task.entries()) {
    bool keep = subset == "all";
    if (!keep && e.split) keep = subset == to_string(*e.split);
    if (keep) m.ids.push_back(e.id);
  }
  if (m.ids.empty()) throw DataError("subset '" + subset + "' selects no manifest entries");
  m.task = m.task.subset(m.ids);

  const int num_classes = m.checkpoint.params.dims().num_classes;
  if (m.task.num_classes() > num_classes) {
    throw DataError("manifest has " + std::to_string(m.task.num_classes()) +
                    " labels, checkpoint has " + std::to_string(num_classes) + " classes");
  }
  return m;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest, const std::string& out_dir,
             const std::string& subset, bool export_only, std::ostream& out) {
  const LoadedModel m = load_for_eval(checkpoint, manifest, subset);
  const BagStore store = BagStore::load(m.task);
  const EvalResult result = evaluate(m.checkpoint.params, m.ids, store, 1);
  const auto names = class_names(m.task);
  if (export_only) {
    export_embeddings(result, names, out_dir);
    out << "exported " << result.samples.size() << " embeddings to " << out_dir << '\n';
    return kExitOk;
  }
  write_eval_outputs(result, names, out_dir);
  const EvalReport& r = result.report;
  out << std::fixed << std::setprecision(4) << "n " << r.n << " accuracy " << r.accuracy
      << " macro_f1 " << r.macro_f1;
  if (r.auc) out << " auc " << *r.auc;
  if (r.fnr) out << " fnr " << *r.fnr;
  out << '\n';
  return kExitOk;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.error_class());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-pooled slice-embedding classifier: split, train, evaluate"};
  app.require_subcommand(1);
  std::function<int()> action;

  // split
  std::string manifest, out_path, config, checkpoint, subset = "all";
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> seed_override;
  std::vector<double> ratios{0.8, 0.1, 0.1};
  int k = 0;
  int val_per_class = 10;
  std::string negative, positive;

  auto* split = app.add_subcommand("split", "Tag a manifest with a stratified split");
  split->add_option("--manifest", manifest, "Input manifest (.jsonl)")->required();
  split->add_option("--out", out_path, "Output manifest path")->required();
  split->add_option("--seed", seed, "Split seed");
  split->add_option("--ratios", ratios, "train,val,test ratios")->delimiter(',')->expected(3);
  split->add_option("--k", k, "Number of folds; 0 for a holdout split");
  split->add_option("--val-per-class", val_per_class, "Held-out validation samples per class (k-fold)");
  split->add_option("--negative", negative, "Keep only this and --positive label");
  split->add_option("--positive", positive, "Keep only this and --negative label");
  split->callback([&] {
    action = [&] {
      Manifest m = Manifest::load(manifest);
      if (!negative.empty() || !positive.empty()) m = m.binary_task(negative, positive);
      const SplitAssignment s = k > 0 ? make_kfold(m, k, val_per_class, seed)
                                      : make_split(m, {ratios[0], ratios[1], ratios[2]}, seed);
      save_manifest(tag_manifest(m, s), out_path);
      if (s.is_kfold()) {
        out << "val " << s.val.size();
        for (int f = 0; f < s.fold_count(); ++f) out << " fold" << f << ' ' << s.folds[f].size();
        out << '\n';
      } else {
        out << "train " << s.train.size() << " val " << s.val.size() << " test " << s.test.size()
            << '\n';
      }
      return kExitOk;
    };
  });

  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "Experiment config file")->required();
    cmd->add_option("--manifest", manifest, "Override the config manifest");
    cmd->add_option("--out", out_path, "Override the config output_dir");
    cmd->add_option("--seed", seed_override, "Override the config seed");
  };
  auto* train_cmd = app.add_subcommand("train", "Train on a holdout split (or k-fold per config)");
  add_train_flags(train_cmd);
  train_cmd->callback([&] {
    action = [&] { return cmd_train(config, manifest, out_path, seed_override, false, out); };
  });

  auto* kfold_cmd = app.add_subcommand("kfold", "k-fold cross-validation with a shared validation set");
  add_train_flags(kfold_cmd);
  kfold_cmd->callback([&] {
    action = [&] { return cmd_train(config, manifest, out_path, seed_override, true, out); };
  });

  auto add_eval_flags = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    cmd->add_option("--manifest", manifest, "Manifest with the samples to score")->required();
    cmd->add_option("--out", out_path, "Output directory")->required();
    cmd->add_option("--subset", subset, "all, train, val or test")
        ->check(CLI::IsMember({"all", "train", "val", "test"}));
  };
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a manifest subset");
  add_eval_flags(eval_cmd);
  eval_cmd->callback([&] {
    action = [&] { return cmd_eval(checkpoint, manifest, out_path, subset, false, out); };
  });

  auto* export_cmd =
      app.add_subcommand("export-embeddings", "Write normalized embeddings for external plotting");
  add_eval_flags(export_cmd);
  export_cmd->callback([&] {
    action = [&] { return cmd_eval(checkpoint, manifest, out_path, subset, true, out); };
  });

  SynthSpec synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic slice-bag dataset");
  synth_cmd->add_option("--out", out_path, "Output directory")->required();
  synth_cmd->add_option("--classes", synth.classes, "Class count");
  synth_cmd->add_option("--bags-per-class", synth.bags_per_class, "Bags per class");
  synth_cmd->add_option("--slices", synth.slices, "Slices per bag (N)");
  synth_cmd->add_option("--dim", synth.dim, "Embedding dimension (d)");
  synth_cmd->add_option("--signal-slices", synth.signal_slices, "Slices carrying the class signal");
  synth_cmd->add_option("--separation", synth.separation, "Signal shift length, in noise sigmas");
  synth_cmd->add_option("--seed", synth.seed, "Generator seed");
  synth_cmd->callback([&] {
    action = [&] {
      const Manifest m = write_synthetic(synth, out_path);
      out << "wrote " << m.entries().size() << " bags to " << out_path << '\n';
      return kExitOk;
    };
  });

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }
  return guarded(err, action);
}

}  // namespace da3d::cli
