#include "cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "da3d/errors.hpp"

namespace da3d::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename Num>
Num parse_number(const std::string& key, const std::string& value) {
  Num out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

std::map<std::string, Setter> make_setters(const std::filesystem::path& base) {
  std::map<std::string, Setter> table;
  auto path_of = [base](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() || base.empty() ? p : base / p;
  };
  table["manifest"] = [=](auto& c, auto&, auto& v) { c.manifest = path_of(v); };
  table["output_dir"] = [=](auto& c, auto&, auto& v) { c.output_dir = path_of(v); };
  table["negative_label"] = [](auto& c, auto&, auto& v) { c.negative_label = v; };
  table["positive_label"] = [](auto& c, auto&, auto& v) { c.positive_label = v; };
  table["split_mode"] = [](auto& c, auto& k, auto& v) {
    if (v == "holdout") c.split_mode = SplitMode::Holdout;
    else if (v == "kfold") c.split_mode = SplitMode::Kfold;
    else throw ConfigError("config key '" + k + "': expected holdout or kfold");
  };
  table["seed"] = [](auto& c, auto& k, auto& v) { c.train.seed = parse_number<std::uint64_t>(k, v); };
  table["train_ratio"] = [](auto& c, auto& k, auto& v) { c.ratios.train = parse_number<double>(k, v); };
  table["val_ratio"] = [](auto& c, auto& k, auto& v) { c.ratios.val = parse_number<double>(k, v); };
  table["test_ratio"] = [](auto& c, auto& k, auto& v) { c.ratios.test = parse_number<double>(k, v); };
  table["kfold_k"] = [](auto& c, auto& k, auto& v) { c.kfold_k = parse_number<int>(k, v); };
  table["kfold_val_per_class"] = [](auto& c, auto& k, auto& v) {
    c.kfold_val_per_class = parse_number<int>(k, v);
  };
  table["epochs"] = [](auto& c, auto& k, auto& v) { c.train.epochs = parse_number<int>(k, v); };
  table["batch_size"] = [](auto& c, auto& k, auto& v) { c.train.batch_size = parse_number<int>(k, v); };
  table["learning_rate"] = [](auto& c, auto& k, auto& v) {
    c.train.learning_rate = parse_number<double>(k, v);
  };
  table["optimizer"] = [](auto& c, auto& k, auto& v) {
    if (v == "adam") c.train.optimizer = OptimizerKind::Adam;
    else if (v == "sgd") c.train.optimizer = OptimizerKind::Sgd;
    else throw ConfigError("config key '" + k + "': expected adam or sgd");
  };
  table["beta1"] = [](auto& c, auto& k, auto& v) { c.train.beta1 = parse_number<double>(k, v); };
  table["beta2"] = [](auto& c, auto& k, auto& v) { c.train.beta2 = parse_number<double>(k, v); };
  table["epsilon"] = [](auto& c, auto& k, auto& v) { c.train.epsilon = parse_number<double>(k, v); };
  table["weight_decay"] = [](auto& c, auto& k, auto& v) {
    c.train.weight_decay = parse_number<double>(k, v);
  };
  table["dropout"] = [](auto& c, auto& k, auto& v) { c.train.dropout = parse_number<double>(k, v); };
  table["lambda"] = [](auto& c, auto& k, auto& v) { c.train.lambda = parse_number<double>(k, v); };
  table["tau"] = [](auto& c, auto& k, auto& v) { c.train.tau = parse_number<double>(k, v); };
  table["attention_hidden"] = [](auto& c, auto& k, auto& v) {
    c.train.attention_hidden = parse_number<int>(k, v);
  };
  table["head_hidden"] = [](auto& c, auto& k, auto& v) { c.train.head_hidden = parse_number<int>(k, v); };
  table["embedding_dim"] = [](auto& c, auto& k, auto& v) {
    c.train.embedding_dim = parse_number<int>(k, v);
  };
  table["log_every"] = [](auto& c, auto& k, auto& v) { c.train.log_every = parse_number<int>(k, v); };
  table["double_precision"] = [](auto& c, auto& k, auto& v) {
    c.train.double_precision = parse_bool(k, v);
  };
  table["stratified_batches"] = [](auto& c, auto& k, auto& v) {
    c.train.stratified_batches = parse_bool(k, v);
  };
  table["cosine_decay"] = [](auto& c, auto& k, auto& v) { c.train.cosine_decay = parse_bool(k, v); };
  table["variance_global_classes"] = [](auto& c, auto& k, auto& v) {
    c.train.variance_global_classes = parse_bool(k, v);
  };
  table["log_wallclock"] = [](auto& c, auto& k, auto& v) { c.train.log_wallclock = parse_bool(k, v); };
  return table;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  const auto table = make_setters(base_dir);
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(lines, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = table.find(key);
    if (it == table.end()) {
      throw ConfigError("unknown config key '" + key + "' (line " + std::to_string(lineno) + ")");
    }
    if (seen.count(key)) {
      throw ConfigError("config key '" + key + "' repeated (lines " + std::to_string(seen[key]) +
                        " and " + std::to_string(lineno) + ")");
    }
    seen[key] = lineno;
    it->second(config, key, value);
  }
  config.train.validate();
  if (config.kfold_k < 2) throw ConfigError("config key 'kfold_k' must be >= 2");
  if (config.kfold_val_per_class < 0) throw ConfigError("config key 'kfold_val_per_class' must be >= 0");
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

}  // namespace da3d::cli
