#include "da3d/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "da3d/embedding_store.hpp"
#include "da3d/parallel.hpp"
#include "json.hpp"

namespace da3d {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string class_name(const std::vector<std::string>& names, int c) {
  return c < static_cast<int>(names.size()) ? names[c] : std::to_string(c);
}

}  // namespace

EvalResult evaluate(const ModelParams<float>& params, const std::vector<std::string>& ids,
                    const BagStore& store, int positive_class) {
  if (ids.empty()) throw DataError("evaluation over an empty id set");
  const ModelDims dims = params.dims();
  if (store.dim() != dims.input_dim) {
    throw FormatError(FormatErrorKind::DimensionMismatch,
                      "checkpoint d=" + std::to_string(dims.input_dim) + ", dataset d=" +
                          std::to_string(store.dim()));
  }
  if (positive_class < 0 || positive_class >= dims.num_classes) {
    throw ConfigError("positive class out of range");
  }

  EvalResult out;
  out.samples.resize(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    const SliceBag& bag = store.get(ids[i]);
    const auto tr = forward<float>(bag.slices, params);
    SampleOutput& s = out.samples[i];
    s.id = ids[i];
    s.label = bag.label;
    s.prediction = predict_class<float>(tr.logits);
    const Eigen::VectorXd logits = tr.logits.cast<double>();
    const Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp().matrix();
    s.score = p[positive_class] / p.sum();
    s.attention.assign(tr.attention.data(), tr.attention.data() + tr.attention.size());
    s.normalized.assign(tr.normalized.data(), tr.normalized.data() + tr.normalized.size());
  });

  std::vector<int> labels;
  std::vector<int> preds;
  std::vector<double> scores;
  for (const auto& s : out.samples) {
    labels.push_back(s.label);
    preds.push_back(s.prediction);
    scores.push_back(s.score);
  }
  out.report = make_report(labels, preds, scores, dims.num_classes, positive_class);
  return out;
}

void write_eval_outputs(const EvalResult& result, const std::vector<std::string>& class_names,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", result.report.to_json() + "\n");
  write_text(dir / "confusion.csv", result.report.confusion.to_csv(class_names));

  std::ostringstream csv;
  csv << "id,label,prediction,score\n" << std::setprecision(9);
  for (const auto& s : result.samples) {
    csv << s.id << ',' << class_name(class_names, s.label) << ','
        << class_name(class_names, s.prediction) << ',' << s.score << '\n';
  }
  write_text(dir / "samples.csv", csv.str());
}

void export_embeddings(const EvalResult& result, const std::vector<std::string>& class_names,
                       const std::filesystem::path& dir) {
  if (result.samples.empty()) throw DataError("nothing to export");
  std::filesystem::create_directories(dir);
  const auto rows = static_cast<Eigen::Index>(result.samples.size());
  const auto cols = static_cast<Eigen::Index>(result.samples.front().normalized.size());
  SliceMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& v = result.samples[static_cast<std::size_t>(r)].normalized;
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(c)];
  }
  write_bag_file(m, dir / "embeddings.da3d");

  std::string lines;
  for (std::size_t i = 0; i < result.samples.size(); ++i) {
    nlohmann::ordered_json j;
    j["id"] = result.samples[i].id;
    j["path"] = "embeddings.da3d";
    j["label"] = class_name(class_names, result.samples[i].label);
    j["row"] = i;
    lines += j.dump() + "\n";
  }
  write_text(dir / "embeddings.jsonl", lines);
}

}  // namespace da3d
