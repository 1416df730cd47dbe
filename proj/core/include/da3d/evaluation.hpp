#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "da3d/bag_store.hpp"
#include "da3d/manifest.hpp"
#include "da3d/metrics.hpp"
#include "da3d/model.hpp"

namespace da3d {

struct SampleOutput {
  std::string id;
  int label = 0;
  int prediction = 0;
  double score = 0.0;  // softmax probability of the positive class
  std::vector<float> attention;
  std::vector<float> normalized;
};

struct EvalResult {
  EvalReport report;
  std::vector<SampleOutput> samples;
};

// Predicts argmax logits for each id. AUC is filled when the task is binary
// and both classes are present.
EvalResult evaluate(const ModelParams<float>& params, const std::vector<std::string>& ids,
                    const BagStore& store, int positive_class);

// Writes report.json, confusion.csv and samples.csv into `dir`.
void write_eval_outputs(const EvalResult& result, const std::vector<std::string>& class_names,
                        const std::filesystem::path& dir);

// Writes embeddings.da3d (one normalized embedding per row, in sample order)
// and embeddings.jsonl (id, path, label, row) into `dir`.
void export_embeddings(const EvalResult& result, const std::vector<std::string>& class_names,
                       const std::filesystem::path& dir);

}  // namespace da3d
