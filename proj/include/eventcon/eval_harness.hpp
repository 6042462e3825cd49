#pragma once

// Few-shot evaluation protocols over any image representation.
//
// One-shot: per class and repetition, train a linear SVM on one sampled
// positive and one sampled negative, then test on the remaining positives
// plus an equal number of negatives drawn from the other classes.
//
// Split: per class, a one-vs-rest task with an equal number of negatives,
// split per side into train/test fractions.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "eventcon/corpus_io.hpp"
#include "eventcon/linear_models.hpp"

namespace eventcon {

enum class EvalMode { kOneShot, kSplit };

std::string to_string(EvalMode mode);
EvalMode parse_eval_mode(const std::string& s);

struct EvalConfig {
  EvalMode mode = EvalMode::kOneShot;
  std::size_t repetitions = 5;
  double split_fraction = 0.7;
  std::uint64_t seed = 0;
  double svm_C = 1.0;
  SvmOptions svm;
  std::size_t threads = 1;

  void validate() const;
};

// Labeled rows regrouped by class. Classes are sorted by name; members of
// each class keep row order.
struct LabeledFeatureSet {
  std::vector<std::string> ids;
  std::vector<Vector> rows;
  std::vector<std::size_t> class_of;
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> members;

  // Rows are taken in `order` when given (ids must match the matrix
  // exactly), otherwise in matrix order.
  static LabeledFeatureSet from(const FeatureMatrix& features,
                                const std::vector<std::string>* order = nullptr);
};

struct RepetitionDetail {
  std::size_t repetition = 0;
  std::vector<std::string> train_ids;
  std::size_t test_positives = 0;
  std::size_t test_negatives = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct ClassResult {
  std::string name;
  double accuracy = 0.0;  // mean over repetitions
  std::vector<RepetitionDetail> repetitions;
};

struct EvalReport {
  std::string representation;
  EvalMode mode = EvalMode::kOneShot;
  std::size_t repetitions = 0;
  double split_fraction = 0.0;
  std::uint64_t seed = 0;
  double svm_C = 1.0;
  std::vector<ClassResult> classes;
  double overall_accuracy = 0.0;  // unweighted mean of class accuracies
};

EvalReport one_shot_eval(const LabeledFeatureSet& data, const EvalConfig& config,
                         const std::string& representation = "features");
EvalReport split_eval(const LabeledFeatureSet& data, const EvalConfig& config,
                      const std::string& representation = "features");
EvalReport evaluate(const LabeledFeatureSet& data, const EvalConfig& config,
                    const std::string& representation = "features");

// Paired comparison: every representation is evaluated with the same seeds
// on the same image order.
std::vector<EvalReport> compare_representations(
    const std::vector<std::pair<std::string, FeatureMatrix>>& representations,
    const EvalConfig& config);

// Line-delimited JSON: one summary record, then one record per class.
std::string serialize_report(const EvalReport& report);
EvalReport deserialize_report(const std::string& text, const std::string& origin = "<memory>");
// Several reports concatenated, each starting at its summary record.
std::vector<EvalReport> deserialize_reports(const std::string& text,
                                            const std::string& origin = "<memory>");
void save_report(const EvalReport& report, const std::string& path);
EvalReport load_report(const std::string& path);

std::string format_report_table(const EvalReport& report);
std::string format_comparison_table(const std::vector<EvalReport>& reports);

}  // namespace eventcon
