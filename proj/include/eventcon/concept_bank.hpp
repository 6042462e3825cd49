#pragma once

// A bank of per-concept logistic classifiers. Scoring an image yields its
// concept-score vector: one probability per concept, in pool order.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eventcon/concept_clustering.hpp"
#include "eventcon/corpus_io.hpp"
#include "eventcon/linear_models.hpp"

namespace eventcon {

struct ConceptTrainingSummary {
  double best_C = 0.0;
  double cv_accuracy = 0.0;  // recorded, never gated
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

struct ConceptBank {
  std::vector<std::string> concepts;
  std::vector<LinearModel> models;  // parallel to concepts
  std::size_t feature_dim = 0;
  std::vector<ConceptTrainingSummary> summaries;  // parallel to concepts
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return concepts.size(); }
};

struct BankConfig {
  std::vector<double> grid = kDefaultCGrid;
  std::size_t folds = kDefaultFolds;
  std::uint64_t seed = 0;
  TrainOptions train;
  std::size_t threads = 1;
};

// Trains one classifier per concept in `concept_order`: C is chosen by
// stratified cross-validation on the concept's manifest, then the final
// model is refit on all of its positives and negatives.
ConceptBank train_bank(const std::vector<std::string>& concept_order,
                       const std::vector<TrainingManifest>& manifests,
                       const FeatureMatrix& features, const BankConfig& config);

struct ConceptScoreVector {
  std::string image_id;
  std::vector<double> scores;
};

std::vector<double> score_image(const ConceptBank& bank, std::span<const double> x);

// Row i of the result scores row i of `features`, for any thread count.
std::vector<ConceptScoreVector> score_matrix(const ConceptBank& bank,
                                             const FeatureMatrix& features,
                                             std::size_t threads = 1);

FeatureMatrix to_feature_matrix(const std::vector<ConceptScoreVector>& scored, std::size_t m);

inline constexpr std::size_t kDefaultTopR = 5;

// A concept is "predicted" on an image when it is among the image's r
// highest scores (ties by bank order). Returns the n most frequently
// predicted concepts with their counts, ties by bank order.
std::vector<std::pair<std::string, std::size_t>> top_concepts(
    const ConceptBank& bank, const std::vector<ConceptScoreVector>& scored, std::size_t r,
    std::size_t n);

}  // namespace eventcon
