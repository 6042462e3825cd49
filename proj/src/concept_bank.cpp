#include "eventcon/concept_bank.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "eventcon/error.hpp"
#include "eventcon/parallel.hpp"
#include "eventcon/rng.hpp"

namespace eventcon {

ConceptBank train_bank(const std::vector<std::string>& concept_order,
                       const std::vector<TrainingManifest>& manifests,
                       const FeatureMatrix& features, const BankConfig& config) {
  if (concept_order.empty()) throw DataError("cannot train an empty concept bank");
  std::unordered_map<std::string, const TrainingManifest*> by_concept;
  for (const auto& m : manifests) by_concept[m.concept_phrase] = &m;

  const std::size_t m = concept_order.size();
  std::vector<const TrainingManifest*> ordered(m);
  for (std::size_t i = 0; i < m; ++i) {
    auto it = by_concept.find(concept_order[i]);
    if (it == by_concept.end()) throw DataError("no training manifest for concept '" + concept_order[i] + "'");
    const auto& tm = *it->second;
    if (tm.positives.empty()) throw DataError("concept '" + concept_order[i] + "' has no positive images");
    if (tm.negatives.empty()) throw DataError("concept '" + concept_order[i] + "' has no negative images");
    for (const auto* list : {&tm.positives, &tm.negatives}) {
      for (const auto& id : *list) {
        if (!features.find(id)) {
          throw DataError("concept '" + concept_order[i] + "' references unknown image '" + id + "'");
        }
      }
    }
    ordered[i] = &tm;
  }

  ConceptBank bank;
  bank.concepts = concept_order;
  bank.models.resize(m);
  bank.summaries.resize(m);
  bank.feature_dim = features.dim();

  parallel_for(m, config.threads, [&](std::size_t i) {
    const auto& tm = *ordered[i];
    std::vector<Vector> X;
    std::vector<int> y;
    X.reserve(tm.positives.size() + tm.negatives.size());
    for (const auto& id : tm.positives) {
      X.push_back(*features.find(id));
      y.push_back(1);
    }
    for (const auto& id : tm.negatives) {
      X.push_back(*features.find(id));
      y.push_back(-1);
    }
    CVReport cv;
    try {
      cv = cross_validate(X, y, config.grid, config.folds, derive_seed(config.seed, i),
                          config.train);
    } catch (const DataError& e) {
      throw DataError("concept '" + bank.concepts[i] + "': " + e.what());
    }
    bank.models[i] = train_logistic(X, y, cv.best_C, config.train);
    bank.summaries[i] = {cv.best_C, cv.best_mean_accuracy, tm.positives.size(), tm.negatives.size()};
  });

  std::vector<double> acc;
  for (const auto& s : bank.summaries) acc.push_back(s.cv_accuracy);
  const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
  bank.metadata["cv_folds"] = std::to_string(config.folds);
  bank.metadata["cv_accuracy_min"] = std::to_string(*lo);
  bank.metadata["cv_accuracy_max"] = std::to_string(*hi);
  bank.metadata["seed"] = std::to_string(config.seed);
  return bank;
}

std::vector<double> score_image(const ConceptBank& bank, std::span<const double> x) {
  if (x.size() != bank.feature_dim) {
    throw DataError("feature dimension " + std::to_string(x.size()) + " does not match bank dimension " +
                    std::to_string(bank.feature_dim));
  }
  std::vector<double> scores(bank.models.size());
  for (std::size_t i = 0; i < bank.models.size(); ++i) scores[i] = predict_proba(bank.models[i], x);
  return scores;
}

std::vector<ConceptScoreVector> score_matrix(const ConceptBank& bank, const FeatureMatrix& features,
                                             std::size_t threads) {
  if (features.rows() > 0 && features.dim() != bank.feature_dim) {
    throw DataError("feature dimension " + std::to_string(features.dim()) +
                    " does not match bank dimension " + std::to_string(bank.feature_dim));
  }
  std::vector<ConceptScoreVector> out(features.rows());
  parallel_for(features.rows(), threads, [&](std::size_t i) {
    out[i] = {features.id(i), score_image(bank, features.row(i))};
  });
  return out;
}

FeatureMatrix to_feature_matrix(const std::vector<ConceptScoreVector>& scored, std::size_t m) {
  FeatureMatrix fm(m);
  for (const auto& s : scored) fm.add_row(s.image_id, s.scores);
  return fm;
}

std::vector<std::pair<std::string, std::size_t>> top_concepts(
    const ConceptBank& bank, const std::vector<ConceptScoreVector>& scored, std::size_t r,
    std::size_t n) {
  if (r == 0 || n == 0) throw ConfigError("top_concepts needs r >= 1 and n >= 1");
  const std::size_t m = bank.size();
  std::vector<std::size_t> counts(m, 0);
  std::vector<std::size_t> order(m);
  for (const auto& s : scored) {
    if (s.scores.size() != m) throw DataError("score vector length does not match bank size");
    std::iota(order.begin(), order.end(), 0);
    const std::size_t take = std::min(r, m);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (s.scores[a] != s.scores[b]) return s.scores[a] > s.scores[b];
                        return a < b;
                      });
    for (std::size_t k = 0; k < take; ++k) ++counts[order[k]];
  }
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
  std::vector<std::pair<std::string, std::size_t>> out;
  for (std::size_t k = 0; k < std::min(n, m); ++k) out.emplace_back(bank.concepts[order[k]], counts[order[k]]);
  return out;
}

}  // namespace eventcon
