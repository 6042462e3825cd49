#pragma once

// L2-regularized linear classifiers: logistic regression for concept
// classifiers, linear SVM for event classifiers, and stratified k-fold
// cross-validation over the regularization constant.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eventcon/corpus_io.hpp"

namespace eventcon {

enum class ModelKind { kLogistic, kSvm };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& s);

struct LinearModel {
  Vector weights;
  double bias = 0.0;
  double reg_C = 1.0;
  ModelKind kind = ModelKind::kLogistic;

  double decision(std::span<const double> x) const;
};

struct TrainOptions {
  double tol = 1e-6;          // on the gradient infinity-norm (primal solvers)
  std::size_t max_iter = 1000;
};

struct TrainResult {
  LinearModel model;
  std::vector<double> objective_history;  // one entry per accepted iterate
  std::size_t iterations = 0;
  bool converged = false;
};

// Objective f(w, b) = 1/2 |w|^2 + C * sum_i loss(y_i (w.x_i + b)) and its
// (sub)gradient. grad has size dim + 1; the last entry is d/db.
double logistic_objective(std::span<const double> w, double b, std::span<const Vector> X,
                          std::span<const int> y, double C, std::vector<double>* grad = nullptr);
double hinge_objective(std::span<const double> w, double b, std::span<const Vector> X,
                       std::span<const int> y, double C, std::vector<double>* grad = nullptr);
double squared_hinge_objective(std::span<const double> w, double b, std::span<const Vector> X,
                               std::span<const int> y, double C,
                               std::vector<double>* grad = nullptr);

// Limited-memory BFGS with Armijo backtracking; the objective never
// increases between recorded iterates.
TrainResult train_logistic_full(std::span<const Vector> X, std::span<const int> y, double C,
                                const TrainOptions& options = {});
LinearModel train_logistic(std::span<const Vector> X, std::span<const int> y, double C,
                           const TrainOptions& options = {});

enum class SvmLoss { kHinge, kSquaredHinge };

struct SvmOptions {
  SvmLoss loss = SvmLoss::kHinge;
  double tol = 1e-6;            // dual KKT violation for hinge, gradient norm otherwise
  std::size_t max_iter = 1000;  // hinge: passes over the data, each n pair updates
};

// Hinge loss is solved in the dual by sequential minimal optimization; its
// objective history is the dual objective 1/2 a'Qa - sum(a), which strictly
// decreases. Squared hinge uses the primal quasi-Newton solver.
TrainResult train_linear_svm_full(std::span<const Vector> X, std::span<const int> y,
                                  double C = 1.0, const SvmOptions& options = {});
LinearModel train_linear_svm(std::span<const Vector> X, std::span<const int> y,
                             double C = 1.0, const SvmOptions& options = {});

double sigmoid(double z);
// Logistic probability of the positive class, clamped to the open interval
// (0, 1) where the sigmoid would round to an endpoint.
double predict_proba(const LinearModel& model, std::span<const double> x);
// sign(w.x + b) with sign(0) = +1.
int predict_label(const LinearModel& model, std::span<const double> x);

struct CVReport {
  std::vector<double> grid;
  std::vector<std::vector<double>> fold_accuracies;  // [grid index][fold]
  double best_C = 0.0;
  double best_mean_accuracy = 0.0;
};

inline const std::vector<double> kDefaultCGrid{0.01, 0.1, 1.0, 10.0, 100.0};
inline constexpr std::size_t kDefaultFolds = 5;

// Stratified k-fold cross-validation of logistic regression. The best C
// maximizes mean fold accuracy; ties go to the smallest C.
CVReport cross_validate(std::span<const Vector> X, std::span<const int> y,
                        const std::vector<double>& grid, std::size_t folds,
                        std::uint64_t seed, const TrainOptions& options = {});

// Fold index per row; each class is spread round-robin over the folds
// after a seeded shuffle.
std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t folds,
                                          std::uint64_t seed);

}  // namespace eventcon
