#include "eventcon/linear_models.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "eventcon/error.hpp"
#include "eventcon/rng.hpp"

namespace eventcon {

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kLogistic ? "logistic" : "svm";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "logistic") return ModelKind::kLogistic;
  if (s == "svm") return ModelKind::kSvm;
  throw DataError("unknown model kind '" + s + "'");
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

// log(1 + exp(z)) without overflow.
double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_problem(std::span<const Vector> X, std::span<const int> y, double C) {
  if (X.size() != y.size()) throw DataError("feature and label counts differ");
  if (X.size() < 2) throw DataError("need at least two training examples");
  if (!(C > 0.0) || !std::isfinite(C)) throw ConfigError("regularization C must be positive");
  bool pos = false, neg = false;
  const std::size_t dim = X[0].size();
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (y[i] == 1) {
      pos = true;
    } else if (y[i] == -1) {
      neg = true;
    } else {
      throw DataError("labels must be -1 or +1");
    }
    if (X[i].size() != dim) throw DataError("training rows differ in dimension");
    for (double v : X[i]) {
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
    }
  }
  if (!pos || !neg) throw DataError("training data contains a single class");
}

using Objective = double (*)(std::span<const double>, double, std::span<const Vector>,
                             std::span<const int>, double, std::vector<double>*);

// L-BFGS over theta = (w, b) with Armijo backtracking.
TrainResult minimize_lbfgs(Objective f, std::span<const Vector> X, std::span<const int> y,
                           double C, double tol, std::size_t max_iter, ModelKind kind) {
  const std::size_t dim = X[0].size();
  const std::size_t n = dim + 1;
  constexpr std::size_t kMemory = 10;

  std::vector<double> theta(n, 0.0), grad(n), next(n), next_grad(n), dir(n);
  auto eval = [&](const std::vector<double>& t, std::vector<double>& g) {
    return f(std::span<const double>(t.data(), dim), t[dim], X, y, C, &g);
  };
  double value = eval(theta, grad);

  TrainResult result;
  result.objective_history.push_back(value);
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  auto inf_norm = [](const std::vector<double>& g) {
    double m = 0.0;
    for (double v : g) m = std::max(m, std::abs(v));
    return m;
  };

  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    if (inf_norm(grad) <= tol) {
      result.converged = true;
      break;
    }
    // Two-loop recursion.
    dir = grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * dot(s_hist[k], dir);
      for (std::size_t j = 0; j < n; ++j) dir[j] -= alpha[k] * y_hist[k][j];
    }
    double gamma = 1.0;
    if (!s_hist.empty()) {
      gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
    } else {
      gamma = 1.0 / std::max(1.0, std::sqrt(dot(grad, grad)));
    }
    for (double& d : dir) d *= gamma;
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * dot(y_hist[k], dir);
      for (std::size_t j = 0; j < n; ++j) dir[j] += s_hist[k][j] * (alpha[k] - beta);
    }
    for (double& d : dir) d = -d;
    double slope = dot(dir, grad);
    if (!(slope < 0.0)) {
      for (std::size_t j = 0; j < n; ++j) dir[j] = -grad[j] / std::max(1.0, std::sqrt(dot(grad, grad)));
      slope = dot(dir, grad);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = 1.0;
    double next_value = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t j = 0; j < n; ++j) next[j] = theta[j] + step * dir[j];
      next_value = eval(next, next_grad);
      if (std::isfinite(next_value) && next_value <= value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || !(next_value < value)) break;  // no further progress possible

    std::vector<double> s(n), yv(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j] = next[j] - theta[j];
      yv[j] = next_grad[j] - grad[j];
    }
    const double sy = dot(s, yv);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(yv, yv))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (s_hist.size() > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    theta.swap(next);
    grad.swap(next_grad);
    value = next_value;
    result.objective_history.push_back(value);
  }
  if (!result.converged && inf_norm(grad) <= tol) result.converged = true;
  result.iterations = it;
  result.model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(dim));
  result.model.bias = theta[dim];
  result.model.reg_C = C;
  result.model.kind = kind;
  return result;
}

}  // namespace

double LinearModel::decision(std::span<const double> x) const {
  if (x.size() != weights.size()) {
    throw DataError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                    std::to_string(weights.size()));
  }
  return dot(weights, x) + bias;
}

double logistic_objective(std::span<const double> w, double b, std::span<const Vector> X,
                          std::span<const int> y, double C, std::vector<double>* grad) {
  const std::size_t dim = w.size();
  double value = 0.5 * dot(w, w);
  if (grad) {
    grad->assign(dim + 1, 0.0);
    std::copy(w.begin(), w.end(), grad->begin());
  }
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double z = -y[i] * (dot(w, X[i]) + b);
    value += C * log1pexp(z);
    if (grad) {
      const double coef = -C * y[i] * sigmoid(z);
      for (std::size_t j = 0; j < dim; ++j) (*grad)[j] += coef * X[i][j];
      (*grad)[dim] += coef;
    }
  }
  return value;
}

double hinge_objective(std::span<const double> w, double b, std::span<const Vector> X,
                       std::span<const int> y, double C, std::vector<double>* grad) {
  const std::size_t dim = w.size();
  double value = 0.5 * dot(w, w);
  if (grad) {
    grad->assign(dim + 1, 0.0);
    std::copy(w.begin(), w.end(), grad->begin());
  }
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double slack = 1.0 - y[i] * (dot(w, X[i]) + b);
    if (slack > 0.0) {
      value += C * slack;
      if (grad) {  // the subgradient at slack == 0 is taken as 0
        for (std::size_t j = 0; j < dim; ++j) (*grad)[j] -= C * y[i] * X[i][j];
        (*grad)[dim] -= C * y[i];
      }
    }
  }
  return value;
}

double squared_hinge_objective(std::span<const double> w, double b, std::span<const Vector> X,
                               std::span<const int> y, double C, std::vector<double>* grad) {
  const std::size_t dim = w.size();
  double value = 0.5 * dot(w, w);
  if (grad) {
    grad->assign(dim + 1, 0.0);
    std::copy(w.begin(), w.end(), grad->begin());
  }
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double slack = 1.0 - y[i] * (dot(w, X[i]) + b);
    if (slack > 0.0) {
      value += C * slack * slack;
      if (grad) {
        const double coef = -2.0 * C * slack * y[i];
        for (std::size_t j = 0; j < dim; ++j) (*grad)[j] += coef * X[i][j];
        (*grad)[dim] += coef;
      }
    }
  }
  return value;
}

TrainResult train_logistic_full(std::span<const Vector> X, std::span<const int> y, double C,
                                const TrainOptions& options) {
  check_problem(X, y, C);
  return minimize_lbfgs(&logistic_objective, X, y, C, options.tol, options.max_iter,
                        ModelKind::kLogistic);
}

LinearModel train_logistic(std::span<const Vector> X, std::span<const int> y, double C,
                           const TrainOptions& options) {
  return train_logistic_full(X, y, C, options).model;
}

namespace {

// SMO with maximal-violating-pair selection on
//   min 1/2 a'Qa - e'a  s.t. 0 <= a_i <= C, y'a = 0,  Q_ij = y_i y_j x_i.x_j.
TrainResult smo_hinge(std::span<const Vector> X, std::span<const int> y, double C,
                      const SvmOptions& options) {
  const std::size_t n = X.size();
  const std::size_t dim = X[0].size();
  constexpr double kTau = 1e-12;

  std::vector<double> alpha(n, 0.0), G(n, -1.0), diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = dot(X[i], X[i]);
  Vector w(dim, 0.0);
  double alpha_sum = 0.0;

  auto is_upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto is_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  TrainResult result;
  result.objective_history.push_back(0.0);
  const std::size_t max_updates = std::max<std::size_t>(1, options.max_iter) * std::max<std::size_t>(n, 1);
  std::size_t updates = 0;
  for (; updates < max_updates; ++updates) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * G[t];
      const bool in_up = (y[t] == 1 && !is_upper(t)) || (y[t] == -1 && !is_lower(t));
      const bool in_low = (y[t] == 1 && !is_lower(t)) || (y[t] == -1 && !is_upper(t));
      if (in_up && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i == n || j == n || gmax - gmin < options.tol) {
      result.converged = true;
      break;
    }

    const double kij = dot(X[i], X[j]);
    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = diag[i] + diag[j] - 2.0 * kij;
      if (quad <= 0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = diag[i] + diag[j] - 2.0 * kij;
      if (quad <= 0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C) {
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }

    const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
    if (dai == 0.0 && daj == 0.0) break;  // numerically stuck
    for (std::size_t d = 0; d < dim; ++d) w[d] += dai * y[i] * X[i][d] + daj * y[j] * X[j][d];
    alpha_sum += dai + daj;
    // G_t = y_t w.x_t - 1 changes by y_t (dai y_i x_i + daj y_j x_j).x_t.
    for (std::size_t t = 0; t < n; ++t) {
      G[t] += y[t] * (dai * y[i] * dot(X[i], X[t]) + daj * y[j] * dot(X[j], X[t]));
    }
    result.objective_history.push_back(0.5 * dot(w, w) - alpha_sum);
  }
  result.iterations = updates;

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (is_upper(t)) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);

  result.model.weights = std::move(w);
  result.model.bias = -rho;
  result.model.reg_C = C;
  result.model.kind = ModelKind::kSvm;
  return result;
}

}  // namespace

TrainResult train_linear_svm_full(std::span<const Vector> X, std::span<const int> y, double C,
                                  const SvmOptions& options) {
  check_problem(X, y, C);
  if (options.loss == SvmLoss::kSquaredHinge) {
    return minimize_lbfgs(&squared_hinge_objective, X, y, C, options.tol, options.max_iter,
                          ModelKind::kSvm);
  }
  return smo_hinge(X, y, C, options);
}

LinearModel train_linear_svm(std::span<const Vector> X, std::span<const int> y, double C,
                             const SvmOptions& options) {
  return train_linear_svm_full(X, y, C, options).model;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double predict_proba(const LinearModel& model, std::span<const double> x) {
  const double p = sigmoid(model.decision(x));
  return std::clamp(p, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

int predict_label(const LinearModel& model, std::span<const double> x) {
  return model.decision(x) >= 0.0 ? 1 : -1;
}

std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t folds,
                                          std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() < folds || neg.size() < folds) {
    throw DataError("class too small to stratify into " + std::to_string(folds) +
                    " folds (positives " + std::to_string(pos.size()) + ", negatives " +
                    std::to_string(neg.size()) + ")");
  }
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);
  std::vector<std::size_t> fold(y.size());
  for (std::size_t k = 0; k < pos.size(); ++k) fold[pos[k]] = k % folds;
  for (std::size_t k = 0; k < neg.size(); ++k) fold[neg[k]] = k % folds;
  return fold;
}

CVReport cross_validate(std::span<const Vector> X, std::span<const int> y,
                        const std::vector<double>& grid, std::size_t folds, std::uint64_t seed,
                        const TrainOptions& options) {
  if (grid.empty()) throw ConfigError("cross-validation grid is empty");
  if (folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (X.size() != y.size()) throw DataError("feature and label counts differ");
  if (X.size() < folds) throw DataError("fewer examples than folds");
  const auto fold = stratified_folds(y, folds, seed);

  CVReport report;
  report.grid = grid;
  report.fold_accuracies.assign(grid.size(), std::vector<double>(folds, 0.0));
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<Vector> train_x;
    std::vector<int> train_y;
    std::vector<std::size_t> test;
    for (std::size_t i = 0; i < X.size(); ++i) {
      if (fold[i] == f) {
        test.push_back(i);
      } else {
        train_x.push_back(X[i]);
        train_y.push_back(y[i]);
      }
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const LinearModel m = train_logistic(train_x, train_y, grid[g], options);
      std::size_t correct = 0;
      for (std::size_t i : test) correct += predict_label(m, X[i]) == y[i] ? 1 : 0;
      report.fold_accuracies[g][f] = static_cast<double>(correct) / static_cast<double>(test.size());
    }
  }
  bool have_best = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& acc = report.fold_accuracies[g];
    const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(folds);
    if (!have_best || mean > report.best_mean_accuracy ||
        (mean == report.best_mean_accuracy && grid[g] < report.best_C)) {
      report.best_mean_accuracy = mean;
      report.best_C = grid[g];
      have_best = true;
    }
  }
  return report;
}

}  // namespace eventcon
