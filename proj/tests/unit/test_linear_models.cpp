#include <doctest.h>

#include <cmath>
#include <numeric>

#include "eventcon/error.hpp"
#include "eventcon/linear_models.hpp"
#include "oracles.hpp"

using namespace eventcon;

namespace {

struct Problem {
  std::vector<Vector> X;
  std::vector<int> y;
};

Problem random_problem(Rng& rng, std::size_t n, std::size_t d, double separation) {
  Problem p;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = i % 2 ? 1 : -1;
    Vector x(d);
    for (auto& v : x) v = rng.normal();
    x[0] += separation * label;
    p.X.push_back(x);
    p.y.push_back(label);
  }
  return p;
}

using Objective = double (*)(std::span<const double>, double, std::span<const Vector>,
                             std::span<const int>, double, std::vector<double>*);

// Central differences away from hinge kinks.
void check_gradient(Objective f, const Problem& p, const Vector& w, double b, double C) {
  std::vector<double> g;
  f(w, b, p.X, p.y, C, &g);
  REQUIRE(g.size() == w.size() + 1);
  const double h = 1e-6;
  for (std::size_t j = 0; j <= w.size(); ++j) {
    Vector wp = w, wm = w;
    double bp = b, bm = b;
    if (j < w.size()) {
      wp[j] += h;
      wm[j] -= h;
    } else {
      bp += h;
      bm -= h;
    }
    const double fd = (f(wp, bp, p.X, p.y, C, nullptr) - f(wm, bm, p.X, p.y, C, nullptr)) / (2 * h);
    CHECK(std::abs(fd - g[j]) <= 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

}  // namespace

TEST_CASE("logistic objective matches a direct sum") {
  Problem p{{{1.0, 2.0}, {-1.0, 0.5}}, {1, -1}};
  const Vector w{0.3, -0.2};
  const double b = 0.1, C = 2.0;
  double want = 0.5 * (0.09 + 0.04);
  for (std::size_t i = 0; i < 2; ++i) {
    const double z = p.y[i] * (w[0] * p.X[i][0] + w[1] * p.X[i][1] + b);
    want += C * std::log1p(std::exp(-z));
  }
  CHECK(logistic_objective(w, b, p.X, p.y, C) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("gradients match finite differences") {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto p = random_problem(rng, 8, 3, 1.0);
    Vector w(3);
    for (auto& v : w) v = rng.normal();
    const double b = rng.normal();
    check_gradient(&logistic_objective, p, w, b, 0.7);
    check_gradient(&squared_hinge_objective, p, w, b, 0.7);
    check_gradient(&hinge_objective, p, w, b, 0.7);
  }
}

TEST_CASE("logistic training converges monotonically") {
  Rng rng(9);
  const auto p = random_problem(rng, 60, 4, 1.5);
  const auto r = train_logistic_full(p.X, p.y, 1.0);
  CHECK(r.converged);
  for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
    CHECK(r.objective_history[i] <= r.objective_history[i - 1]);
  }
  std::vector<double> g;
  logistic_objective(r.model.weights, r.model.bias, p.X, p.y, 1.0, &g);
  for (double v : g) CHECK(std::abs(v) < 1e-4);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.X.size(); ++i) correct += predict_label(r.model, p.X[i]) == p.y[i];
  CHECK(correct >= 50);
}

TEST_CASE("hinge SVM: monotone dual and small duality gap") {
  Rng rng(10);
  for (int t = 0; t < 10; ++t) {
    const auto p = random_problem(rng, 40, 3, 1.0);
    const double C = 0.5 + rng.uniform();
    const auto r = train_linear_svm_full(p.X, p.y, C);
    CHECK(r.converged);
    for (std::size_t i = 1; i < r.objective_history.size(); ++i) {
      CHECK(r.objective_history[i] <= r.objective_history[i - 1] + 1e-12);
    }
    const double primal = hinge_objective(r.model.weights, r.model.bias, p.X, p.y, C);
    const double dual = -r.objective_history.back();
    CHECK(primal >= dual - 1e-9);
    CHECK((primal - dual) / std::max(1.0, primal) < 1e-3);
  }
}

TEST_CASE("two-point SVM is the perpendicular bisector") {
  std::vector<Vector> X = {{2.0, 0.0}, {0.0, 0.0}};
  std::vector<int> y = {1, -1};
  const auto m = train_linear_svm(X, y, 10.0);
  CHECK(m.weights[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(m.weights[1] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(m.bias == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(predict_label(m, Vector{1.0 + 1e-3, 5.0}) == 1);
  CHECK(predict_label(m, Vector{1.0 - 1e-3, 5.0}) == -1);
}

TEST_CASE("squared hinge SVM separates and converges") {
  Rng rng(11);
  const auto p = random_problem(rng, 50, 3, 3.0);
  SvmOptions opt;
  opt.loss = SvmLoss::kSquaredHinge;
  const auto r = train_linear_svm_full(p.X, p.y, 1.0, opt);
  CHECK(r.converged);
  CHECK(r.model.kind == ModelKind::kSvm);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.X.size(); ++i) correct += predict_label(r.model, p.X[i]) == p.y[i];
  CHECK(correct >= 48);
}

TEST_CASE("predictions") {
  LinearModel m{{1.0, -1.0}, 0.0, 1.0, ModelKind::kLogistic};
  CHECK(predict_label(m, Vector{1.0, 1.0}) == 1);
  CHECK(predict_proba(m, Vector{1.0, 1.0}) == 0.5);
  const double hi = predict_proba(m, Vector{1000.0, 0.0});
  const double lo = predict_proba(m, Vector{-1000.0, 0.0});
  CHECK(hi < 1.0);
  CHECK(lo > 0.0);
  CHECK_THROWS_AS(m.decision(Vector{1.0}), DataError);
  CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("invalid problems are rejected") {
  std::vector<Vector> X = {{1.0}, {2.0}};
  std::vector<int> same = {1, 1};
  std::vector<int> bad = {1, 0};
  std::vector<int> ok = {1, -1};
  CHECK_THROWS(train_logistic(X, same, 1.0));
  CHECK_THROWS(train_logistic(X, bad, 1.0));
  CHECK_THROWS(train_linear_svm(X, ok, 0.0));
  std::vector<Vector> nan = {{1.0}, {std::nan("")}};
  CHECK_THROWS(train_linear_svm(nan, ok, 1.0));
}

TEST_CASE("stratified folds balance each class") {
  std::vector<int> y;
  for (int i = 0; i < 23; ++i) y.push_back(i < 7 ? 1 : -1);
  const auto f = stratified_folds(y, 5, 3);
  std::vector<int> pos(5, 0), neg(5, 0);
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] > 0 ? pos : neg)[f[i]]++;
  for (int k = 0; k < 5; ++k) {
    CHECK(pos[k] >= 1);
    CHECK(pos[k] <= 2);
    CHECK(neg[k] >= 3);
    CHECK(neg[k] <= 4);
  }
  CHECK(f == stratified_folds(y, 5, 3));
  std::vector<int> tiny = {1, 1, -1, -1, -1, -1};
  CHECK_THROWS(stratified_folds(tiny, 5, 1));
}

TEST_CASE("cross-validation picks the smallest C on ties") {
  // Perfectly separable with a wide margin: every C gets full accuracy.
  std::vector<Vector> X;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    const int label = i % 2 ? 1 : -1;
    X.push_back({10.0 * label + 0.01 * i});
    y.push_back(label);
  }
  const auto r = cross_validate(X, y, {10.0, 1.0, 0.1}, 5, 1);
  CHECK(r.best_mean_accuracy == 1.0);
  CHECK(r.best_C == 0.1);
  CHECK(r.fold_accuracies.size() == 3);
  CHECK(r.fold_accuracies[0].size() == 5);
}

TEST_CASE("cross-validation accuracy matches a manual fold loop") {
  Rng rng(13);
  const auto p = random_problem(rng, 40, 2, 0.7);
  const std::vector<double> grid{0.01, 1.0};
  const auto r = cross_validate(p.X, p.y, grid, 4, 21);
  const auto folds = stratified_folds(p.y, 4, 21);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t k = 0; k < 4; ++k) {
      std::vector<Vector> trX;
      std::vector<int> trY;
      for (std::size_t i = 0; i < p.X.size(); ++i) {
        if (folds[i] != k) {
          trX.push_back(p.X[i]);
          trY.push_back(p.y[i]);
        }
      }
      const auto m = train_logistic(trX, trY, grid[g]);
      double right = 0, total = 0;
      for (std::size_t i = 0; i < p.X.size(); ++i) {
        if (folds[i] == k) {
          total += 1;
          right += predict_label(m, p.X[i]) == p.y[i];
        }
      }
      CHECK(r.fold_accuracies[g][k] == right / total);
    }
  }
}
