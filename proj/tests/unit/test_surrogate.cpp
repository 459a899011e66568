#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "turboshape/errors.hpp"
#include "turboshape/surrogate.hpp"

using namespace turboshape;

namespace {

Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }

TrainingSet sin_samples(int n, bool grads) {
  TrainingSet s;
  for (int i = 0; i < n; ++i) {
    const double x = 2.0 * M_PI * i / (n - 1);
    s.x.push_back(v1(x));
    s.y.push_back(std::sin(x));
    if (grads) s.grad.push_back(v1(std::cos(x)));
  }
  return s;
}

double forrester(double x) { return std::pow(6.0 * x - 2.0, 2) * std::sin(12.0 * x - 4.0); }

}  // namespace

TEST_CASE("training set validation") {
  TrainingSet s;
  s.x = {v1(0.0)};
  s.y = {1.0};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.x = {v1(0.0), v1(0.0)};
  s.y = {1.0, 2.0};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.x = {v1(0.0), v1(1.0)};
  s.y = {1.0, NAN};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s.y = {1.0, 2.0};
  s.grad = {v1(0.0)};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
}

TEST_CASE("plain Kriging interpolates a linear function") {
  TrainingSet s;
  s.x = {v1(0.0), v1(1.0)};
  s.y = {1.0, 3.0};
  auto m = KrigingModel::fit(s, false);
  for (int i = 0; i < 2; ++i) {
    auto p = m.predict(s.x[i]);
    CHECK(std::abs(p.mean - s.y[i]) <= 10.0 * m.nugget() * 3.0);
    CHECK(p.sd <= 1e-3 * std::sqrt(m.process_variance()));
  }
  CHECK_THROWS_AS(KrigingModel::fit(s, true), InvalidArgument);
}

TEST_CASE("GEK interpolates values and derivatives of sin") {
  auto s = sin_samples(5, true);
  auto m = KrigingModel::fit(s, true);
  CHECK(m.interpolation_residual() <= 10.0 * m.nugget());
  CHECK(m.warnings().empty());
  for (int i = 0; i < s.size(); ++i) {
    CHECK(std::abs(m.predict(s.x[i]).mean - s.y[i]) <= 10.0 * m.nugget());
    CHECK(std::abs(m.predict_gradient(s.x[i])[0] - s.grad[i][0]) <= 10.0 * m.nugget());
  }
}

TEST_CASE("predicted gradient matches finite differences of the mean") {
  TrainingSet s;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 12; ++i) {
    Eigen::VectorXd x(2);
    x << u(rng), u(rng);
    s.x.push_back(x);
    s.y.push_back(std::sin(2 * x[0]) * std::cos(x[1]));
    Eigen::VectorXd g(2);
    g << 2 * std::cos(2 * x[0]) * std::cos(x[1]), -std::sin(2 * x[0]) * std::sin(x[1]);
    s.grad.push_back(g);
  }
  for (bool grads : {false, true}) {
    auto m = KrigingModel::fit(s, grads);
    Eigen::VectorXd x(2);
    x << 0.13, -0.41;
    const auto g = m.predict_gradient(x);
    for (int a = 0; a < 2; ++a) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(2);
      e[a] = 1e-4;
      const double fd = (m.predict(x + e).mean - m.predict(x - e).mean) / 2e-4;
      CHECK(std::abs(fd - g[a]) < 1e-5 * (1.0 + std::abs(g[a])));
    }
  }
}

TEST_CASE("constant responses give a constant predictor") {
  TrainingSet s;
  for (int i = 0; i < 4; ++i) {
    s.x.push_back(v1(i));
    s.y.push_back(2.5);
  }
  auto m = KrigingModel::fit(s, false);
  CHECK(m.process_variance() <= 1e-18);
  for (double x : {-3.0, 0.5, 1.7, 10.0}) CHECK(std::abs(m.predict(v1(x)).mean - 2.5) < 1e-9);
}

TEST_CASE("far from the data the prediction returns to the prior") {
  auto s = sin_samples(6, false);
  auto m = KrigingModel::fit(s, false);
  auto p = m.predict(v1(1e3 * (1.0 + m.length_scales()[0])));
  CHECK(std::abs(p.mean - m.mean_value()) < 1e-12);
  CHECK(std::abs(p.sd - std::sqrt(m.process_variance())) < 1e-12);
}

TEST_CASE("GEK is at least as accurate as Kriging on the sin benchmark") {
  auto plain = KrigingModel::fit(sin_samples(8, false), false);
  auto gek = KrigingModel::fit(sin_samples(8, true), true);
  double e_plain = 0.0, e_gek = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double x = 2.0 * M_PI * i / 99.0;
    e_plain += std::pow(plain.predict(v1(x)).mean - std::sin(x), 2);
    e_gek += std::pow(gek.predict(v1(x)).mean - std::sin(x), 2);
  }
  CHECK(std::sqrt(e_gek / 100) <= std::sqrt(e_plain / 100));
}

TEST_CASE("predictions do not depend on the sample order") {
  auto s = sin_samples(7, true);
  auto r = s;
  std::reverse(r.x.begin(), r.x.end());
  std::reverse(r.y.begin(), r.y.end());
  std::reverse(r.grad.begin(), r.grad.end());
  const Eigen::VectorXd len = Eigen::VectorXd::Constant(1, 1.3);
  auto a = KrigingModel::with_hyperparameters(s, true, len, 1e-10);
  auto b = KrigingModel::with_hyperparameters(r, true, len, 1e-10);
  for (double x : {0.3, 2.2, 5.9}) {
    CHECK(std::abs(a.predict(v1(x)).mean - b.predict(v1(x)).mean) < 1e-9);
    CHECK(std::abs(a.predict(v1(x)).sd - b.predict(v1(x)).sd) < 1e-7);
  }
}

TEST_CASE("expected improvement") {
  CHECK(expected_improvement(2.0, 0.0, 1.0) == 0.0);
  CHECK(expected_improvement(0.5, 0.0, 1.0) == 0.5);
  double prev = 0.0;
  for (double sd : {0.1, 0.2, 0.5, 1.0, 2.0}) {
    const double ei = expected_improvement(1.0, sd, 0.8);
    CHECK(ei >= prev);
    prev = ei;
  }
  prev = 1e300;
  for (double m : {-1.0, 0.0, 0.5, 1.0, 3.0}) {
    const double ei = expected_improvement(m, 0.4, 0.8);
    CHECK(ei <= prev);
    prev = ei;
  }
}

TEST_CASE("acquisition ranking") {
  auto s = sin_samples(6, false);
  auto m = KrigingModel::fit(s, false);
  // at the training points the prediction is exact: no improvement over the best
  const double best = *std::min_element(s.y.begin(), s.y.end());
  for (const auto& c : acquire(m, s.x, best)) {
    CHECK(c.prediction.sd <= 1e-4 * std::sqrt(m.process_variance()));
    CHECK(c.ei <= 0.4 * c.prediction.sd + 1e-12);
  }
  // equal means, larger uncertainty first
  auto ranked = acquire(m, {s.x[1], v1(50.0)}, m.mean_value() - 1.0);
  CHECK(ranked.front().index == 1);
  CHECK_THROWS_AS(acquire(m, s.x, INFINITY), InvalidArgument);
}

TEST_CASE("EI loop finds the Forrester minimum") {
  std::vector<Eigen::VectorXd> cand;
  double xmin = 0.0, fmin = 1e300;
  for (int i = 0; i <= 2000; ++i) {
    const double x = i / 2000.0;
    cand.push_back(v1(x));
    if (forrester(x) < fmin) {
      fmin = forrester(x);
      xmin = x;
    }
  }
  std::vector<Eigen::VectorXd> init{v1(0.0), v1(0.25), v1(0.5), v1(0.75), v1(1.0)};
  auto r = ei_loop([](const Eigen::VectorXd& x) { return forrester(x[0]); }, init, cand, 10);
  CHECK(r.data.size() == 15);
  CHECK(std::abs(r.data.x[r.best_index][0] - xmin) <= 1e-2);
}

TEST_CASE("model save and load round trip") {
  auto m = KrigingModel::fit(sin_samples(6, true), true);
  const std::string path = "test_surrogate_model.json";
  m.save(path);
  auto l = KrigingModel::load(path);
  for (double x : {0.1, 1.4, 4.4}) {
    CHECK(l.predict(v1(x)).mean == m.predict(v1(x)).mean);
    CHECK(l.predict(v1(x)).sd == m.predict(v1(x)).sd);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(KrigingModel::load("does_not_exist.json"), InvalidArgument);
}
