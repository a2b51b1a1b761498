#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <numbers>

#include "qdmd/dmd.hpp"
#include "qdmd/errors.hpp"
#include "qdmd/rng.hpp"

using namespace qdmd;
using namespace qdmd::dmd;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

namespace {

TimeSeries geometric_sum(const std::vector<cdouble>& coeffs,
                         const std::vector<cdouble>& ratios, std::size_t n,
                         double dt = 1.0, double t0 = 0.0) {
  TimeSeries ts;
  ts.t0 = t0;
  ts.dt = dt;
  ts.values.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    cdouble acc = 0.0;
    for (std::size_t k = 0; k < ratios.size(); ++k)
      acc += coeffs[k] * std::pow(ratios[k], static_cast<double>(j));
    ts.values[j] = acc;
  }
  return ts;
}

bool matches_some(const VectorXcd& lams, cdouble target, double tol) {
  for (Eigen::Index i = 0; i < lams.size(); ++i)
    if (std::abs(lams[i] - target) < tol) return true;
  return false;
}

}  // namespace

TEST_CASE("build_hankel lays out the shifted snapshot matrices") {
  TimeSeries ts = make_real_series(0.0, 1.0, {1, 2, 3, 4});
  HankelPair p = build_hankel(ts, 2);
  CHECK(p.x0.rows() == 2);
  CHECK(p.x0.cols() == 2);
  CHECK(p.x0(0, 0).real() == doctest::Approx(1));
  CHECK(p.x0(0, 1).real() == doctest::Approx(2));
  CHECK(p.x0(1, 0).real() == doctest::Approx(2));
  CHECK(p.x0(1, 1).real() == doctest::Approx(3));
  CHECK(p.x1(0, 0).real() == doctest::Approx(2));
  CHECK(p.x1(1, 1).real() == doctest::Approx(4));
}

TEST_CASE("hankel element indexing and anti-diagonal flattening") {
  GaussianStream g(11);
  TimeSeries ts;
  ts.dt = 0.5;
  for (int i = 0; i < 37; ++i) ts.values.emplace_back(g.next(), g.next());
  const int m = 13, n = 37;
  HankelPair p = build_hankel(ts, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n - m; ++j) {
      CHECK(p.x0(i, j) == ts.values[static_cast<std::size_t>(i + j)]);
      CHECK(p.x1(i, j) == ts.values[static_cast<std::size_t>(i + j + 1)]);
    }
  // anti-diagonal s = i + j of X0 reproduces f_0..f_{n-2}
  for (int s = 0; s <= (m - 1) + (n - m - 1); ++s) {
    for (int i = std::max(0, s - (n - m - 1)); i <= std::min(m - 1, s); ++i) {
      CHECK(p.x0(i, s - i) == ts.values[static_cast<std::size_t>(s)]);
    }
  }
}

TEST_CASE("build_hankel rejects invalid windows") {
  TimeSeries ts = make_real_series(0.0, 1.0, {1, 2, 3, 4});
  CHECK_THROWS_AS(build_hankel(ts, 0), InvalidWindow);
  CHECK_THROWS_AS(build_hankel(ts, 4), InvalidWindow);
  CHECK_THROWS_AS(build_hankel(ts, 7), InvalidWindow);
}

TEST_CASE("truncated_svd keeps a single mode of a rank-1 matrix") {
  Eigen::VectorXcd a(5), b(4);
  a << 1.0, cdouble(0, 2), -1.5, 0.25, cdouble(1, -1);
  b << 2.0, -1.0, cdouble(0.5, 0.5), 3.0;
  MatrixXcd x0 = a * b.transpose();
  SvdFactors f = truncated_svd(x0, 1e-12);
  CHECK(f.truncation.rank == 1);
  CHECK((x0 - f.u * f.sigma.asDiagonal() * f.v.adjoint()).norm() <=
        1e-10 * f.sigma[0]);
}

TEST_CASE("truncated_svd optimality residuals") {
  GaussianStream g(5);
  MatrixXcd x0(24, 18);
  for (int j = 0; j < 18; ++j)
    for (int i = 0; i < 24; ++i) x0(i, j) = cdouble(g.next(), g.next());
  SvdFactors f = truncated_svd(x0, 0.3);
  const int r = f.truncation.rank;
  REQUIRE(r < 18);
  const auto& s = f.truncation.singular_values;
  MatrixXcd resid = x0 - f.u * f.sigma.asDiagonal() * f.v.adjoint();
  double tail2 = 0.0;
  for (int i = r; i < s.size(); ++i) tail2 += s[i] * s[i];
  CHECK(resid.squaredNorm() == doctest::Approx(tail2).epsilon(1e-8));
  // spectral norm of the residual equals the first discarded singular value
  Eigen::JacobiSVD<MatrixXcd> js(resid);
  CHECK(js.singularValues()[0] <= s[r] * (1 + 1e-10));
}

TEST_CASE("truncated_svd error classes") {
  MatrixXcd z = MatrixXcd::Zero(4, 4);
  CHECK_THROWS_AS(truncated_svd(z, 0.1), ZeroMatrix);
  MatrixXcd x = MatrixXcd::Identity(4, 4);
  CHECK_THROWS_AS(truncated_svd(x, 1.5), RankZero);
}

TEST_CASE("fit recovers a single geometric mode") {
  TimeSeries ts = geometric_sum({1.0}, {0.9}, 30);
  DmdModel model = fit(ts, 5, 1e-8);
  REQUIRE(model.rank() == 1);
  CHECK(std::abs(model.eigenvalues[0] - cdouble(0.9)) < 1e-10);
  CHECK(model.reconstruction_residual < 1e-10);
}

TEST_CASE("forecast of 0.5^n at n=10") {
  TimeSeries ts = geometric_sum({1.0}, {0.5}, 24);
  DmdModel model = fit(ts, 6, 1e-10);
  TimeSeries fc = forecast(model, 10, 11);
  CHECK(std::abs(fc.values[0] - cdouble(9.765625e-4)) < 1e-12);
  CHECK(fc.t0 == doctest::Approx(10.0));
}

TEST_CASE("pure cosine gives the companion-system eigenvalues") {
  const double dt = 0.05, omega = 2.2;
  TimeSeries ts;
  ts.dt = dt;
  for (int n = 0; n < 200; ++n) ts.values.emplace_back(std::cos(omega * n * dt), 0.0);
  DmdModel model = fit(ts, 40, 1e-10);
  REQUIRE(model.rank() == 2);

  // independent oracle: the two-term recurrence f_{n+1} = 2cos(w dt) f_n - f_{n-1}
  // solves X1 = A X0 exactly; its companion matrix eigenvalues are the truth
  Eigen::Matrix2d companion;
  companion << 2.0 * std::cos(omega * dt), -1.0, 1.0, 0.0;
  Eigen::EigenSolver<Eigen::Matrix2d> es(companion);
  for (int k = 0; k < 2; ++k)
    CHECK(matches_some(model.eigenvalues, es.eigenvalues()[k], 1e-8));
  // and they sit on the unit circle at phase +- omega dt
  CHECK(matches_some(model.eigenvalues, std::polar(1.0, omega * dt), 1e-9));
  CHECK(matches_some(model.eigenvalues, std::polar(1.0, -omega * dt), 1e-9));
  CHECK(model.is_stable());
}

TEST_CASE("exact recovery of multi-mode geometric signals") {
  GaussianStream g(123);
  for (int trial = 0; trial < 12; ++trial) {
    const int k = 2 + static_cast<int>(g.uniform() * 5.0);
    std::vector<cdouble> mus, cs;
    while (static_cast<int>(mus.size()) < k) {
      const double rho = 0.4 + 0.6 * g.uniform();
      const double th = 2.0 * std::numbers::pi * g.uniform();
      cdouble mu = std::polar(rho, th);
      bool ok = true;
      for (auto& other : mus)
        if (std::abs(mu - other) < 0.15) ok = false;
      if (!ok) continue;
      mus.push_back(mu);
      cs.emplace_back(0.5 + g.uniform(), 0.5 * g.next());
    }
    TimeSeries ts = geometric_sum(cs, mus, 64);
    DmdModel model = fit(ts, 24, 0.0, k);
    REQUIRE(model.rank() == k);
    for (auto& mu : mus) CHECK(matches_some(model.eigenvalues, mu, 1e-8));

    TimeSeries fc = forecast(model, 0, 640);
    TimeSeries truth = geometric_sum(cs, mus, 640);
    double scale = truth.max_abs();
    double worst = 0.0;
    for (std::size_t j = 0; j < 640; ++j)
      worst = std::max(worst, std::abs(fc.values[j] - truth.values[j]));
    CHECK(worst <= 1e-6 * scale);
  }
}

TEST_CASE("conjugate closure for real input") {
  GaussianStream g(77);
  TimeSeries ts;
  ts.dt = 0.1;
  for (int n = 0; n < 120; ++n) {
    double v = std::cos(1.3 * n * 0.1) + 0.4 * std::sin(2.9 * n * 0.1) +
               0.02 * g.next();
    ts.values.emplace_back(v, 0.0);
  }
  DmdModel model = fit(ts, 30, 1e-3);
  for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i)
    CHECK(matches_some(model.eigenvalues, std::conj(model.eigenvalues[i]), 1e-8));
}

TEST_CASE("shift covariance: the model depends on window contents only") {
  std::vector<cdouble> cs = {cdouble(1.0, 0.0), cdouble(0.3, 0.1)};
  std::vector<cdouble> mus = {std::polar(1.0, 0.31), std::polar(0.97, 1.7)};
  TimeSeries full = geometric_sum(cs, mus, 300, 0.2);
  const std::size_t shift = 40, n = 100;

  TimeSeries window = full.slice(shift, n);  // t0 = 8.0, carries timestamps
  DmdModel shifted_model = fit(window, 30, 0.0, 2);

  TimeSeries rebased = window;
  rebased.t0 = 0.0;  // same contents, different clock
  DmdModel rebased_model = fit(rebased, 30, 0.0, 2);

  TimeSeries a = forecast(shifted_model, 0, 150);
  TimeSeries b = forecast(rebased_model, 0, 150);
  for (std::size_t j = 0; j < 150; ++j)
    CHECK(std::abs(a.values[j] - b.values[j]) < 1e-9);
  CHECK(a.t0 == doctest::Approx(full.time_at(shift)));
}

TEST_CASE("average readout agrees with row-0 on clean data") {
  TimeSeries ts;
  ts.dt = 0.05;
  for (int n = 0; n < 240; ++n)
    ts.values.emplace_back(std::cos(1.9 * n * 0.05) + 0.5 * std::cos(0.7 * n * 0.05), 0.0);
  FitOptions avg;
  avg.readout = Readout::kAverage;
  DmdModel m0 = fit(ts, 60, 1e-11);
  DmdModel ma = fit(ts, 60, 1e-11, std::nullopt, avg);
  TimeSeries f0 = forecast(m0, 200, 400);
  TimeSeries fa = forecast(ma, 200, 400);
  for (std::size_t j = 0; j < f0.values.size(); ++j)
    CHECK(std::abs(f0.values[j] - fa.values[j]) < 1e-6);
}

TEST_CASE("real output mode drops negligible imaginary parts") {
  TimeSeries ts;
  ts.dt = 0.1;
  for (int n = 0; n < 100; ++n) ts.values.emplace_back(std::cos(0.9 * n * 0.1), 0.0);
  DmdModel model = fit(ts, 25, 1e-10);
  TimeSeries fc = forecast(model, 0, 500, OutputMode::kReal);
  for (auto& v : fc.values) CHECK(v.imag() == 0.0);
  for (std::size_t j = 0; j < fc.values.size(); ++j)
    CHECK(fc.values[j].real() ==
          doctest::Approx(std::cos(0.9 * static_cast<double>(j) * 0.1)).epsilon(1e-6));
}

TEST_CASE("divergence warning on unstable modes") {
  TimeSeries ts = geometric_sum({1.0}, {1.1}, 40);
  DmdModel model = fit(ts, 10, 1e-10);
  CHECK(!model.is_stable());
  TimeSeries fc = forecast(model, 0, 9000);
  CHECK(fc.metadata.count("warning") == 1);
}

TEST_CASE("randomized svd tracks the exact factorization") {
  GaussianStream g(31);
  // rank-5 synthetic matrix
  MatrixXcd a(40, 5), b(5, 32);
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 40; ++i) a(i, j) = cdouble(g.next(), g.next());
    for (int i = 0; i < 32; ++i) b(j, i) = cdouble(g.next(), g.next());
  }
  MatrixXcd x0 = a * b;
  SvdFactors exact = truncated_svd(x0, 0.0);
  SvdFactors rnd = randomized_truncated_svd(x0, 10, 5, 42);
  for (int i = 0; i < 5; ++i)
    CHECK(std::abs(rnd.truncation.singular_values[i] -
                   exact.truncation.singular_values[i]) < 1e-8);
  for (int i = 5; i < rnd.truncation.singular_values.size(); ++i)
    CHECK(rnd.truncation.singular_values[i] < 1e-10);

  SvdFactors rnd2 = randomized_truncated_svd(x0, 10, 5, 42);
  CHECK((rnd.truncation.singular_values - rnd2.truncation.singular_values).norm() == 0.0);

  MatrixXcd z = MatrixXcd::Zero(4, 4);
  CHECK_THROWS_AS(randomized_truncated_svd(z, 2, 2, 1), ZeroMatrix);
}

TEST_CASE("reconstruction residual stays within the cutoff budget") {
  GaussianStream g(9);
  TimeSeries ts;
  ts.dt = 0.05;
  for (int n = 0; n < 400; ++n) {
    double v = std::cos(1.1 * n * 0.05) + 0.3 * std::cos(2.3 * n * 0.05) +
               0.01 * g.next();
    ts.values.emplace_back(v, 0.0);
  }
  const double eps = 1e-2;
  DmdModel model = fit(ts, 100, eps);
  CHECK(model.reconstruction_residual <= 10.0 * eps);
}

TEST_CASE("fit validates the cutoff range") {
  TimeSeries ts = geometric_sum({1.0}, {0.5}, 16);
  CHECK_THROWS_AS(fit(ts, 4, -0.1), Error);
  CHECK_THROWS_AS(fit(ts, 4, 1.5), Error);
}
