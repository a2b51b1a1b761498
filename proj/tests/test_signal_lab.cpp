#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qdmd/dmd.hpp"
#include "qdmd/errors.hpp"
#include "qdmd/rng.hpp"
#include "qdmd/signal_lab.hpp"

using namespace qdmd;
using namespace qdmd::signal_lab;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("dft of a constant concentrates at omega = 0") {
  TimeSeries ts = make_real_series(0, 1, std::vector<double>(64, 3.5));
  auto f = dft(ts);
  CHECK(std::abs(f[0]) == doctest::Approx(64 * 3.5));
  for (std::size_t w = 1; w < 64; ++w) CHECK(std::abs(f[w]) < 1e-10);
}

TEST_CASE("dft of a pure cosine peaks at k and N - k") {
  const std::size_t n = 128, k = 9;
  TimeSeries ts;
  ts.dt = 1.0;
  for (std::size_t j = 0; j < n; ++j)
    ts.values.emplace_back(std::cos(2.0 * kPi * k * j / n), 0.0);
  auto f = dft(ts);
  CHECK(std::abs(f[k]) == doctest::Approx(n / 2.0).epsilon(1e-9));
  CHECK(std::abs(f[n - k]) == doctest::Approx(n / 2.0).epsilon(1e-9));
  for (std::size_t w = 1; w < n; ++w)
    if (w != k && w != n - k) CHECK(std::abs(f[w]) < 1e-9 * n);
}

TEST_CASE("fft agrees with the direct sum and satisfies parseval") {
  GaussianStream g(2024);
  TimeSeries ts;
  ts.dt = 0.3;
  for (int i = 0; i < 300; ++i) ts.values.emplace_back(g.next(), g.next());
  auto fast = dft(ts);
  auto slow = dft_direct(ts.values);
  double scale = 0.0, err = 0.0, pt = 0.0, pf = 0.0;
  for (std::size_t w = 0; w < fast.size(); ++w) {
    err = std::max(err, std::abs(fast[w] - slow[w]));
    scale = std::max(scale, std::abs(slow[w]));
    pf += std::norm(fast[w]);
  }
  for (const auto& v : ts.values) pt += std::norm(v);
  CHECK(err < 1e-9 * scale);
  CHECK(pf / ts.size() == doctest::Approx(pt).epsilon(1e-9));
}

TEST_CASE("dft is linear") {
  GaussianStream g(5);
  TimeSeries a, b, sum;
  a.dt = b.dt = sum.dt = 1.0;
  for (int i = 0; i < 50; ++i) {
    a.values.emplace_back(g.next(), g.next());
    b.values.emplace_back(g.next(), g.next());
    sum.values.push_back(a.values.back() + 2.0 * b.values.back());
  }
  auto fa = dft(a), fb = dft(b), fs = dft(sum);
  for (std::size_t w = 0; w < fs.size(); ++w)
    CHECK(std::abs(fs[w] - fa[w] - 2.0 * fb[w]) < 1e-9 * (1.0 + std::abs(fs[w])));
}

TEST_CASE("identical spectra compare to zero difference") {
  TimeSeries ts;
  ts.dt = 0.1;
  for (int i = 0; i < 200; ++i)
    ts.values.emplace_back(std::sin(0.4 * i) + 0.2 * std::sin(1.3 * i), 0.0);
  SpectrumComparison cmp = compare_spectra(ts, ts);
  CHECK(cmp.max_difference() == doctest::Approx(0.0));
  CHECK(cmp.omega_bins.front() == 1);  // omega = 0 removed

  TimeSeries shorter = ts.slice(0, 100);
  CHECK_THROWS_AS(compare_spectra(ts, shorter), LengthMismatch);
}

TEST_CASE("peak table finds sinusoid peaks and applies the threshold") {
  const std::size_t n = 256;
  TimeSeries ts;
  ts.dt = 1.0;
  for (std::size_t j = 0; j < n; ++j)
    ts.values.emplace_back(std::cos(2.0 * kPi * 17.0 * j / n) +
                               0.05 * std::cos(2.0 * kPi * 40.0 * j / n),
                           0.0);
  auto spectrum = dft(ts);
  auto strong = peak_table(spectrum, 0.10);
  REQUIRE(strong.size() == 1);  // the 5% peak is below threshold
  CHECK(strong[0].omega == 17);
  auto all = peak_table(spectrum, 0.01);
  REQUIRE(all.size() == 2);
  CHECK(all[0].omega == 17);
  CHECK(all[1].omega == 40);
  CHECK(all[0].intensity > all[1].intensity);
}

TEST_CASE("flat-topped peaks report their lowest bin") {
  std::vector<cdouble> spectrum = {10.0, 1.0, 5.0, 5.0, 5.0, 1.0, 0.5, 0.2, 0.1, 0.1};
  auto peaks = peak_table(spectrum, 0.5);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0].omega == 2);
}

TEST_CASE("zero-strength noise is the identity") {
  TimeSeries ts = make_real_series(0, 0.5, {1, 2, 3, 4, 5});
  NoiseSpec spec;
  spec.epsilon_noise = 0.0;
  TimeSeries noisy = add_noise(ts, spec);
  for (std::size_t i = 0; i < ts.size(); ++i) CHECK(noisy.values[i] == ts.values[i]);
}

TEST_CASE("noise is reproducible bitwise and unbiased") {
  TimeSeries ts = make_real_series(0, 1, std::vector<double>(100000, 2.0));
  NoiseSpec spec;
  spec.epsilon_noise = 0.03;
  spec.seed = 99;
  TimeSeries a = add_noise(ts, spec);
  TimeSeries b = add_noise(ts, spec);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.values[i] == b.values[i]);

  const double sigma = 0.03 * 2.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a.values[i].real() - 2.0;
  mean /= static_cast<double>(a.size());
  CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(static_cast<double>(a.size())));

  spec.seed = 100;
  TimeSeries c = add_noise(ts, spec);
  CHECK(c.values[0] != a.values[0]);
}

TEST_CASE("relative power-law noise decays with time") {
  TimeSeries ts = make_real_series(0, 1, std::vector<double>(4000, 1.0));
  NoiseSpec spec;
  spec.kind = NoiseSpec::Kind::kRelativePowerLaw;
  spec.epsilon_noise = 0.5;
  spec.seed = 7;
  TimeSeries noisy = add_noise(ts, spec);
  auto rms = [&](std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += std::norm(noisy.values[i] - ts.values[i]);
    return std::sqrt(acc / static_cast<double>(hi - lo));
  };
  const double early = rms(10, 40);        // t ~ 20
  const double late = rms(1000, 4000);     // t ~ 2000
  const double expected_ratio = std::pow(20.0 / 2000.0, -1.5);
  CHECK(early / late > 0.3 * expected_ratio);
  CHECK(early / late < 3.0 * expected_ratio);
  // t = 0 is assigned sigma(dt), stays finite
  CHECK(std::isfinite(noisy.values[0].real()));
  CHECK(noisy.values[0] != ts.values[0]);
}

TEST_CASE("noise-level estimate reads the plateau, clean data throws") {
  TimeSeries base = make_real_series(0, 1, std::vector<double>(2000, 1.0));
  std::vector<double> eps_list = {0.01, 0.02, 0.03};
  std::vector<double> estimates;
  for (double eps : eps_list) {
    NoiseSpec spec;
    spec.epsilon_noise = eps;
    spec.seed = 1234;
    TimeSeries noisy = add_noise(base, spec);
    dmd::DmdSolver solver(noisy, 1000);
    NoiseEstimate est = estimate_noise_level(solver.singular_values(), 1000, 2000);
    CHECK(est.plateau);
    estimates.push_back(est.epsilon_hat);
  }
  CHECK(estimates[1] > estimates[0]);
  CHECK(estimates[2] > estimates[1]);
  CHECK(estimates[2] > 0.02);
  CHECK(estimates[2] < 0.04);

  Eigen::VectorXd clean(900);
  for (int i = 0; i < 900; ++i) clean[i] = std::exp(-0.05 * i);
  CHECK_THROWS_AS(estimate_noise_level(clean, 1000, 2000), NoPlateau);
}

TEST_CASE("envelope exponent of a constructed power-law decay") {
  TimeSeries ts;
  ts.dt = 0.05;
  for (int i = 0; i < 20000; ++i) {
    const double t = 0.05 * i;
    const double v = t > 0 ? 1.7 * std::pow(t, -1.5) * std::cos(3.0 * t) + 0.1 : 1.8;
    ts.values.emplace_back(v, 0.0);
  }
  EnvelopeFit fit = fit_envelope_exponent(ts, 0.1, 20.0, 900.0);
  CHECK(fit.slope == doctest::Approx(-1.5).epsilon(0.034));
  CHECK(fit.power_law);

  // exponential decay is flagged as non-power-law by the curvature probe
  TimeSeries exp_ts;
  exp_ts.dt = 0.05;
  for (int i = 0; i < 20000; ++i) {
    const double t = 0.05 * i;
    exp_ts.values.emplace_back(std::exp(-0.01 * t) * std::cos(3.0 * t), 0.0);
  }
  EnvelopeFit bad = fit_envelope_exponent(exp_ts, 0.0, 20.0, 900.0);
  CHECK(!bad.power_law);

  CHECK_THROWS_AS(fit_envelope_exponent(ts, 0.1, 20.0, 21.0), TooFewPeaks);
}

TEST_CASE("error study on an exactly representable signal") {
  auto truth = [](double t0, std::size_t count) {
    TimeSeries ts;
    ts.t0 = t0;
    ts.dt = 0.1;
    for (std::size_t i = 0; i < count; ++i) {
      const double t = t0 + 0.1 * static_cast<double>(i);
      ts.values.emplace_back(std::cos(1.7 * t) + 0.5 * std::cos(0.4 * t), 0.0);
    }
    return ts;
  };
  DmdConfig config;
  config.m = 20;
  config.n = 100;
  config.epsilon = 0.0;
  config.rank_upper = 4;
  ErrorStats stats = error_study(truth, config, {0.0, 100.0, 250.0}, 50.0);
  CHECK(stats.n_samples == 3);
  CHECK(stats.systematic.cwiseAbs().maxCoeff() < 1e-7);
  CHECK(stats.statistical.maxCoeff() < 1e-7);

  // single origin: systematic equals the raw difference, statistical is 0
  ErrorStats single = error_study(truth, config, {40.0}, 50.0);
  CHECK(single.statistical.maxCoeff() == 0.0);
}

TEST_CASE("windowed smoothing helpers") {
  std::vector<double> v = {1, 2, 3, 4, 5};
  auto avg = moving_average(v, 3);
  CHECK(avg[2] == doctest::Approx(3.0));
  CHECK(avg[0] == doctest::Approx(1.5));
  auto mx = running_max(v, 3);
  CHECK(mx[3] == doctest::Approx(5.0));
  auto mn = running_min(v, 3);
  CHECK(mn[1] == doctest::Approx(1.0));
}
