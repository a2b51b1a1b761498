#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "qdmd/time_series.hpp"

namespace qdmd::signal_lab {

using Eigen::VectorXd;

// f~(omega) = sum_n f_n exp(-2 pi i omega n / N), omega = 0..N-1.
// FFT-backed; dft_direct is the O(N^2) reference sum.
std::vector<cdouble> dft(const TimeSeries& series);
std::vector<cdouble> dft_direct(const std::vector<cdouble>& values);

// Per-bin spectral moduli and their difference normalized by the largest
// nonzero-frequency truth bin; omega = 0 is excluded (bins run 1..N-1).
struct SpectrumComparison {
  std::vector<int> omega_bins;
  VectorXd truth_abs;
  VectorXd prediction_abs;
  VectorXd relative_difference;

  double max_difference() const { return relative_difference.maxCoeff(); }
  double median_difference() const;
};

SpectrumComparison compare_spectra(const TimeSeries& truth,
                                   const TimeSeries& prediction);

struct Peak {
  int omega = 0;
  double intensity = 0.0;
};

// Strict local maxima over three consecutive bins in the half spectrum
// omega in [1, N/2] above threshold_fraction * max_{omega>0}|f~|; flat-top
// runs report their lowest omega. Sorted by intensity, descending.
std::vector<Peak> peak_table(const std::vector<cdouble>& spectrum,
                             double threshold_fraction);

struct NoiseSpec {
  enum class Kind { kAdditiveWhite, kRelativePowerLaw };
  Kind kind = Kind::kAdditiveWhite;
  double epsilon_noise = 0.0;
  double exponent = -1.5;  // the relative kind decays as t^exponent
  std::uint64_t seed = 0;
};

// Additive: sigma = eps * max|f| over the series. Relative power law:
// sigma(t) = eps * |f(0)| * t^exponent, with samples at t < dt assigned
// sigma(dt). Seeded and bitwise reproducible.
TimeSeries add_noise(const TimeSeries& series, const NoiseSpec& spec);

struct NoiseEstimate {
  double epsilon_hat = 0.0;
  bool plateau = false;
  double plateau_slope = 0.0;  // mean d(log sigma)/di over the middle third
};

// Reads the noise strength off the singular-value plateau of a Hankel X0:
// eps_hat = (sigma_{K/2}/sigma_0) / kappa(M, N). Throws NoPlateau when the
// middle third of the spectrum still decays (clean data).
NoiseEstimate estimate_noise_level(const VectorXd& singular_values, int m, int n);

// Monte-Carlo calibration of kappa on constant-signal corpora; the
// (M = 1000, N = 2M) value ships precalibrated.
double calibrate_kappa(int m, int n, int trials = 3, std::uint64_t seed = 0xC0FFEE);

struct EnvelopeFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  double curvature = 0.0;  // quadratic coefficient in log-log
  bool power_law = false;  // |curvature| below the diagnostic threshold
  int n_points = 0;
};

// Log-log least squares through the local maxima of |f(t) - asymptote|
// within [t_lo, t_hi]. Throws TooFewPeaks below 5 envelope points.
EnvelopeFit fit_envelope_exponent(const TimeSeries& series, double asymptote,
                                  double t_lo, double t_hi);

struct ErrorStats {
  VectorXd offsets;      // t - t_0 grid
  VectorXd systematic;   // mean over origins of (prediction - truth)
  VectorXd statistical;  // standard deviation of the same
  int n_samples = 0;
};

struct DmdConfig {
  int m = 0;
  int n = 0;
  double epsilon = 0.0;
  std::optional<int> rank_upper;
};

// truth_source(t0, count) must return `count` samples starting at t0 on the
// study's dt grid.
using TruthSource = std::function<TimeSeries(double, std::size_t)>;

// Shifted-origin error study: fit on [t0, t0 + N dt), forecast to
// t0 + horizon, accumulate prediction - truth per offset across origins.
// Origins run in parallel; per-origin RNG streams (when the generator uses
// any) derive from (seed, origin index) so scheduling cannot change results.
ErrorStats error_study(const TruthSource& truth, const DmdConfig& config,
                       const std::vector<double>& origins, double horizon);

// Post-processing helpers for error-stats reporting.
std::vector<double> moving_average(const std::vector<double>& values, int window);
std::vector<double> running_max(const std::vector<double>& values, int window);
std::vector<double> running_min(const std::vector<double>& values, int window);

}  // namespace qdmd::signal_lab
