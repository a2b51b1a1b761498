#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "qdmd/time_series.hpp"

namespace qdmd::dmd {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Pair of time-shifted snapshot matrices. X0[i][j] = f_{i+j},
// X1[i][j] = f_{i+j+1}; every anti-diagonal of X0 is constant.
struct HankelPair {
  MatrixXcd x0;  // M x (N-M)
  MatrixXcd x1;  // M x (N-M)
  int m = 0;     // snapshot length
  int n = 0;     // input length
};

HankelPair build_hankel(const TimeSeries& series, int m);

// Truncation diagnostics of an SVD: the full descending spectrum and the
// retained rank R = smallest index with sigma_R/sigma_0 < cutoff, clamped
// to min(M, N-M), to the number of strictly positive singular values, and
// to rank_upper_bound when set.
struct SvdTruncation {
  VectorXd singular_values;
  int rank = 0;
  double cutoff = 0.0;
  std::optional<int> rank_upper_bound;
};

struct SvdFactors {
  MatrixXcd u;      // M x R
  VectorXd sigma;   // R
  MatrixXcd v;      // (N-M) x R
  SvdTruncation truncation;
};

SvdFactors truncated_svd(const MatrixXcd& x0, double cutoff,
                         std::optional<int> rank_upper_bound = std::nullopt);

// Range-finder sketch with power iterations (Halko et al. style). Keeps the
// same contract as truncated_svd with accuracy limited by the sketch size;
// seeded and reproducible.
SvdFactors randomized_truncated_svd(const MatrixXcd& x0, int rank_upper_bound,
                                    int oversampling, std::uint64_t seed,
                                    double cutoff = 0.0, int power_iterations = 2);

enum class Readout {
  kRow0,     // scalar forecast taken from the first Hankel row (default)
  kAverage,  // average the M overlapping row predictions of each sample
};

enum class SvdBackend { kExact, kRandomized };

struct FitOptions {
  Readout readout = Readout::kRow0;
  SvdBackend svd = SvdBackend::kExact;
  int oversampling = 10;
  std::uint64_t seed = 0;
  // Eigenvector-matrix condition number above which the reduced operator is
  // reported as effectively non-diagonalizable.
  double defect_condition_limit = 1e12;
};

// Fitted forecaster: F_n ~ modes * Lambda^n * amplitudes.
struct DmdModel {
  VectorXcd eigenvalues;   // R
  MatrixXcd modes;         // M x R
  VectorXcd amplitudes;    // R
  double dt = 1.0;
  double t0 = 0.0;
  SvdTruncation truncation;
  int snapshot_length = 0;  // M
  int input_length = 0;     // N
  Readout readout = Readout::kRow0;
  // ||modes * amplitudes - F_0|| / ||F_0||, recorded at fit time.
  double reconstruction_residual = 0.0;

  int rank() const { return static_cast<int>(eigenvalues.size()); }
  double max_abs_eigenvalue() const;
  bool is_stable(double tol = 1e-9) const { return max_abs_eigenvalue() <= 1.0 + tol; }
};

DmdModel fit(const TimeSeries& series, int m, double epsilon,
             std::optional<int> rank_upper_bound = std::nullopt,
             const FitOptions& options = {});

// Precomputed Hankel factorization that can be re-truncated at several
// cutoffs without repeating the SVD (the dominant cost at production sizes).
class DmdSolver {
 public:
  DmdSolver(const TimeSeries& series, int m);

  DmdModel fit_with_cutoff(double epsilon,
                           std::optional<int> rank_upper_bound = std::nullopt,
                           const FitOptions& options = {}) const;

  const VectorXd& singular_values() const { return sigma_; }

 private:
  DmdModel assemble(int rank, const SvdTruncation& trunc, const FitOptions& options) const;

  double t0_ = 0.0;
  double dt_ = 1.0;
  int m_ = 0;
  int n_ = 0;
  bool real_path_ = false;
  // real-path factors (empty when the input is genuinely complex)
  Eigen::MatrixXd ru_, rv_, rx1_;
  // complex-path factors
  MatrixXcd cu_, cv_, cx1_;
  VectorXd sigma_;
  VectorXcd f0_;
};

enum class OutputMode { kComplex, kReal };

// Samples n in [n_from, n_to) of sum_k modes[row,k] lambda_k^n b_k, with
// eigenvalue powers formed in polar coordinates. A "divergence" entry is
// added to the output metadata when an unstable mode overflows within the
// requested horizon. kReal output asserts imaginary parts are negligible
// and drops them.
TimeSeries forecast(const DmdModel& model, long n_from, long n_to,
                    OutputMode mode = OutputMode::kComplex);

}  // namespace qdmd::dmd
