#include "qdmd/dmd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qdmd/errors.hpp"
#include "qdmd/linalg.hpp"
#include "qdmd/parallel.hpp"
#include "qdmd/rng.hpp"

namespace qdmd::dmd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

void check_window(int m, int n) {
  if (m <= 0 || m >= n)
    throw InvalidWindow("snapshot length M=" + std::to_string(m) +
                        " must satisfy 1 <= M < N=" + std::to_string(n));
}

template <typename Scalar>
void fill_hankel(const std::vector<cdouble>& f, int m, int n,
                 Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x0,
                 Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x1) {
  const int cols = n - m;
  x0.resize(m, cols);
  x1.resize(m, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < m; ++i) {
      if constexpr (std::is_same_v<Scalar, double>) {
        x0(i, j) = f[static_cast<std::size_t>(i + j)].real();
        x1(i, j) = f[static_cast<std::size_t>(i + j + 1)].real();
      } else {
        x0(i, j) = f[static_cast<std::size_t>(i + j)];
        x1(i, j) = f[static_cast<std::size_t>(i + j + 1)];
      }
    }
  }
}

int rank_from_spectrum(const VectorXd& sigma, double cutoff,
                       std::optional<int> rank_upper_bound) {
  if (sigma.size() == 0 || sigma[0] <= 0.0)
    throw ZeroMatrix("truncated_svd: all singular values vanish");
  if (cutoff < 0.0) throw Error("truncated_svd: negative cutoff");
  if (cutoff > 1.0)
    throw RankZero("truncated_svd: cutoff > 1 rejects even sigma_0");
  int r = static_cast<int>(sigma.size());
  for (int i = 0; i < sigma.size(); ++i) {
    if (sigma[i] / sigma[0] < cutoff) {
      r = i;
      break;
    }
  }
  // never divide by an exactly zero singular value downstream
  int positive = 0;
  while (positive < sigma.size() && sigma[positive] > 0.0) ++positive;
  r = std::min(r, positive);
  if (rank_upper_bound) r = std::min(r, std::max(1, *rank_upper_bound));
  if (r < 1) throw RankZero("truncated_svd: no singular value passes the cutoff");
  return r;
}

// Deterministic eigenpair order: modulus descending, then phase ascending.
void sort_eigenpairs(linalg::ComplexEig& e) {
  const Eigen::Index n = e.values.size();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(e.values[a]), mb = std::abs(e.values[b]);
    if (ma != mb) return ma > mb;
    return std::arg(e.values[a]) < std::arg(e.values[b]);
  });
  VectorXcd vals(n);
  MatrixXcd vecs(e.vectors.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    vals[k] = e.values[idx[static_cast<std::size_t>(k)]];
    vecs.col(k) = e.vectors.col(idx[static_cast<std::size_t>(k)]);
  }
  e.values = std::move(vals);
  e.vectors = std::move(vecs);
}

MatrixXcd real_times_complex(const MatrixXd& a, const MatrixXcd& b) {
  MatrixXcd out(a.rows(), b.cols());
  out.real() = a * b.real();
  out.imag() = a * b.imag();
  return out;
}

// Core of fit(): everything past the SVD of X0. `u`, `v` already truncated
// to rank R; x1 is the full shifted Hankel matrix.
template <typename Mat>
DmdModel assemble_from_factors(const Mat& u, const VectorXd& sigma_r, const Mat& v,
                               const Mat& x1, const VectorXcd& f0,
                               SvdTruncation trunc, double t0, double dt, int m,
                               int n, const FitOptions& options) {
  const int r = static_cast<int>(sigma_r.size());
  Mat t = x1 * (v * sigma_r.cwiseInverse().asDiagonal());  // M x R
  Mat a_tilde = u.adjoint() * t;                           // R x R
  linalg::ComplexEig e = linalg::eig(a_tilde);
  sort_eigenpairs(e);

  const double cond_w = linalg::cond_2norm(e.vectors);
  if (!(cond_w < options.defect_condition_limit))
    throw EigenFailure(
        "reduced operator is numerically non-diagonalizable: eigenvector "
        "condition number " +
        std::to_string(cond_w) + " exceeds " +
        std::to_string(options.defect_condition_limit));

  DmdModel model;
  model.eigenvalues = e.values;
  if constexpr (std::is_same_v<Mat, MatrixXd>)
    model.modes = real_times_complex(t, e.vectors);
  else
    model.modes = t * e.vectors;
  model.amplitudes = linalg::pinv_solve(model.modes, f0, 1e-12);
  model.dt = dt;
  model.t0 = t0;
  model.truncation = std::move(trunc);
  model.snapshot_length = m;
  model.input_length = n;
  model.readout = options.readout;
  const double f0_norm = f0.norm();
  model.reconstruction_residual =
      f0_norm > 0.0 ? (model.modes * model.amplitudes - f0).norm() / f0_norm : 0.0;
  (void)r;
  return model;
}

}  // namespace

HankelPair build_hankel(const TimeSeries& series, int m) {
  series.validate();
  const int n = static_cast<int>(series.size());
  check_window(m, n);
  HankelPair pair;
  pair.m = m;
  pair.n = n;
  fill_hankel<cdouble>(series.values, m, n, pair.x0, pair.x1);
  return pair;
}

SvdFactors truncated_svd(const MatrixXcd& x0, double cutoff,
                         std::optional<int> rank_upper_bound) {
  linalg::ComplexSvd f = linalg::svd_econ(x0);
  SvdTruncation trunc;
  trunc.singular_values = f.sigma;
  trunc.cutoff = cutoff;
  trunc.rank_upper_bound = rank_upper_bound;
  trunc.rank = rank_from_spectrum(f.sigma, cutoff, rank_upper_bound);
  SvdFactors out;
  out.u = f.u.leftCols(trunc.rank);
  out.sigma = f.sigma.head(trunc.rank);
  out.v = f.v.leftCols(trunc.rank);
  out.truncation = std::move(trunc);
  return out;
}

SvdFactors randomized_truncated_svd(const MatrixXcd& x0, int rank_upper_bound,
                                    int oversampling, std::uint64_t seed,
                                    double cutoff, int power_iterations) {
  if (rank_upper_bound < 1)
    throw Error("randomized_truncated_svd: rank_upper_bound must be >= 1");
  if (!(x0.cwiseAbs().maxCoeff() > 0.0))
    throw ZeroMatrix("randomized_truncated_svd: zero matrix");
  const Eigen::Index mrows = x0.rows(), ncols = x0.cols();
  const Eigen::Index sketch =
      std::min<Eigen::Index>(ncols, rank_upper_bound + std::max(0, oversampling));

  GaussianStream g(seed);
  MatrixXcd omega(ncols, sketch);
  for (Eigen::Index j = 0; j < sketch; ++j)
    for (Eigen::Index i = 0; i < ncols; ++i) omega(i, j) = cdouble(g.next(), g.next());

  MatrixXcd y = x0 * omega;
  auto orthonormalize = [](MatrixXcd& a) {
    Eigen::HouseholderQR<MatrixXcd> qr(a);
    a = qr.householderQ() * MatrixXcd::Identity(a.rows(), a.cols());
  };
  orthonormalize(y);
  for (int it = 0; it < power_iterations; ++it) {
    MatrixXcd z = x0.adjoint() * y;
    orthonormalize(z);
    y = x0 * z;
    orthonormalize(y);
  }

  MatrixXcd b = y.adjoint() * x0;  // sketch x ncols
  linalg::ComplexSvd small = linalg::svd_econ(std::move(b));

  SvdTruncation trunc;
  trunc.singular_values = small.sigma;
  trunc.cutoff = cutoff;
  trunc.rank_upper_bound = rank_upper_bound;
  trunc.rank = rank_from_spectrum(small.sigma, cutoff, rank_upper_bound);

  SvdFactors out;
  out.u = y * small.u.leftCols(trunc.rank);
  out.sigma = small.sigma.head(trunc.rank);
  out.v = small.v.leftCols(trunc.rank);
  out.truncation = std::move(trunc);
  (void)mrows;
  return out;
}

double DmdModel::max_abs_eigenvalue() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
    m = std::max(m, std::abs(eigenvalues[i]));
  return m;
}

DmdSolver::DmdSolver(const TimeSeries& series, int m) {
  series.validate();
  t0_ = series.t0;
  dt_ = series.dt;
  m_ = m;
  n_ = static_cast<int>(series.size());
  check_window(m, n_);
  real_path_ = series.is_real();

  f0_.resize(m);
  for (int i = 0; i < m; ++i) f0_[i] = series.values[static_cast<std::size_t>(i)];

  if (real_path_) {
    MatrixXd x0;
    fill_hankel<double>(series.values, m_, n_, x0, rx1_);
    linalg::RealSvd f = linalg::svd_econ(std::move(x0));
    ru_ = std::move(f.u);
    rv_ = std::move(f.v);
    sigma_ = std::move(f.sigma);
  } else {
    MatrixXcd x0;
    fill_hankel<cdouble>(series.values, m_, n_, x0, cx1_);
    linalg::ComplexSvd f = linalg::svd_econ(std::move(x0));
    cu_ = std::move(f.u);
    cv_ = std::move(f.v);
    sigma_ = std::move(f.sigma);
  }
}

DmdModel DmdSolver::fit_with_cutoff(double epsilon,
                                    std::optional<int> rank_upper_bound,
                                    const FitOptions& options) const {
  SvdTruncation trunc;
  trunc.singular_values = sigma_;
  trunc.cutoff = epsilon;
  trunc.rank_upper_bound = rank_upper_bound;
  trunc.rank = rank_from_spectrum(sigma_, epsilon, rank_upper_bound);
  return assemble(trunc.rank, trunc, options);
}

DmdModel DmdSolver::assemble(int rank, const SvdTruncation& trunc,
                             const FitOptions& options) const {
  const VectorXd sig = sigma_.head(rank);
  if (real_path_) {
    return assemble_from_factors<MatrixXd>(ru_.leftCols(rank), sig,
                                           rv_.leftCols(rank), rx1_, f0_, trunc,
                                           t0_, dt_, m_, n_, options);
  }
  return assemble_from_factors<MatrixXcd>(cu_.leftCols(rank), sig,
                                          cv_.leftCols(rank), cx1_, f0_, trunc,
                                          t0_, dt_, m_, n_, options);
}

DmdModel fit(const TimeSeries& series, int m, double epsilon,
             std::optional<int> rank_upper_bound, const FitOptions& options) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw Error("fit: cutoff epsilon must lie in [0, 1]");
  if (options.svd == SvdBackend::kRandomized) {
    if (!rank_upper_bound)
      throw Error("fit: randomized SVD backend requires a rank upper bound");
    HankelPair pair = build_hankel(series, m);
    SvdFactors f = randomized_truncated_svd(pair.x0, *rank_upper_bound,
                                            options.oversampling, options.seed,
                                            epsilon);
    VectorXcd f0 = pair.x0.col(0);
    return assemble_from_factors<MatrixXcd>(f.u, f.sigma, f.v, pair.x1, f0,
                                            f.truncation, series.t0, series.dt, m,
                                            static_cast<int>(series.size()), options);
  }
  DmdSolver solver(series, m);
  return solver.fit_with_cutoff(epsilon, rank_upper_bound, options);
}

TimeSeries forecast(const DmdModel& model, long n_from, long n_to, OutputMode mode) {
  if (n_from < 0 || n_from >= n_to)
    throw Error("forecast: need 0 <= n_from < n_to");
  const int r = model.rank();
  const std::size_t count = static_cast<std::size_t>(n_to - n_from);

  // per-mode scalar coefficient: row-0 readout or the row average folded
  // into the amplitude (phi[i][k] lambda^{-i} is formed through logs so the
  // |lambda|<1 intermediate cannot overflow)
  VectorXcd coeff(r);
  for (int k = 0; k < r; ++k) {
    const cdouble lam = model.eigenvalues[k];
    if (model.readout == Readout::kRow0 || std::abs(lam) == 0.0) {
      coeff[k] = model.modes(0, k) * model.amplitudes[k];
      continue;
    }
    const cdouble loglam = std::log(lam);
    cdouble acc = 0.0;
    for (int i = 0; i < model.snapshot_length; ++i) {
      const cdouble phi = model.modes(i, k);
      if (phi == cdouble(0.0, 0.0)) continue;
      acc += std::exp(std::log(phi) - static_cast<double>(i) * loglam);
    }
    coeff[k] = acc / static_cast<double>(model.snapshot_length) * model.amplitudes[k];
  }

  std::vector<double> logmod(static_cast<std::size_t>(r));
  std::vector<double> phase(static_cast<std::size_t>(r));
  std::vector<bool> zero(static_cast<std::size_t>(r));
  for (int k = 0; k < r; ++k) {
    const cdouble lam = model.eigenvalues[k];
    const double mod = std::abs(lam);
    zero[static_cast<std::size_t>(k)] = (mod == 0.0);
    logmod[static_cast<std::size_t>(k)] = mod > 0.0 ? std::log(mod) : 0.0;
    phase[static_cast<std::size_t>(k)] = std::arg(lam);
  }

  TimeSeries out;
  out.t0 = model.t0 + static_cast<double>(n_from) * model.dt;
  out.dt = model.dt;
  out.label = "dmd-forecast";
  out.values.resize(count);

  parallel_for(count, linalg::threads(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j) {
      const double n = static_cast<double>(n_from + static_cast<long>(j));
      cdouble acc = 0.0;
      for (int k = 0; k < r; ++k) {
        const std::size_t kk = static_cast<std::size_t>(k);
        if (zero[kk]) {
          if (n == 0.0) acc += coeff[k];
          continue;
        }
        acc += coeff[k] * std::exp(cdouble(n * logmod[kk], n * phase[kk]));
      }
      out.values[j] = acc;
    }
  });

  bool divergent = false;
  if (model.max_abs_eigenvalue() > 1.0 + 1e-9) {
    double max_logmod = 0.0;
    for (double lm : logmod) max_logmod = std::max(max_logmod, lm);
    if (max_logmod * static_cast<double>(n_to) > 700.0) divergent = true;
  }
  for (const auto& v : out.values)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) divergent = true;
  if (divergent)
    out.metadata["warning"] =
        "divergence: an eigenvalue outside the unit circle overflows within "
        "the requested horizon";

  if (mode == OutputMode::kReal) {
    std::vector<double> re = out.real_values(1e-8);
    for (std::size_t i = 0; i < re.size(); ++i) out.values[i] = cdouble(re[i], 0.0);
  }
  return out;
}

}  // namespace qdmd::dmd
