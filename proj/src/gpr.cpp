#include "qdmd/gpr.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "qdmd/errors.hpp"
#include "qdmd/signal_lab.hpp"
#include "qdmd/rng.hpp"

namespace qdmd::gpr {

using Eigen::MatrixXd;

namespace {

constexpr double kPi = std::numbers::pi;

void check_positive(double v, const char* what) {
  if (!(v > 0.0)) throw Error(std::string("PeriodicKernelSum: ") + what +
                              " must be strictly positive");
}

MatrixXd component_gram(const MatrixXd& delta, const PeriodicKernel& k) {
  return (k.variance *
          (-2.0 / (k.length_scale * k.length_scale) *
           (kPi / k.period * delta.array()).sin().square())
              .exp())
      .matrix();
}

MatrixXd abs_delta_matrix(const std::vector<double>& a, const std::vector<double>& b) {
  MatrixXd d(a.size(), b.size());
  for (std::size_t j = 0; j < b.size(); ++j)
    for (std::size_t i = 0; i < a.size(); ++i)
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::abs(a[i] - b[j]);
  return d;
}

MatrixXd gram(const MatrixXd& delta, const PeriodicKernelSum& kernel) {
  MatrixXd k = MatrixXd::Zero(delta.rows(), delta.cols());
  for (const auto& comp : kernel.components) k += component_gram(delta, comp);
  return k;
}

// Cholesky with escalating jitter. Returns the factorization and the jitter
// that made it succeed.
Eigen::LLT<MatrixXd> robust_llt(const MatrixXd& k, double observation_noise,
                                double* jitter_used = nullptr) {
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    MatrixXd ka = k;
    ka.diagonal().array() += observation_noise + jitter;
    Eigen::LLT<MatrixXd> llt(ka);
    if (llt.info() == Eigen::Success) {
      if (jitter_used) *jitter_used = jitter;
      return llt;
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > 1e-6) break;
  }
  throw NotPositiveDefinite(
      "gram matrix is not positive definite even with 1e-6 jitter");
}

std::vector<double> train_times(const TimeSeries& train) {
  std::vector<double> t(train.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = train.time_at(i);
  return t;
}

// ---- bounded log-space parametrization for the optimizer ----------------

struct ParamMap {
  SearchBounds bounds;
  int n_ker = 1;

  int dim() const { return 3 * n_ker; }

  PeriodicKernelSum to_kernel(const VectorXd& theta, double obs_noise) const {
    PeriodicKernelSum k;
    k.observation_noise = obs_noise;
    for (int i = 0; i < n_ker; ++i) {
      PeriodicKernel c;
      c.variance = std::exp(theta[3 * i + 0]);
      c.period = std::exp(theta[3 * i + 1]);
      c.length_scale = std::exp(theta[3 * i + 2]);
      k.components.push_back(c);
    }
    return k;
  }

  VectorXd to_theta(const PeriodicKernelSum& k) const {
    VectorXd theta(dim());
    for (int i = 0; i < n_ker; ++i) {
      theta[3 * i + 0] = std::log(k.components[static_cast<std::size_t>(i)].variance);
      theta[3 * i + 1] = std::log(k.components[static_cast<std::size_t>(i)].period);
      theta[3 * i + 2] = std::log(k.components[static_cast<std::size_t>(i)].length_scale);
    }
    return theta;
  }

  void clamp(VectorXd& theta) const {
    for (int i = 0; i < n_ker; ++i) {
      theta[3 * i + 0] = std::clamp(theta[3 * i + 0], std::log(bounds.variance_lo),
                                    std::log(bounds.variance_hi));
      theta[3 * i + 1] = std::clamp(theta[3 * i + 1], std::log(bounds.period_lo),
                                    std::log(bounds.period_hi));
      theta[3 * i + 2] = std::clamp(theta[3 * i + 2], std::log(bounds.length_lo),
                                    std::log(bounds.length_hi));
    }
  }

  // unit-box coordinates, log-uniform inside the bounds
  PeriodicKernelSum from_unit(const VectorXd& u, double obs_noise) const {
    VectorXd theta(dim());
    for (int i = 0; i < n_ker; ++i) {
      theta[3 * i + 0] = std::log(bounds.variance_lo) +
                         u[3 * i + 0] * std::log(bounds.variance_hi / bounds.variance_lo);
      theta[3 * i + 1] = std::log(bounds.period_lo) +
                         u[3 * i + 1] * std::log(bounds.period_hi / bounds.period_lo);
      theta[3 * i + 2] = std::log(bounds.length_lo) +
                         u[3 * i + 2] * std::log(bounds.length_hi / bounds.length_lo);
    }
    return to_kernel(theta, obs_noise);
  }
};

struct LmlValueGrad {
  double value = 0.0;
  VectorXd grad;
};

LmlValueGrad lml_with_gradient(const MatrixXd& delta, const VectorXd& y,
                               const PeriodicKernelSum& kernel, const ParamMap& map) {
  const Eigen::Index n = y.size();
  std::vector<MatrixXd> comps;
  comps.reserve(kernel.components.size());
  MatrixXd k = MatrixXd::Zero(n, n);
  for (const auto& c : kernel.components) {
    comps.push_back(component_gram(delta, c));
    k += comps.back();
  }
  Eigen::LLT<MatrixXd> llt = robust_llt(k, kernel.observation_noise);
  VectorXd alpha = llt.solve(y);
  MatrixXd kinv = llt.solve(MatrixXd::Identity(n, n));

  LmlValueGrad out;
  out.value = -0.5 * y.dot(alpha) -
              MatrixXd(llt.matrixL()).diagonal().array().log().sum() -
              0.5 * n * std::log(2.0 * kPi);
  out.grad.resize(map.dim());
  // tr[(alpha alpha^T - K^-1) dK] as elementwise sums; dK is symmetric
  const MatrixXd outer = alpha * alpha.transpose();
  for (int i = 0; i < map.n_ker; ++i) {
    const auto& c = kernel.components[static_cast<std::size_t>(i)];
    const MatrixXd& kc = comps[static_cast<std::size_t>(i)];
    // d/d log(variance): the component itself
    // d/d log(length): kc * 4 sin^2(pi d / T) / l^2
    // d/d log(period): kc * (2 pi d / (T l^2)) sin(2 pi d / T)
    const double inv_l2 = 1.0 / (c.length_scale * c.length_scale);
    Eigen::ArrayXXd s = (kPi / c.period * delta.array()).sin();
    Eigen::ArrayXXd dlen = kc.array() * (4.0 * inv_l2 * s.square());
    Eigen::ArrayXXd dper = kc.array() *
                           (2.0 * kPi * inv_l2 / c.period * delta.array()) *
                           (2.0 * kPi / c.period * delta.array()).sin();
    auto half_trace = [&](const Eigen::ArrayXXd& dk) {
      return 0.5 * ((outer.array() * dk).sum() - (kinv.array() * dk).sum());
    };
    out.grad[3 * i + 0] = half_trace(kc.array());
    out.grad[3 * i + 1] = half_trace(dper);
    out.grad[3 * i + 2] = half_trace(dlen);
  }
  return out;
}

}  // namespace

void PeriodicKernelSum::validate() const {
  if (components.empty()) throw Error("PeriodicKernelSum: need at least one kernel");
  for (const auto& c : components) {
    check_positive(c.variance, "variance");
    check_positive(c.period, "period");
    check_positive(c.length_scale, "length_scale");
  }
  if (observation_noise < 0.0)
    throw Error("PeriodicKernelSum: negative observation noise");
}

double kernel_value(const PeriodicKernelSum& kernel, double t, double tp) {
  double acc = 0.0;
  for (const auto& c : kernel.components) {
    const double s = std::sin(kPi * std::abs(t - tp) / c.period);
    acc += c.variance * std::exp(-2.0 * s * s / (c.length_scale * c.length_scale));
  }
  return acc;
}

GprPrediction gpr_fit_predict(const TimeSeries& train, const PeriodicKernelSum& kernel,
                              const std::vector<double>& query_times) {
  kernel.validate();
  train.validate();
  const std::vector<double> tt = train_times(train);
  const std::vector<double> y_raw = train.real_values();
  Eigen::Map<const VectorXd> y(y_raw.data(), static_cast<Eigen::Index>(y_raw.size()));

  const MatrixXd delta = abs_delta_matrix(tt, tt);
  double jitter = 0.0;
  Eigen::LLT<MatrixXd> llt = robust_llt(gram(delta, kernel), kernel.observation_noise,
                                        &jitter);
  VectorXd alpha = llt.solve(y);

  const MatrixXd cross = gram(abs_delta_matrix(tt, query_times), kernel);
  GprPrediction pred;
  pred.mean = cross.transpose() * alpha;
  const MatrixXd v = llt.matrixL().solve(cross);
  pred.variance.resize(static_cast<Eigen::Index>(query_times.size()));
  double prior = 0.0;
  for (const auto& c : kernel.components) prior += c.variance;
  for (Eigen::Index j = 0; j < pred.variance.size(); ++j)
    pred.variance[j] = std::max(
        0.0, prior + kernel.observation_noise + jitter - v.col(j).squaredNorm());
  return pred;
}

double log_marginal_likelihood(const TimeSeries& train, const PeriodicKernelSum& kernel) {
  kernel.validate();
  const std::vector<double> tt = train_times(train);
  const std::vector<double> y_raw = train.real_values();
  Eigen::Map<const VectorXd> y(y_raw.data(), static_cast<Eigen::Index>(y_raw.size()));
  const MatrixXd delta = abs_delta_matrix(tt, tt);
  Eigen::LLT<MatrixXd> llt = robust_llt(gram(delta, kernel), kernel.observation_noise);
  VectorXd alpha = llt.solve(y);
  return -0.5 * y.dot(alpha) -
         MatrixXd(llt.matrixL()).diagonal().array().log().sum() -
         0.5 * static_cast<double>(y.size()) * std::log(2.0 * kPi);
}

PeriodicKernelSum maximize_lml(const TimeSeries& train, PeriodicKernelSum init,
                               const SearchBounds& bounds, int max_iters) {
  init.validate();
  const std::vector<double> tt = train_times(train);
  const std::vector<double> y_raw = train.real_values();
  Eigen::Map<const VectorXd> y(y_raw.data(), static_cast<Eigen::Index>(y_raw.size()));
  const MatrixXd delta = abs_delta_matrix(tt, tt);

  ParamMap map{bounds, static_cast<int>(init.components.size())};
  VectorXd theta = map.to_theta(init);
  map.clamp(theta);

  // iRprop-: per-coordinate sign-adaptive steps. The LML surface is a sharp
  // ridge along the period axis, which defeats a single shared step size.
  VectorXd steps = VectorXd::Constant(map.dim(), 0.05);
  VectorXd prev_grad = VectorXd::Zero(map.dim());
  VectorXd best_theta = theta;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    LmlValueGrad cur;
    try {
      cur = lml_with_gradient(delta, y, map.to_kernel(theta, init.observation_noise), map);
    } catch (const NotPositiveDefinite&) {
      break;
    }
    if (cur.value > best_value) {
      best_value = cur.value;
      best_theta = theta;
    }
    if (cur.grad.cwiseAbs().maxCoeff() < 1e-5) break;
    for (int j = 0; j < map.dim(); ++j) {
      const double agreement = cur.grad[j] * prev_grad[j];
      if (agreement > 0.0)
        steps[j] = std::min(steps[j] * 1.2, 0.5);
      else if (agreement < 0.0) {
        steps[j] = std::max(steps[j] * 0.5, 1e-8);
        cur.grad[j] = 0.0;
      }
      if (cur.grad[j] > 0.0)
        theta[j] += steps[j];
      else if (cur.grad[j] < 0.0)
        theta[j] -= steps[j];
    }
    map.clamp(theta);
    prev_grad = cur.grad;
    if (steps.maxCoeff() < 1e-8) break;
  }
  return map.to_kernel(best_theta, init.observation_noise);
}

GprFitReport optimize_hyperparameters(const TimeSeries& input, int n_ker,
                                      int n_initial, int n_iterations,
                                      std::uint64_t seed, const SearchBounds& bounds,
                                      double train_fraction) {
  input.validate();
  if (n_ker < 1) throw Error("optimize_hyperparameters: need n_ker >= 1");
  if (n_initial < 1) throw Error("optimize_hyperparameters: budget needs initial points");
  const std::size_t n_train =
      std::max<std::size_t>(8, static_cast<std::size_t>(
                                   static_cast<double>(input.size()) * train_fraction));
  TimeSeries train = input.slice(0, std::min(n_train, input.size()));
  const std::vector<double> truth = input.real_values();
  std::vector<double> all_times(input.size());
  for (std::size_t i = 0; i < all_times.size(); ++i) all_times[i] = input.time_at(i);

  ParamMap map{bounds, n_ker};
  const int d = map.dim();
  GaussianStream rng(seed);

  struct Eval {
    VectorXd u;
    double cost = 0.0;
    double lml = -std::numeric_limits<double>::infinity();
    PeriodicKernelSum kernel;
  };
  std::vector<Eval> evals;
  GprFitReport report;
  report.seed = seed;

  auto evaluate = [&](const VectorXd& u) {
    Eval e;
    e.u = u;
    try {
      PeriodicKernelSum init = map.from_unit(u, 1e-8);
      e.kernel = maximize_lml(train, init, bounds);
      GprPrediction pred = gpr_fit_predict(train, e.kernel, all_times);
      double ss = 0.0;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        const double r = pred.mean[static_cast<Eigen::Index>(i)] - truth[i];
        ss += r * r;
      }
      e.cost = std::sqrt(ss) / static_cast<double>(truth.size());
      e.lml = log_marginal_likelihood(train, e.kernel);
    } catch (const NotPositiveDefinite&) {
      e.cost = 1e6;
      e.kernel = map.from_unit(u, 1e-8);
    }
    evals.push_back(e);
    BoTracePoint pt;
    pt.iteration = static_cast<int>(evals.size()) - 1;
    pt.cost = e.cost;
    pt.best = pt.iteration == 0 ? e.cost : std::min(e.cost, report.bo_trace.back().best);
    report.bo_trace.push_back(pt);
  };

  // Latin-hypercube initial design: every coordinate axis is stratified at
  // resolution 1/n_initial, so the narrow period basins cannot be missed by
  // an unlucky uniform draw.
  {
    std::vector<std::vector<int>> strata(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      auto& s = strata[static_cast<std::size_t>(j)];
      s.resize(static_cast<std::size_t>(n_initial));
      for (int i = 0; i < n_initial; ++i) s[static_cast<std::size_t>(i)] = i;
      for (int i = n_initial - 1; i > 0; --i) {
        const int k = static_cast<int>(rng.uniform() * (i + 1));
        std::swap(s[static_cast<std::size_t>(i)], s[static_cast<std::size_t>(std::min(k, i))]);
      }
    }
    for (int i = 0; i < n_initial; ++i) {
      VectorXd u(d);
      for (int j = 0; j < d; ++j)
        u[j] = (strata[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] +
                rng.uniform()) /
               n_initial;
      evaluate(u);
    }
  }

  // expected-improvement loop over a GP surrogate of the validation cost
  const double surrogate_ls = 0.25;
  for (int it = 0; it < n_iterations; ++it) {
    const Eigen::Index m = static_cast<Eigen::Index>(evals.size());
    VectorXd costs(m);
    for (Eigen::Index i = 0; i < m; ++i) costs[i] = evals[static_cast<std::size_t>(i)].cost;
    const double mean = costs.mean();
    double sd = std::sqrt((costs.array() - mean).square().sum() /
                          std::max<Eigen::Index>(1, m - 1));
    if (!(sd > 1e-12)) sd = 1.0;
    VectorXd z = (costs.array() - mean) / sd;

    MatrixXd kg(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b)
        kg(a, b) = std::exp(-(evals[static_cast<std::size_t>(a)].u -
                              evals[static_cast<std::size_t>(b)].u)
                                 .squaredNorm() /
                            (2.0 * surrogate_ls * surrogate_ls));
    kg.diagonal().array() += 1e-6;
    Eigen::LLT<MatrixXd> llt(kg);
    VectorXd alpha = llt.solve(z);
    const double best_z = z.minCoeff();

    VectorXd best_u;
    double best_ei = -1.0;
    const int n_candidates = 2048;
    for (int c = 0; c < n_candidates; ++c) {
      VectorXd u(d);
      if (c < 1536) {
        for (int j = 0; j < d; ++j) u[j] = rng.uniform();
      } else {
        // local perturbations of the incumbent
        std::size_t inc = 0;
        for (std::size_t i = 1; i < evals.size(); ++i)
          if (evals[i].cost < evals[inc].cost) inc = i;
        u = evals[inc].u;
        for (int j = 0; j < d; ++j)
          u[j] = std::clamp(u[j] + 0.05 * rng.next(), 0.0, 1.0);
      }
      VectorXd ks(m);
      for (Eigen::Index a = 0; a < m; ++a)
        ks[a] = std::exp(-(evals[static_cast<std::size_t>(a)].u - u).squaredNorm() /
                         (2.0 * surrogate_ls * surrogate_ls));
      const double mu = ks.dot(alpha);
      const VectorXd v = llt.matrixL().solve(ks);
      const double var = std::max(1e-12, 1.0 + 1e-6 - v.squaredNorm());
      const double sigma = std::sqrt(var);
      const double imp = best_z - mu;
      const double zz = imp / sigma;
      const double phi = std::exp(-0.5 * zz * zz) / std::sqrt(2.0 * kPi);
      const double cdf = 0.5 * std::erfc(-zz / std::sqrt(2.0));
      const double ei = imp * cdf + sigma * phi;
      if (ei > best_ei) {
        best_ei = ei;
        best_u = u;
      }
    }
    evaluate(best_u);
  }

  // periodic kernels at integer multiples of the fundamental predict equally
  // well; among near-tied validation costs the marginal likelihood picks the
  // parsimonious (fundamental) representative
  std::size_t winner = 0;
  for (std::size_t i = 1; i < evals.size(); ++i)
    if (evals[i].cost < evals[winner].cost) winner = i;
  const double cost_cap = 2.0 * evals[winner].cost + 1e-300;
  for (std::size_t i = 0; i < evals.size(); ++i)
    if (evals[i].cost <= cost_cap && evals[i].lml > evals[winner].lml) winner = i;
  report.kernel = evals[winner].kernel;
  report.validation_error = evals[winner].cost;
  report.log_marginal_likelihood = evals[winner].lml;
  return report;
}

BaselineComparison baseline_comparison(const TimeSeries& truth,
                                       const TimeSeries& dmd_prediction,
                                       const TimeSeries& gpr_prediction,
                                       double peak_threshold) {
  if (truth.size() != dmd_prediction.size() || truth.size() != gpr_prediction.size())
    throw LengthMismatch("baseline_comparison: predictions must share the truth grid");

  auto to_records = [&](const TimeSeries& ts) {
    auto spectrum = signal_lab::dft(ts);
    auto peaks = signal_lab::peak_table(spectrum, peak_threshold);
    std::vector<PeakRecord> rec;
    for (const auto& p : peaks) rec.push_back({p.omega, p.intensity, false});
    return rec;
  };

  BaselineComparison cmp;
  cmp.truth_peaks = to_records(truth);
  cmp.dmd_peaks = to_records(dmd_prediction);
  cmp.gpr_peaks = to_records(gpr_prediction);

  auto count_matches = [&](std::vector<PeakRecord>& pred) {
    int matches = 0;
    for (auto& t : cmp.truth_peaks) {
      for (auto& p : pred) {
        if (p.omega == t.omega) {
          p.matched = true;
          ++matches;
          break;
        }
      }
    }
    return matches;
  };
  cmp.dmd_matches = count_matches(cmp.dmd_peaks);
  cmp.gpr_matches = count_matches(cmp.gpr_peaks);

  auto l2 = [&](const TimeSeries& pred) {
    double acc = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i)
      acc += std::norm(pred.values[i] - truth.values[i]);
    return std::sqrt(acc) / static_cast<double>(truth.size());
  };
  cmp.dmd_l2 = l2(dmd_prediction);
  cmp.gpr_l2 = l2(gpr_prediction);
  return cmp;
}

}  // namespace qdmd::gpr
