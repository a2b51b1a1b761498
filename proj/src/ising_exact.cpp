#include "qdmd/ising_exact.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

#include "qdmd/linalg.hpp"
#include "qdmd/parallel.hpp"

namespace qdmd::ising_exact {

namespace {

constexpr double kPi = std::numbers::pi;

struct QuadRule {
  std::vector<double> theta;      // nodes on [0, pi]
  std::vector<double> sin_theta;  // cached sin(theta)
  std::vector<double> weight;
};

// Gauss-Legendre nodes on [-1,1] by Newton iteration, mapped to [0, pi].
QuadRule make_rule(int n) {
  QuadRule rule;
  rule.theta.resize(static_cast<std::size_t>(n));
  rule.sin_theta.resize(static_cast<std::size_t>(n));
  rule.weight.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    // map node +-x to [0, pi]
    const std::size_t a = static_cast<std::size_t>(i);
    const std::size_t b = static_cast<std::size_t>(n - 1 - i);
    rule.theta[a] = 0.5 * kPi * (1.0 - x);
    rule.theta[b] = 0.5 * kPi * (1.0 + x);
    rule.weight[a] = rule.weight[b] = 0.5 * kPi * w;
  }
  for (std::size_t i = 0; i < rule.theta.size(); ++i)
    rule.sin_theta[i] = std::sin(rule.theta[i]);
  return rule;
}

const QuadRule& cached_rule(int n) {
  static std::map<int, QuadRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_rule(n)).first;
  return it->second;
}

// integral kernels share one pass: returns (J_r, E_r) at argument x
std::pair<double, double> anger_weber_quad(int order, double x, int nodes) {
  if (nodes <= 0) nodes = auto_node_count(x);
  const QuadRule& rule = cached_rule(nodes);
  double cj = 0.0, se = 0.0;
  for (std::size_t i = 0; i < rule.theta.size(); ++i) {
    const double phase = order * rule.theta[i] - x * rule.sin_theta[i];
    cj += rule.weight[i] * std::cos(phase);
    se += rule.weight[i] * std::sin(phase);
  }
  return {cj / kPi, se / kPi};
}

double bessel_libm(int order, double x) {
  if (order == 0) return j0(x);
  if (order == 1) return j1(x);
  if (order == -1) return -j1(x);
  const double v = jn(std::abs(order), x);
  return (order < 0 && (order & 1)) ? -v : v;
}

double neumann_libm(int order, double x) {
  if (order == 0) return y0(x);
  if (order == 1) return y1(x);
  if (order == -1) return -y1(x);
  const double v = yn(std::abs(order), x);
  return (order < 0 && (order & 1)) ? -v : v;
}

// Large-argument Weber function: E_nu(x) = -Y_nu(x) + P(x), where P is the
// particular asymptotic solution of the inhomogeneous Bessel equation
//   E'' + E'/x + (1 - nu^2/x^2) E = -[(1+cos nu pi) + nu (1-cos nu pi)/x]/(pi x).
// Even nu: P = sum a_k x^{-(2k+1)}, a_0 = -2/pi,    a_{k+1} = (nu^2-(2k+1)^2) a_k.
// Odd  nu: P = sum b_k x^{-(2k+2)}, b_0 = -2 nu/pi, b_{k+1} = (nu^2-(2k+2)^2) b_k.
double weber_asymptotic(int order, double x) {
  const double nu = order;
  const double inv2 = 1.0 / (x * x);
  double series = 0.0;
  if ((order & 1) == 0) {
    double term = -2.0 / (kPi * x);
    for (int k = 0; k < 12; ++k) {
      series += term;
      const double next = term * (nu * nu - (2.0 * k + 1.0) * (2.0 * k + 1.0)) * inv2;
      if (std::abs(next) >= std::abs(term) || std::abs(next) < 1e-18) break;
      term = next;
    }
  } else {
    double term = -2.0 * nu / (kPi * x * x);
    for (int k = 0; k < 12; ++k) {
      series += term;
      const double next = term * (nu * nu - (2.0 * k + 2.0) * (2.0 * k + 2.0)) * inv2;
      if (std::abs(next) >= std::abs(term) || std::abs(next) < 1e-18) break;
      term = next;
    }
  }
  return -neumann_libm(order, x) + series;
}

}  // namespace

int auto_node_count(double x) {
  const double needed = std::max(32.0, std::ceil(1.5 * std::abs(x)));
  const int n = static_cast<int>(needed);
  return ((n + 31) / 32) * 32;
}

double bessel_j_quad(int order, double x, int nodes) {
  return anger_weber_quad(order, x, nodes).first;
}

double weber_e_quad(int order, double x, int nodes) {
  return anger_weber_quad(order, x, nodes).second;
}

double bessel_j(int order, double x) {
  if (!(std::abs(x) >= kAsymptoticSwitch)) return bessel_j_quad(order, x);
  if (x < 0.0) {  // J_r(-x) = (-1)^r J_r(x)
    const double v = bessel_libm(order, -x);
    return (order & 1) ? -v : v;
  }
  return bessel_libm(order, x);
}

double weber_e(int order, double x) {
  if (!(std::abs(x) >= kAsymptoticSwitch)) return weber_e_quad(order, x);
  if (x < 0.0) {  // E_r(-x) = -(-1)^r E_r(x)
    const double v = weber_asymptotic(order, -x);
    return (order & 1) ? v : -v;
  }
  return weber_asymptotic(order, x);
}

double infinite_time_value() { return 1.0 / (kPi * kPi); }

CorrelatorSample correlator(const CriticalChainSpec& spec, double t) {
  spec.validate();
  if (t < 0.0) throw Error("correlator: t must be >= 0");
  const double x = 2.0 * spec.Gamma * t;
  const int r2 = 2 * spec.r;
  const cdouble mid(bessel_j(r2, x), weber_e(r2, x));
  const cdouble lo(bessel_j(r2 - 1, x), weber_e(r2 - 1, x));
  const cdouble hi(bessel_j(r2 + 1, x), weber_e(r2 + 1, x));
  CorrelatorSample s;
  s.t = t;
  s.value = infinite_time_value() + 0.25 * mid * mid - 0.25 * lo * hi;
  s.abs_value = std::abs(s.value);
  return s;
}

TimeSeries generate_series(const CriticalChainSpec& spec, double t0, double dt,
                           std::size_t n_samples, Observable observable) {
  spec.validate();
  if (!(dt > 0.0)) throw Error("generate_series: dt must be positive");
  if (n_samples < 1) throw Error("generate_series: need n_samples >= 1");
  TimeSeries ts;
  ts.t0 = t0;
  ts.dt = dt;
  ts.label = observable == Observable::kModulus ? "ising1d-critical |Cxx|"
                                                : "ising1d-critical Cxx";
  ts.metadata["generator"] = "ising1d-critical";
  ts.metadata["r"] = std::to_string(spec.r);
  ts.metadata["Gamma_over_J"] = "0.5";
  ts.metadata["observable"] =
      observable == Observable::kModulus ? "modulus" : "complex";
  ts.metadata["quadrature"] = "gauss-legendre auto nodes, abs accuracy ~1e-12";
  ts.values.resize(n_samples);
  parallel_for(n_samples, linalg::threads(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double t = t0 + static_cast<double>(i) * dt;
      CorrelatorSample s = correlator(spec, t);
      ts.values[i] = observable == Observable::kModulus ? cdouble(s.abs_value, 0.0)
                                                        : s.value;
    }
  });
  return ts;
}

}  // namespace qdmd::ising_exact
