#pragma once

#include <cstddef>

#include "qdmd/time_series.hpp"

namespace qdmd::ising_exact {

// Unequal-time transverse correlator of the critical transverse-field Ising
// chain (infinite system), assembled from Bessel and Anger-Weber integrals
// at argument x = 2*Gamma*t.

// Number of Gauss-Legendre nodes used on [0, pi] for argument x: the
// integrand oscillates ~x times, so the count grows linearly with |x|
// (max(32, ceil(1.5|x|)), rounded up to a multiple of 32 for rule reuse).
int auto_node_count(double x);

// Quadrature evaluation of (1/pi) * int_0^pi cos(r theta - x sin theta) dtheta
// and the sin counterpart. nodes == 0 selects auto_node_count(x). Valid for
// any integer order, including negative ones, directly by the integral.
double bessel_j_quad(int order, double x, int nodes = 0);
double weber_e_quad(int order, double x, int nodes = 0);

// Fast evaluation: quadrature below kAsymptoticSwitch, large-argument
// asymptotics (libm Bessel plus the Anger-Weber correction series) above.
// Absolute accuracy ~1e-12 or better across the switch.
inline constexpr double kAsymptoticSwitch = 600.0;
double bessel_j(int order, double x);
double weber_e(int order, double x);

struct CriticalChainSpec {
  double J = 1.0;      // coupling, sets the units
  double Gamma = 0.5;  // transverse field; the closed form holds at Gamma = J/2
  int r = 0;           // site separation

  void validate() const {
    if (!(J > 0.0)) throw Error("CriticalChainSpec: J must be positive");
    if (Gamma != 0.5 * J)
      throw Error("CriticalChainSpec: closed form requires Gamma/J = 0.5 exactly");
    if (r < 0) throw Error("CriticalChainSpec: r must be >= 0");
  }
};

struct CorrelatorSample {
  double t = 0.0;
  cdouble value;
  double abs_value = 0.0;
};

CorrelatorSample correlator(const CriticalChainSpec& spec, double t);

// m_x^2 = 1/pi^2, the infinite-time limit of |C| at the critical point.
double infinite_time_value();

enum class Observable { kComplex, kModulus };

// Uniform sampling of the correlator; embarrassingly parallel over samples
// with deterministic output. kModulus yields the scalar |C| that the
// forecasting pipeline consumes.
TimeSeries generate_series(const CriticalChainSpec& spec, double t0, double dt,
                           std::size_t n_samples,
                           Observable observable = Observable::kModulus);

}  // namespace qdmd::ising_exact
