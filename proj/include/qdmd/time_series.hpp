#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "qdmd/errors.hpp"

namespace qdmd {

using cdouble = std::complex<double>;

// Uniformly sampled scalar signal. Sample n lives at time t0 + n*dt
// (always computed from the index, never by accumulation). Times are in
// units of 1/J throughout the project.
struct TimeSeries {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<cdouble> values;
  std::string label;
  // Sidecar fields (generator, seed, warnings, ...) carried through I/O.
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return values.size(); }
  double time_at(std::size_t n) const { return t0 + static_cast<double>(n) * dt; }

  void validate() const {
    if (!(dt > 0.0)) throw Error("TimeSeries: dt must be positive");
    if (values.empty()) throw Error("TimeSeries: empty sample vector");
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& v : values) m = std::max(m, std::abs(v));
    return m;
  }

  // True when every imaginary part is negligible against the signal scale.
  bool is_real(double tol = 1e-12) const {
    const double scale = std::max(max_abs(), 1e-300);
    for (const auto& v : values)
      if (std::abs(v.imag()) > tol * scale) return false;
    return true;
  }

  // Drops imaginary parts after asserting they are below tol * max|f|.
  std::vector<double> real_values(double tol = 1e-8) const;

  // Sub-series of n samples starting at index `from` (timestamps preserved).
  TimeSeries slice(std::size_t from, std::size_t n) const;
};

TimeSeries make_real_series(double t0, double dt, std::vector<double> samples,
                            std::string label = {});

}  // namespace qdmd
