#include "qdmd/time_series.hpp"

#include <cmath>

namespace qdmd {

std::vector<double> TimeSeries::real_values(double tol) const {
  const double scale = std::max(max_abs(), 1e-300);
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::abs(values[i].imag()) > tol * scale)
      throw Error("TimeSeries: imaginary residue " + std::to_string(values[i].imag()) +
                  " at sample " + std::to_string(i) + " exceeds tolerance");
    out[i] = values[i].real();
  }
  return out;
}

TimeSeries TimeSeries::slice(std::size_t from, std::size_t n) const {
  if (from + n > values.size()) throw Error("TimeSeries::slice: range out of bounds");
  TimeSeries out;
  out.t0 = time_at(from);
  out.dt = dt;
  out.label = label;
  out.metadata = metadata;
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(from),
                    values.begin() + static_cast<std::ptrdiff_t>(from + n));
  return out;
}

TimeSeries make_real_series(double t0, double dt, std::vector<double> samples,
                            std::string label) {
  TimeSeries ts;
  ts.t0 = t0;
  ts.dt = dt;
  ts.label = std::move(label);
  ts.values.reserve(samples.size());
  for (double v : samples) ts.values.emplace_back(v, 0.0);
  return ts;
}

}  // namespace qdmd
