#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>
#include <vector>

#include "qdmd/time_series.hpp"

namespace qdmd::ed {

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Spin operators are S^alpha = sigma^alpha / 2 (eigenvalues +-1/2), the
// convention under which the chain is critical at Gamma/J = 0.5 and the
// square lattice at Gamma/J = 1.52219. Basis state bit i encodes site i
// with bit 0 -> S^z = +1/2. Boundaries are always periodic.
struct SpinSystem {
  enum class Geometry { kChain, kRectangle };

  Geometry geometry = Geometry::kChain;
  int L = 0;        // chain length / y-extent of a rectangle
  int Lx = 1;       // x-extent of a rectangle
  double J = 1.0;   // nearest-neighbor ZZ coupling
  double Gamma = 0.0;  // the system's own transverse field (pre-quench / static)

  static SpinSystem chain(int l, double j, double gamma);
  static SpinSystem rectangle(int lx, int l, double j, double gamma);

  int n_sites() const { return geometry == Geometry::kChain ? L : Lx * L; }
  std::size_t dim() const { return std::size_t(1) << n_sites(); }
  // column-major site ordering: x runs fastest
  int site_index(int x, int y) const { return x + Lx * y; }
  // one ordered pair per site and bond direction: N_s entries on a chain,
  // 2 N_s on a rectangle (L = 2 legs deliberately double-count their bond)
  std::vector<std::pair<int, int>> neighbor_pairs() const;
  void validate() const;
};

inline constexpr int kMaxSites = 20;

// H = -J sum_<ij> S^z_i S^z_j - Gamma sum_i S^x_i, applied matrix-free.
class Hamiltonian {
 public:
  Hamiltonian(const SpinSystem& system, double gamma);

  std::size_t dim() const { return diag_.size(); }
  double gamma() const { return gamma_; }
  const VectorXd& diagonal() const { return diag_; }

  void apply(const VectorXcd& in, VectorXcd& out) const;
  void apply(const VectorXd& in, VectorXd& out) const;
  double expectation(const VectorXcd& state) const;
  MatrixXd dense() const;

 private:
  int n_sites_;
  double gamma_;
  VectorXd diag_;
};

enum class InitialState { kXPolarized, kCriticalGroundState };

struct QuenchSpec {
  InitialState initial = InitialState::kXPolarized;
  double Gamma_post = 0.0;  // transverse field driving the evolution
  double dt = 0.05;
  int n_steps = 0;  // number of samples including t = 0
};

struct EvolveOptions {
  enum class Propagator { kAuto, kSpectral, kKrylov };
  Propagator propagator = Propagator::kAuto;
  // dense spectral propagation up to this many sites, Krylov stepping above
  int spectral_site_limit = 12;
  int krylov_max_dim = 40;
  double krylov_tol = 1e-12;
};

// |psi(0)>: the Gamma/J = infinity ground state (uniform superposition) or
// the ground state of the system's own Hamiltonian.
VectorXcd initial_state(const SpinSystem& system, InitialState which);

// Streams |psi(t_n)> for n = 0..n_steps-1 into the sink; states are not
// retained, so arbitrarily long trajectories run in O(dim) memory.
void evolve_with(const SpinSystem& system, const QuenchSpec& quench,
                 const std::function<void(int, double, const VectorXcd&)>& sink,
                 const EvolveOptions& options = {});

// Convenience variant that materializes every state (small systems / tests).
struct Trajectory {
  std::vector<double> times;
  std::vector<VectorXcd> states;
};
Trajectory evolve(const SpinSystem& system, const QuenchSpec& quench,
                  const EvolveOptions& options = {});

struct Displacement {
  int dx = 0;
  int dy = 0;
};

// Translation-averaged C^zz(r, t) = (1/N_s) sum_i <S^z_i S^z_{i+r}> along a
// precomputed trajectory; real by construction.
TimeSeries equal_time_corr(const SpinSystem& system, const Trajectory& traj,
                           Displacement r);

// Quench run emitting the nearest-neighbor correlator f_eq(t) =
// C^zz(|r| = 1, t) (axis displacement classes averaged), streaming.
TimeSeries quench_nn_correlator(const SpinSystem& system, const QuenchSpec& quench,
                                const EvolveOptions& options = {});

// <psi_0'| S^x_0 e^{-i(H - E_0)t} S^x_r |psi_0'> on the ground state of the
// system's own field; includes the e^{+i E_0 t} phase so the modulus
// converges instead of oscillating at the ground-state energy.
TimeSeries unequal_time_corr(const SpinSystem& system, int r, double t0, double dt,
                             int n_samples, const EvolveOptions& options = {});

// von Neumann entropy (nats) of the first partition_sites sites. Partitions
// larger than half the system are evaluated through the complement, which
// carries the same spectrum.
double entanglement_entropy(const VectorXcd& state, int n_sites, int partition_sites);

struct EntanglementTrace {
  std::vector<double> times;
  std::vector<double> entropy;
  int L_A = 0;
  int Lx = 1;
  int L = 0;
};

// One evolution, entropies for every requested L_A at each sampled time
// (the quench's dt / n_steps define the sampling grid).
std::vector<EntanglementTrace> entanglement_traces(const SpinSystem& system,
                                                   const QuenchSpec& quench,
                                                   const std::vector<int>& l_a_list,
                                                   const EvolveOptions& options = {});

double max_entropy_over_window(const EntanglementTrace& trace, double t_lo,
                               double t_hi);

struct GroundState {
  VectorXd vector;
  double energy = 0.0;
};
GroundState ground_state(const SpinSystem& system, double tol = 1e-12);

enum class FitModel { kFit1d, kFit2d };

struct EntropySample {
  double L = 0.0;
  double L_A = 0.0;
  double Lx = 1.0;
  double value = 0.0;  // S_max / N_A
};

struct ExtrapolationFit {
  FitModel model = FitModel::kFit1d;
  VectorXd coefficients;  // coefficient 0 is s_infinity
  MatrixXd covariance;
  double residual_rms = 0.0;

  double s_inf() const { return coefficients[0]; }
  double s_inf_stderr() const { return std::sqrt(covariance(0, 0)); }
};

ExtrapolationFit extrapolate(const std::vector<EntropySample>& samples,
                             FitModel model);

// Infinite-size infinite-time entanglement entropy per subsystem site after
// a 1D quench h0 -> h (h = 2 Gamma / J); h0 may be infinite.
double exact_entropy_density_1d(double h0, double h);

}  // namespace qdmd::ed
