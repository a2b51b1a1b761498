#include "qdmd/ed.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "qdmd/errors.hpp"
#include "qdmd/linalg.hpp"
#include "qdmd/parallel.hpp"

namespace qdmd::ed {

using Eigen::MatrixXcd;

namespace {

constexpr double kPi = std::numbers::pi;

int wrap(int a, int n) {
  a %= n;
  return a < 0 ? a + n : a;
}

// z_i as +-1 signs; the 1/2 factors are folded into the couplings
inline double zsign(std::size_t state, int site) {
  return (state >> site) & 1 ? -1.0 : 1.0;
}

}  // namespace

SpinSystem SpinSystem::chain(int l, double j, double gamma) {
  SpinSystem s;
  s.geometry = Geometry::kChain;
  s.L = l;
  s.Lx = 1;
  s.J = j;
  s.Gamma = gamma;
  s.validate();
  return s;
}

SpinSystem SpinSystem::rectangle(int lx, int l, double j, double gamma) {
  SpinSystem s;
  s.geometry = Geometry::kRectangle;
  s.L = l;
  s.Lx = lx;
  s.J = j;
  s.Gamma = gamma;
  s.validate();
  return s;
}

void SpinSystem::validate() const {
  if (geometry == Geometry::kChain) {
    if (L < 2) throw Error("SpinSystem: chain needs L >= 2");
  } else {
    if (L < 2 || Lx < 2) throw Error("SpinSystem: rectangle needs Lx, L >= 2");
  }
  if (n_sites() > kMaxSites)
    throw TooLarge("SpinSystem: " + std::to_string(n_sites()) +
                   " sites exceeds the cap of " + std::to_string(kMaxSites));
}

std::vector<std::pair<int, int>> SpinSystem::neighbor_pairs() const {
  std::vector<std::pair<int, int>> pairs;
  if (geometry == Geometry::kChain) {
    pairs.reserve(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) pairs.emplace_back(i, wrap(i + 1, L));
  } else {
    pairs.reserve(static_cast<std::size_t>(2 * n_sites()));
    for (int y = 0; y < L; ++y)
      for (int x = 0; x < Lx; ++x) {
        pairs.emplace_back(site_index(x, y), site_index(wrap(x + 1, Lx), y));
        pairs.emplace_back(site_index(x, y), site_index(x, wrap(y + 1, L)));
      }
  }
  return pairs;
}

Hamiltonian::Hamiltonian(const SpinSystem& system, double gamma)
    : n_sites_(system.n_sites()), gamma_(gamma) {
  system.validate();
  const std::size_t dim = system.dim();
  const auto pairs = system.neighbor_pairs();
  diag_.resize(static_cast<Eigen::Index>(dim));
  // S^z_i S^z_j contributes J/4 per pair sign
  const double quarter_j = 0.25 * system.J;
  parallel_for(dim, linalg::threads(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      double acc = 0.0;
      for (const auto& [i, j] : pairs) acc += zsign(s, i) * zsign(s, j);
      diag_[static_cast<Eigen::Index>(s)] = -quarter_j * acc;
    }
  });
}

template <typename Vec>
static void apply_impl(const VectorXd& diag, int n_sites, double gamma,
                       const Vec& in, Vec& out) {
  const std::size_t dim = static_cast<std::size_t>(diag.size());
  out.resize(diag.size());
  const double half_gamma = 0.5 * gamma;
  parallel_for(dim, linalg::threads(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t s = lo; s < hi; ++s) {
      auto acc = diag[static_cast<Eigen::Index>(s)] * in[static_cast<Eigen::Index>(s)];
      for (int i = 0; i < n_sites; ++i)
        acc -= half_gamma * in[static_cast<Eigen::Index>(s ^ (std::size_t(1) << i))];
      out[static_cast<Eigen::Index>(s)] = acc;
    }
  });
}

void Hamiltonian::apply(const VectorXcd& in, VectorXcd& out) const {
  apply_impl(diag_, n_sites_, gamma_, in, out);
}

void Hamiltonian::apply(const VectorXd& in, VectorXd& out) const {
  apply_impl(diag_, n_sites_, gamma_, in, out);
}

double Hamiltonian::expectation(const VectorXcd& state) const {
  VectorXcd hs;
  apply(state, hs);
  return std::real(state.dot(hs));
}

MatrixXd Hamiltonian::dense() const {
  const Eigen::Index dim = diag_.size();
  MatrixXd h = MatrixXd::Zero(dim, dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    h(s, s) = diag_[s];
    for (int i = 0; i < n_sites_; ++i)
      h(static_cast<Eigen::Index>(static_cast<std::size_t>(s) ^ (std::size_t(1) << i)), s) -=
          0.5 * gamma_;
  }
  return h;
}

VectorXcd initial_state(const SpinSystem& system, InitialState which) {
  const std::size_t dim = system.dim();
  if (which == InitialState::kXPolarized) {
    // uniform + superposition: the Gamma -> infinity ground state
    const double amp = 1.0 / std::sqrt(static_cast<double>(dim));
    return VectorXcd::Constant(static_cast<Eigen::Index>(dim), cdouble(amp, 0.0));
  }
  GroundState gs = ground_state(system);
  return gs.vector.cast<cdouble>();
}

namespace {

// ---- ground state: Lanczos with full reorthogonalization -------------------

struct LanczosResult {
  VectorXd vector;
  double energy = 0.0;
  double residual = 0.0;
};

LanczosResult lanczos_ground(const Hamiltonian& h, double tol) {
  const Eigen::Index dim = static_cast<Eigen::Index>(h.dim());
  const int max_iter = static_cast<int>(std::min<Eigen::Index>(dim, 320));
  // uniform positive start: symmetric under every lattice symmetry, so a
  // degenerate ground space resolves to the symmetric combination
  VectorXd v = VectorXd::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  std::vector<VectorXd> basis;
  std::vector<double> alpha, beta;
  basis.push_back(v);

  double scale = 1.0;
  LanczosResult best;
  for (int j = 0; j < max_iter; ++j) {
    VectorXd w;
    h.apply(basis.back(), w);
    const double a = basis.back().dot(w);
    alpha.push_back(a);
    w -= a * basis.back();
    if (j > 0) w -= beta.back() * basis[basis.size() - 2];
    for (const auto& b : basis) w -= b.dot(w) * b;  // full reorthogonalization
    const double bnorm = w.norm();
    scale = std::max(scale, std::abs(a) + bnorm);

    // tridiagonal ground pair
    const int m = j + 1;
    MatrixXd t = MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) t(i, i) = alpha[static_cast<std::size_t>(i)];
    for (int i = 0; i + 1 < m; ++i)
      t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(t);
    const VectorXd y = es.eigenvectors().col(0);
    best.energy = es.eigenvalues()[0];
    best.residual = bnorm * std::abs(y[m - 1]);
    if (best.residual < tol * scale || bnorm < 1e-14 * scale || j + 1 == max_iter) {
      best.vector = VectorXd::Zero(dim);
      for (int i = 0; i < m; ++i) best.vector += y[i] * basis[static_cast<std::size_t>(i)];
      best.vector.normalize();
      return best;
    }
    beta.push_back(bnorm);
    basis.push_back(w / bnorm);
  }
  return best;
}

// ---- propagators ------------------------------------------------------------

struct SpectralPropagator {
  VectorXd evals;
  MatrixXd evecs;

  explicit SpectralPropagator(const Hamiltonian& h) {
    linalg::sym_eig(h.dense(), evals, evecs);
  }

  // states at the given times, written column by column into `out`
  void batch(const VectorXcd& coeff0, const std::vector<double>& times,
             MatrixXcd& out) const {
    const Eigen::Index dim = evals.size();
    const Eigen::Index k = static_cast<Eigen::Index>(times.size());
    MatrixXcd c(dim, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double t = times[static_cast<std::size_t>(j)];
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double ph = -evals[i] * t;
        c(i, j) = coeff0[i] * cdouble(std::cos(ph), std::sin(ph));
      }
    }
    out.resize(dim, k);
    out.real() = evecs * c.real();
    out.imag() = evecs * c.imag();
  }

  VectorXcd project(const VectorXcd& state) const { return evecs.transpose() * state; }
};

struct KrylovPropagator {
  const Hamiltonian& h;
  int max_dim;
  double tol;
  MatrixXcd basis;

  KrylovPropagator(const Hamiltonian& ham, const EvolveOptions& opt)
      : h(ham), max_dim(std::min<int>(opt.krylov_max_dim,
                                      static_cast<int>(ham.dim()))),
        tol(opt.krylov_tol) {
    basis.resize(static_cast<Eigen::Index>(h.dim()), max_dim);
  }

  void step(VectorXcd& psi, double dt) {
    const double psi_norm = psi.norm();
    if (psi_norm == 0.0) throw ConvergenceFailure("krylov: zero state");
    basis.col(0) = psi / psi_norm;
    std::vector<double> alpha, beta;
    VectorXcd w;
    int m = 0;
    Eigen::VectorXcd y;
    for (int j = 0; j < max_dim; ++j) {
      h.apply(basis.col(j), w);
      const double a = std::real(basis.col(j).dot(w));
      alpha.push_back(a);
      w -= a * basis.col(j);
      if (j > 0) w -= beta.back() * basis.col(j - 1);
      for (int i = 0; i <= j; ++i) w -= basis.col(i).dot(w) * basis.col(i);
      const double bnorm = w.norm();
      m = j + 1;

      // exp(-i dt T_m) e_1 through the tridiagonal eigenbasis
      MatrixXd t = MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) t(i, i) = alpha[static_cast<std::size_t>(i)];
      for (int i = 0; i + 1 < m; ++i)
        t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(t);
      VectorXcd phases(m);
      for (int i = 0; i < m; ++i) {
        const double ph = -es.eigenvalues()[i] * dt;
        phases[i] = cdouble(std::cos(ph), std::sin(ph));
      }
      y = es.eigenvectors().cast<cdouble>() *
          (phases.array() * (es.eigenvectors().row(0).transpose().cast<cdouble>()).array())
              .matrix();

      const double err = bnorm * std::abs(y[m - 1]) * std::abs(dt);
      if (err < tol || bnorm < 1e-13 || j + 1 == max_dim) {
        if (err >= 1e3 * tol && j + 1 == max_dim)
          throw ConvergenceFailure(
              "krylov step did not reach tolerance: error estimate " +
              std::to_string(err) + " with subspace dimension " + std::to_string(m));
        break;
      }
      beta.push_back(bnorm);
      basis.col(j + 1) = w / bnorm;
    }
    psi = psi_norm * (basis.leftCols(m) * y);
  }
};

bool use_spectral(const SpinSystem& system, const EvolveOptions& options) {
  switch (options.propagator) {
    case EvolveOptions::Propagator::kSpectral:
      return true;
    case EvolveOptions::Propagator::kKrylov:
      return false;
    default:
      return system.n_sites() <= options.spectral_site_limit;
  }
}

void stream_states(const Hamiltonian& h, const SpinSystem& system,
                   const VectorXcd& psi0, double dt, int n_steps,
                   const EvolveOptions& options,
                   const std::function<void(int, double, const VectorXcd&)>& sink) {
  if (n_steps < 1) throw Error("evolve: n_steps must be >= 1");
  if (!(dt > 0.0)) throw Error("evolve: dt must be positive");
  if (use_spectral(system, options)) {
    SpectralPropagator prop(h);
    const VectorXcd coeff0 = prop.project(psi0);
    const Eigen::Index dim = static_cast<Eigen::Index>(h.dim());
    const int chunk =
        std::max(1, static_cast<int>(std::min<std::size_t>(512, (std::size_t(1) << 22) / h.dim())));
    MatrixXcd states;
    std::vector<double> times;
    for (int start = 0; start < n_steps; start += chunk) {
      const int count = std::min(chunk, n_steps - start);
      times.resize(static_cast<std::size_t>(count));
      for (int j = 0; j < count; ++j)
        times[static_cast<std::size_t>(j)] = static_cast<double>(start + j) * dt;
      prop.batch(coeff0, times, states);
      for (int j = 0; j < count; ++j) {
        const VectorXcd column = states.col(j);
        sink(start + j, times[static_cast<std::size_t>(j)], column);
      }
    }
    (void)dim;
  } else {
    KrylovPropagator prop(h, options);
    VectorXcd psi = psi0;
    sink(0, 0.0, psi);
    for (int n = 1; n < n_steps; ++n) {
      prop.step(psi, dt);
      sink(n, static_cast<double>(n) * dt, psi);
    }
  }
}

std::vector<std::pair<int, int>> displacement_pairs(const SpinSystem& system,
                                                    Displacement r) {
  std::vector<std::pair<int, int>> pairs;
  if (system.geometry == SpinSystem::Geometry::kChain) {
    for (int i = 0; i < system.L; ++i) pairs.emplace_back(i, wrap(i + r.dx, system.L));
  } else {
    for (int y = 0; y < system.L; ++y)
      for (int x = 0; x < system.Lx; ++x)
        pairs.emplace_back(system.site_index(x, y),
                           system.site_index(wrap(x + r.dx, system.Lx),
                                             wrap(y + r.dy, system.L)));
  }
  return pairs;
}

double zz_expectation(const VectorXcd& state,
                      const std::vector<std::pair<int, int>>& pairs) {
  double acc = 0.0;
  for (Eigen::Index s = 0; s < state.size(); ++s) {
    const double p = std::norm(state[s]);
    double zz = 0.0;
    for (const auto& [i, j] : pairs)
      zz += zsign(static_cast<std::size_t>(s), i) * zsign(static_cast<std::size_t>(s), j);
    acc += p * zz;
  }
  // S^z = sigma^z/2 on both operators, averaged over the pair list
  return 0.25 * acc / static_cast<double>(pairs.size());
}

}  // namespace

void evolve_with(const SpinSystem& system, const QuenchSpec& quench,
                 const std::function<void(int, double, const VectorXcd&)>& sink,
                 const EvolveOptions& options) {
  const Hamiltonian h(system, quench.Gamma_post);
  const VectorXcd psi0 = initial_state(system, quench.initial);
  stream_states(h, system, psi0, quench.dt, quench.n_steps, options, sink);
}

Trajectory evolve(const SpinSystem& system, const QuenchSpec& quench,
                  const EvolveOptions& options) {
  const std::size_t bytes = system.dim() * static_cast<std::size_t>(quench.n_steps) * 16;
  if (bytes > (std::size_t(2) << 30))
    throw TooLarge("evolve: trajectory would need " + std::to_string(bytes >> 20) +
                   " MiB; use evolve_with");
  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(quench.n_steps));
  traj.states.reserve(static_cast<std::size_t>(quench.n_steps));
  evolve_with(
      system, quench,
      [&](int, double t, const VectorXcd& psi) {
        traj.times.push_back(t);
        traj.states.push_back(psi);
      },
      options);
  return traj;
}

TimeSeries equal_time_corr(const SpinSystem& system, const Trajectory& traj,
                           Displacement r) {
  if (traj.states.empty()) throw Error("equal_time_corr: empty trajectory");
  const auto pairs = displacement_pairs(system, r);
  TimeSeries ts;
  ts.t0 = traj.times.front();
  ts.dt = traj.times.size() > 1 ? traj.times[1] - traj.times[0] : 1.0;
  ts.label = "ed Czz_eq";
  ts.values.reserve(traj.states.size());
  for (const auto& state : traj.states)
    ts.values.emplace_back(zz_expectation(state, pairs), 0.0);
  return ts;
}

TimeSeries quench_nn_correlator(const SpinSystem& system, const QuenchSpec& quench,
                                const EvolveOptions& options) {
  std::vector<std::vector<std::pair<int, int>>> classes;
  classes.push_back(displacement_pairs(system, {1, 0}));
  if (system.geometry == SpinSystem::Geometry::kRectangle)
    classes.push_back(displacement_pairs(system, {0, 1}));
  TimeSeries ts;
  ts.t0 = 0.0;
  ts.dt = quench.dt;
  ts.label = "ed Czz_eq |r|=1";
  ts.metadata["generator"] = system.geometry == SpinSystem::Geometry::kChain
                                 ? "ising1d-quench"
                                 : "ising2d-quench";
  ts.values.resize(static_cast<std::size_t>(quench.n_steps));
  evolve_with(
      system, quench,
      [&](int n, double, const VectorXcd& psi) {
        double acc = 0.0;
        for (const auto& pairs : classes) acc += zz_expectation(psi, pairs);
        ts.values[static_cast<std::size_t>(n)] =
            cdouble(acc / static_cast<double>(classes.size()), 0.0);
      },
      options);
  return ts;
}

TimeSeries unequal_time_corr(const SpinSystem& system, int r, double t0, double dt,
                             int n_samples, const EvolveOptions& options) {
  if (r < 0 || r >= system.n_sites())
    throw Error("unequal_time_corr: displacement outside the lattice");
  if (n_samples < 1) throw Error("unequal_time_corr: need n_samples >= 1");
  GroundState gs = ground_state(system);
  const Hamiltonian h(system, system.Gamma);
  const Eigen::Index dim = static_cast<Eigen::Index>(system.dim());

  // u = S^x_r |g>, w = S^x_0 |g>  (bit flips carrying the 1/2 factors)
  VectorXcd u(dim), w(dim);
  const std::size_t flip_r = std::size_t(1) << r;
  for (Eigen::Index s = 0; s < dim; ++s) {
    u[s] = 0.5 * gs.vector[static_cast<Eigen::Index>(static_cast<std::size_t>(s) ^ flip_r)];
    w[s] = 0.5 * gs.vector[static_cast<Eigen::Index>(static_cast<std::size_t>(s) ^ 1)];
  }

  TimeSeries ts;
  ts.t0 = t0;
  ts.dt = dt;
  ts.label = "ed Cxx_uneq";
  ts.metadata["generator"] = "ising-ed-unequal";
  ts.values.resize(static_cast<std::size_t>(n_samples));

  if (use_spectral(system, options)) {
    SpectralPropagator prop(h);
    const VectorXcd uh = prop.project(u);
    const VectorXcd wh = prop.project(w);
    parallel_for(static_cast<std::size_t>(n_samples), linalg::threads(),
                 [&](std::size_t lo, std::size_t hi) {
                   for (std::size_t k = lo; k < hi; ++k) {
                     const double t = t0 + static_cast<double>(k) * dt;
                     cdouble acc = 0.0;
                     for (Eigen::Index i = 0; i < dim; ++i) {
                       const double ph = (gs.energy - prop.evals[i]) * t;
                       acc += std::conj(wh[i]) * uh[i] * cdouble(std::cos(ph), std::sin(ph));
                     }
                     ts.values[k] = acc;
                   }
                 });
  } else {
    const int pre_steps = static_cast<int>(std::llround(t0 / dt));
    if (std::abs(pre_steps * dt - t0) > 1e-9)
      throw Error("unequal_time_corr: t0 must be a multiple of dt for Krylov stepping");
    KrylovPropagator prop(h, options);
    VectorXcd psi = u;
    for (int n = 0; n < pre_steps; ++n) prop.step(psi, dt);
    for (int k = 0; k < n_samples; ++k) {
      if (k > 0) prop.step(psi, dt);
      const double t = t0 + static_cast<double>(k) * dt;
      const double ph = gs.energy * t;
      ts.values[static_cast<std::size_t>(k)] =
          cdouble(std::cos(ph), std::sin(ph)) * w.dot(psi);
    }
  }
  return ts;
}

double entanglement_entropy(const VectorXcd& state, int n_sites, int partition_sites) {
  if (partition_sites < 1 || partition_sites >= n_sites)
    throw BadPartition("entanglement_entropy: partition must keep both sides non-empty");
  if (state.size() != static_cast<Eigen::Index>(std::size_t(1) << n_sites))
    throw BadPartition("entanglement_entropy: state dimension does not match n_sites");
  const Eigen::Index rows = static_cast<Eigen::Index>(std::size_t(1) << partition_sites);
  const Eigen::Index cols = state.size() / rows;
  Eigen::Map<const MatrixXcd> psi(state.data(), rows, cols);
  Eigen::VectorXd sv = linalg::singular_values(MatrixXcd(psi));
  double s = 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    const double p = sv[i] * sv[i];
    if (p > 1e-14) s -= p * std::log(p);
  }
  return s;
}

std::vector<EntanglementTrace> entanglement_traces(const SpinSystem& system,
                                                   const QuenchSpec& quench,
                                                   const std::vector<int>& l_a_list,
                                                   const EvolveOptions& options) {
  std::vector<EntanglementTrace> traces(l_a_list.size());
  const int n_sites = system.n_sites();
  const bool chain = system.geometry == SpinSystem::Geometry::kChain;
  for (std::size_t q = 0; q < l_a_list.size(); ++q) {
    traces[q].L_A = l_a_list[q];
    traces[q].Lx = chain ? 1 : system.Lx;
    traces[q].L = system.L;
  }
  evolve_with(
      system, quench,
      [&](int, double t, const VectorXcd& psi) {
        for (std::size_t q = 0; q < l_a_list.size(); ++q) {
          const int part = chain ? l_a_list[q] : system.Lx * l_a_list[q];
          traces[q].times.push_back(t);
          traces[q].entropy.push_back(entanglement_entropy(psi, n_sites, part));
        }
      },
      options);
  return traces;
}

double max_entropy_over_window(const EntanglementTrace& trace, double t_lo,
                               double t_hi) {
  double best = -1.0;
  for (std::size_t i = 0; i < trace.times.size(); ++i)
    if (trace.times[i] >= t_lo && trace.times[i] <= t_hi)
      best = std::max(best, trace.entropy[i]);
  if (best < 0.0) throw EmptyWindow("max_entropy_over_window: no samples in window");
  return best;
}

GroundState ground_state(const SpinSystem& system, double tol) {
  const Hamiltonian h(system, system.Gamma);
  LanczosResult res = lanczos_ground(h, tol);
  GroundState gs;
  gs.vector = std::move(res.vector);
  gs.energy = res.energy;
  return gs;
}

ExtrapolationFit extrapolate(const std::vector<EntropySample>& samples,
                             FitModel model) {
  const int p = model == FitModel::kFit1d ? 6 : 10;
  const int n = static_cast<int>(samples.size());
  if (n <= p)
    throw RankDeficient("extrapolate: need more samples than coefficients");
  MatrixXd x(n, p);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const double il = 1.0 / s.L, ia = 1.0 / s.L_A;
    if (model == FitModel::kFit1d) {
      x.row(i) << 1.0, il, ia, il * il, il * ia, ia * ia;
    } else {
      const double ix = 1.0 / s.Lx;
      x.row(i) << 1.0, il, ia, ix, il * il, il * ia, il * ix, ia * ia, ia * ix, ix * ix;
    }
    y[i] = s.value;
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  if (qr.rank() < p)
    throw RankDeficient("extrapolate: design matrix is rank deficient (" +
                        std::to_string(qr.rank()) + " of " + std::to_string(p) + ")");
  ExtrapolationFit fit;
  fit.model = model;
  fit.coefficients = qr.solve(y);
  const VectorXd resid = y - x * fit.coefficients;
  const double s2 = resid.squaredNorm() / std::max(1, n - p);
  fit.covariance = s2 * (x.transpose() * x).inverse();
  fit.residual_rms = std::sqrt(resid.squaredNorm() / n);
  return fit;
}

double exact_entropy_density_1d(double h0, double h) {
  // entropy kernel H(x) with the x -> 1 limit taken continuously
  auto entropy_kernel = [](double x) {
    double s = 0.0;
    const double a = 0.5 * (1.0 + x), b = 0.5 * (1.0 - x);
    if (a > 1e-300) s -= a * std::log(a);
    if (b > 1e-300) s -= b * std::log(b);
    return s;
  };
  auto integrand = [&](double phi) {
    const double c = std::cos(phi);
    double arg;
    if (std::isinf(h0)) {
      arg = (h - c) / std::sqrt(1.0 - 2.0 * h * c + h * h);
    } else {
      arg = (1.0 - (h + h0) * c + h * h0) /
            std::sqrt((1.0 - 2.0 * h * c + h * h) * (1.0 - 2.0 * h0 * c + h0 * h0));
    }
    arg = std::clamp(arg, -1.0, 1.0);
    return entropy_kernel(arg);
  };
  // composite Gauss-Legendre: the integrand is smooth except for a mild
  // endpoint kink when the quench ends at criticality
  constexpr int kPanels = 64, kNodes = 16;
  static const auto rule = [] {
    std::array<std::pair<double, double>, kNodes> nw{};
    for (int i = 0; i < kNodes; ++i) {
      double xn = std::cos(kPi * (i + 0.75) / (kNodes + 0.5));
      double pp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < kNodes; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * xn * p1 - j * p2) / (j + 1.0);
        }
        pp = kNodes * (xn * p0 - p1) / (xn * xn - 1.0);
        const double dx = p0 / pp;
        xn -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      nw[static_cast<std::size_t>(i)] = {xn, 2.0 / ((1.0 - xn * xn) * pp * pp)};
    }
    return nw;
  }();
  // momentum integral over the half Brillouin zone [0, pi] normalized by pi
  double total = 0.0;
  const double width = kPi / kPanels;
  for (int panel = 0; panel < kPanels; ++panel) {
    const double lo = panel * width;
    for (const auto& [xn, wn] : rule)
      total += 0.5 * width * wn * integrand(lo + 0.5 * width * (xn + 1.0));
  }
  return total / kPi;
}

}  // namespace qdmd::ed
