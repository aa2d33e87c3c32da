#pragma once

// Compressible Euler physics: fluxes, wave speeds, numerical fluxes,
// boundary ghost states, and the initial-condition catalog.  Scalar linear
// advection is carried along as a second Equations variant so the solver can
// be exercised against closed-form transport solutions.

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "dgnet/common.hpp"

namespace dgnet {

enum class Equations { euler, advection };

enum class FluxScheme { lax_friedrichs, hll, central };

// Equation-of-state plus problem dimensionality.  n_comp() is the number of
// conservative components m: (rho, rho*u, E) in 1D, (rho, rho*u, rho*v, E)
// in 2D, or 1 for scalar advection with velocity `advect`.
struct Physics {
  Equations eq = Equations::euler;
  int dim = 1;
  double gamma = 1.4;
  std::array<double, 2> advect = {1.0, 0.0};

  int n_comp() const { return eq == Equations::euler ? dim + 2 : 1; }
};

inline FluxScheme flux_scheme_from_string(const std::string& s) {
  if (s == "lax-friedrichs") return FluxScheme::lax_friedrichs;
  if (s == "hll") return FluxScheme::hll;
  if (s == "central") return FluxScheme::central;
  throw ConfigError("unknown flux scheme '" + s + "'");
}

inline std::string to_string(FluxScheme s) {
  switch (s) {
    case FluxScheme::lax_friedrichs: return "lax-friedrichs";
    case FluxScheme::hll: return "hll";
    default: return "central";
  }
}

// Numerical-flux model: scheme selection bundled with the physics it acts on.
struct FluxModel {
  FluxScheme scheme = FluxScheme::lax_friedrichs;
  Physics physics;
};

template <typename Real>
inline Real pressure(const Real* u, int dim, Real gamma) {
  Real ke = u[1] * u[1];
  if (dim == 2) ke += u[2] * u[2];
  ke /= Real(2) * u[0];
  return (gamma - Real(1)) * (u[dim + 1] - ke);
}

template <typename Real>
inline bool is_valid_state(const Real* u, int dim, Real gamma) {
  const int m = dim + 2;
  for (int q = 0; q < m; ++q)
    if (!std::isfinite(u[q])) return false;
  return u[0] > Real(0) && pressure(u, dim, gamma) > Real(0);
}

// Conservative Euler state with queryable validity.  Reference currency for
// the catalog, ghost states, and exact solutions; hot loops use the pointer
// functions below on the same layout.
struct EulerState {
  std::array<double, 4> u{};
  int dim = 1;
  double gamma = 1.4;

  int m() const { return dim + 2; }
  double pressure() const { return dgnet::pressure(u.data(), dim, gamma); }
  bool valid() const { return is_valid_state(u.data(), dim, gamma); }
};

// q = (rho, u, p) or (rho, u, v, p)
template <typename Real>
inline void primitive_to_conservative(const Real* q, int dim, Real gamma, Real* u) {
  u[0] = q[0];
  Real ke = q[1] * q[1];
  u[1] = q[0] * q[1];
  if (dim == 2) {
    u[2] = q[0] * q[2];
    ke += q[2] * q[2];
  }
  u[dim + 1] = q[dim + 1] / (gamma - Real(1)) + Real(0.5) * q[0] * ke;
}

template <typename Real>
inline void conservative_to_primitive(const Real* u, int dim, Real gamma, Real* q) {
  q[0] = u[0];
  q[1] = u[1] / u[0];
  if (dim == 2) q[2] = u[2] / u[0];
  q[dim + 1] = pressure(u, dim, gamma);
}

inline EulerState make_state_from_primitive(const double* q, int dim, double gamma) {
  EulerState s;
  s.dim = dim;
  s.gamma = gamma;
  primitive_to_conservative(q, dim, gamma, s.u.data());
  return s;
}

// Coordinate-direction fluxes f_1 (and f_2 in 2D), written to fx/fy.
// Computes algebraically even for invalid states; validity is the caller's
// concern.
template <typename Real>
inline void physical_flux(const Physics& ph, const Real* u, Real* fx, Real* fy) {
  if (ph.eq == Equations::advection) {
    fx[0] = Real(ph.advect[0]) * u[0];
    if (fy) fy[0] = Real(ph.advect[1]) * u[0];
    return;
  }
  const Real rho = u[0];
  const Real vx = u[1] / rho;
  const Real p = pressure(u, ph.dim, Real(ph.gamma));
  if (ph.dim == 1) {
    fx[0] = u[1];
    fx[1] = u[1] * vx + p;
    fx[2] = vx * (u[2] + p);
    return;
  }
  const Real vy = u[2] / rho;
  const Real Ep = u[3] + p;
  fx[0] = u[1];
  fx[1] = u[1] * vx + p;
  fx[2] = u[1] * vy;
  fx[3] = vx * Ep;
  fy[0] = u[2];
  fy[1] = fx[2];
  fy[2] = u[2] * vy + p;
  fy[3] = vy * Ep;
}

// n . f, the directional flux through a face with unit normal n.
template <typename Real>
inline void normal_flux(const Physics& ph, const Real* u, const Real* n, Real* out) {
  if (ph.eq == Equations::advection) {
    Real an = Real(ph.advect[0]) * n[0];
    if (ph.dim == 2) an += Real(ph.advect[1]) * n[1];
    out[0] = an * u[0];
    return;
  }
  const Real rho = u[0];
  const Real p = pressure(u, ph.dim, Real(ph.gamma));
  if (ph.dim == 1) {
    const Real vn = (u[1] / rho) * n[0];
    out[0] = vn * rho;
    out[1] = vn * u[1] + p * n[0];
    out[2] = vn * (u[2] + p);
    return;
  }
  const Real vn = (u[1] * n[0] + u[2] * n[1]) / rho;
  out[0] = vn * rho;
  out[1] = vn * u[1] + p * n[0];
  out[2] = vn * u[2] + p * n[1];
  out[3] = vn * (u[3] + p);
}

// A = d(n.f)/du, row-major m x m.  Used by the analytic tangent-linear path
// and verified against finite differences in the tests.
template <typename Real>
inline void normal_flux_jacobian(const Physics& ph, const Real* u, const Real* n, Real* A) {
  const Real g = Real(ph.gamma);
  if (ph.eq == Equations::advection) {
    Real an = Real(ph.advect[0]) * n[0];
    if (ph.dim == 2) an += Real(ph.advect[1]) * n[1];
    A[0] = an;
    return;
  }
  const int d = ph.dim;
  const int m = d + 2;
  const Real rho = u[0];
  Real vel[2] = {u[1] / rho, Real(0)};
  Real nv[2] = {n[0], Real(0)};
  if (d == 2) {
    vel[1] = u[2] / rho;
    nv[1] = n[1];
  }
  const Real V = vel[0] * nv[0] + vel[1] * nv[1];
  const Real ke = Real(0.5) * (vel[0] * vel[0] + vel[1] * vel[1]);
  const Real p = pressure(u, d, g);
  const Real H = (u[m - 1] + p) / rho;
  const Real gm1 = g - Real(1);

  // mass row
  A[0] = Real(0);
  for (int i = 0; i < d; ++i) A[i + 1] = nv[i];
  A[m - 1] = Real(0);
  // momentum rows
  for (int j = 0; j < d; ++j) {
    Real* row = A + (j + 1) * m;
    row[0] = gm1 * ke * nv[j] - vel[j] * V;
    for (int i = 0; i < d; ++i)
      row[i + 1] = (i == j ? V : Real(0)) + vel[j] * nv[i] - gm1 * vel[i] * nv[j];
    row[m - 1] = gm1 * nv[j];
  }
  // energy row
  Real* row = A + (m - 1) * m;
  row[0] = V * (gm1 * ke - H);
  for (int i = 0; i < d; ++i) row[i + 1] = H * nv[i] - gm1 * V * vel[i];
  row[m - 1] = g * V;
}

template <typename Real>
inline Real sound_speed(const Real* u, int dim, Real gamma) {
  return std::sqrt(gamma * pressure(u, dim, gamma) / u[0]);
}

// Largest characteristic speed |u.n| + c of one state (|a.n| for advection).
template <typename Real>
inline Real side_wave_speed(const Physics& ph, const Real* u, const Real* n) {
  if (ph.eq == Equations::advection) {
    Real an = Real(ph.advect[0]) * n[0];
    if (ph.dim == 2) an += Real(ph.advect[1]) * n[1];
    return std::abs(an);
  }
  if (!(u[0] > Real(0))) throw NumericalError("nonpositive density in wave speed");
  const Real p = pressure(u, ph.dim, Real(ph.gamma));
  if (!(p > Real(0))) throw NumericalError("nonpositive pressure in wave speed");
  Real vn = u[1] * n[0];
  if (ph.dim == 2) vn += u[2] * n[1];
  vn /= u[0];
  return std::abs(vn) + std::sqrt(Real(ph.gamma) * p / u[0]);
}

// Gradient of side_wave_speed w.r.t. the conservative state (m entries).
template <typename Real>
inline void side_wave_speed_grad(const Physics& ph, const Real* u, const Real* n, Real* grad) {
  if (ph.eq == Equations::advection) {
    grad[0] = Real(0);
    return;
  }
  const int d = ph.dim;
  const int m = d + 2;
  const Real g = Real(ph.gamma);
  const Real rho = u[0];
  Real vel[2] = {u[1] / rho, Real(0)};
  Real nv[2] = {n[0], Real(0)};
  if (d == 2) {
    vel[1] = u[2] / rho;
    nv[1] = n[1];
  }
  const Real V = vel[0] * nv[0] + vel[1] * nv[1];
  const Real sgn = V >= Real(0) ? Real(1) : Real(-1);
  const Real ke = Real(0.5) * (vel[0] * vel[0] + vel[1] * vel[1]);
  const Real p = pressure(u, d, g);
  const Real c = std::sqrt(g * p / rho);
  const Real gm1 = g - Real(1);
  // d|V|/du and dc/du with c^2 = g*p/rho:
  //   dc = g/(2c) * (dp*rho - p*drho)/rho^2,  dp = gm1*(dE - vel.dmo + ke*drho)
  grad[0] = sgn * (-V / rho) + g / (Real(2) * c) * (gm1 * ke * rho - p) / (rho * rho);
  for (int i = 0; i < d; ++i)
    grad[i + 1] = sgn * nv[i] / rho + g / (Real(2) * c) * (-gm1 * vel[i]) / rho;
  grad[m - 1] = g / (Real(2) * c) * gm1 / rho;
}

// lambda = max over the two states of (|u.n| + c); symmetric in its pair.
template <typename Real>
inline Real max_wave_speed(const Physics& ph, const Real* um, const Real* up, const Real* n) {
  return std::max(side_wave_speed(ph, um, n), side_wave_speed(ph, up, n));
}

inline double max_wave_speed(const EulerState& a, const EulerState& b, const double* n) {
  Physics ph{Equations::euler, a.dim, a.gamma, {0, 0}};
  return max_wave_speed(ph, a.u.data(), b.u.data(), n);
}

// n.f*(u-, u+): local Lax-Friedrichs {{f}} + (lambda/2)[[u]] with
// [[u]] = u- - u+, HLL with Davis wave-speed bounds, or the central average.
// Evaluation order is fixed so that the exchange (um,up,n) -> (up,um,-n)
// negates the result bitwise; the face loop relies on that for conservation.
template <typename Real>
inline void numerical_flux(FluxScheme scheme, const Physics& ph, const Real* um, const Real* up,
                           const Real* n, Real* out) {
  const int m = ph.n_comp();
  Real fm[4], fp[4];
  normal_flux(ph, um, n, fm);
  normal_flux(ph, up, n, fp);
  if (scheme == FluxScheme::hll && ph.eq == Equations::euler) {
    Real vm = um[1] * n[0], vp = up[1] * n[0];
    if (ph.dim == 2) {
      vm += um[2] * n[1];
      vp += up[2] * n[1];
    }
    vm /= um[0];
    vp /= up[0];
    const Real cm = sound_speed(um, ph.dim, Real(ph.gamma));
    const Real cp = sound_speed(up, ph.dim, Real(ph.gamma));
    if (!std::isfinite(cm) || !std::isfinite(cp))
      throw NumericalError("invalid state in hll flux");
    const Real sl = std::min(vm - cm, vp - cp);
    const Real sr = std::max(vm + cm, vp + cp);
    if (sl >= Real(0)) {
      for (int q = 0; q < m; ++q) out[q] = fm[q];
    } else if (sr <= Real(0)) {
      for (int q = 0; q < m; ++q) out[q] = fp[q];
    } else {
      for (int q = 0; q < m; ++q)
        out[q] = (sr * fm[q] - sl * fp[q] + sl * sr * (up[q] - um[q])) / (sr - sl);
    }
    return;
  }
  if (scheme == FluxScheme::central) {
    for (int q = 0; q < m; ++q) out[q] = Real(0.5) * (fm[q] + fp[q]);
    return;
  }
  // Lax-Friedrichs; also the HLL fallback for scalar advection, where the
  // two Davis bounds coincide and LF reduces to exact upwinding.
  const Real lam = max_wave_speed(ph, um, up, n);
  for (int q = 0; q < m; ++q)
    out[q] = Real(0.5) * (fm[q] + fp[q]) + Real(0.5) * lam * (um[q] - up[q]);
}

inline EulerState numerical_flux(FluxScheme scheme, const EulerState& a, const EulerState& b,
                                 const double* n) {
  Physics ph{Equations::euler, a.dim, a.gamma, {0, 0}};
  EulerState r = a;
  numerical_flux(scheme, ph, a.u.data(), b.u.data(), n, r.u.data());
  return r;
}

// ---------------------------------------------------------------------------
// Boundary conditions

enum class BcKind { inflow, outflow, wall, dirichlet, periodic };

inline BcKind bc_kind_from_string(const std::string& s) {
  if (s == "inflow") return BcKind::inflow;
  if (s == "outflow-free") return BcKind::outflow;
  if (s == "reflective-wall") return BcKind::wall;
  if (s == "exact-dirichlet") return BcKind::dirichlet;
  if (s == "periodic-pair") return BcKind::periodic;
  throw ConfigError("unknown boundary kind '" + s + "'");
}

// (x, t, physics) -> conservative state, for exact-dirichlet boundaries.
using DirichletFn = std::function<void(const double* x, double t, const Physics&, double* u)>;

struct BoundarySpec {
  BcKind kind = BcKind::outflow;
  std::array<double, 4> state{};       // inflow: prescribed conservative state
  std::string function_id;             // exact-dirichlet catalog id
  std::string partner;                 // periodic: tag of the matching side
  std::array<double, 2> translation{}; // periodic: partner = this side + translation
};

using BoundaryConfig = std::map<std::string, BoundarySpec>;

EulerState vortex_exact(const double* x, double t, double gamma);
inline DirichletFn dirichlet_function(const std::string& id);

// Weak ghost state for one boundary face node.  Periodic tags never reach
// here: they are resolved into interior-style pairings by the connectivity.
template <typename Real>
inline void boundary_ghost_state(const BoundarySpec& spec, const Physics& ph, const Real* ui,
                                 const Real* n, const double* x, double t, Real* ghost) {
  const int m = ph.n_comp();
  switch (spec.kind) {
    case BcKind::inflow:
      for (int q = 0; q < m; ++q) ghost[q] = Real(spec.state[q]);
      return;
    case BcKind::outflow:
      for (int q = 0; q < m; ++q) ghost[q] = ui[q];
      return;
    case BcKind::wall: {
      // mirror the normal velocity: mo_g = mo - 2 (mo.n) n
      for (int q = 0; q < m; ++q) ghost[q] = ui[q];
      Real mon = ui[1] * n[0];
      if (ph.dim == 2) mon += ui[2] * n[1];
      ghost[1] = ui[1] - Real(2) * mon * n[0];
      if (ph.dim == 2) ghost[2] = ui[2] - Real(2) * mon * n[1];
      return;
    }
    case BcKind::dirichlet: {
      double xd[2] = {double(x[0]), ph.dim == 2 ? double(x[1]) : 0.0};
      double ud[4];
      dirichlet_function(spec.function_id)(xd, t, ph, ud);
      for (int q = 0; q < m; ++q) ghost[q] = Real(ud[q]);
      return;
    }
    case BcKind::periodic:
      throw ConfigError("periodic boundary reached ghost-state evaluation");
  }
}

inline EulerState boundary_ghost_state(const BoundarySpec& spec, const EulerState& interior,
                                       const double* n, const double* x, double t) {
  Physics ph{Equations::euler, interior.dim, interior.gamma, {0, 0}};
  EulerState g = interior;
  boundary_ghost_state(spec, ph, interior.u.data(), n, x, t, g.u.data());
  return g;
}

// ---------------------------------------------------------------------------
// Exact solutions and the initial-condition catalog

// Isentropic vortex centered at (5 + t, 0), strength beta = 5:
//   u = 1 - beta e^{1-r^2} x2 / (2 pi),  v = beta e^{1-r^2} (x1 - t - 5) / (2 pi),
//   rho = (1 - (gamma-1)/(16 gamma pi^2) beta^2 e^{2(1-r^2)})^{1/(gamma-1)},  p = rho^gamma,
// with r^2 = (x1 - t - 5)^2 + x2^2.  The advected center is used in both
// velocity components so the field is an exact traveling solution.
inline EulerState vortex_exact(const double* x, double t, double gamma) {
  constexpr double beta = 5.0;
  constexpr double pi = 3.14159265358979323846;
  const double xc = x[0] - t - 5.0;
  const double r2 = xc * xc + x[1] * x[1];
  const double e1 = std::exp(1.0 - r2);
  const double q[4] = {
      std::pow(1.0 - (gamma - 1.0) / (16.0 * gamma * pi * pi) * beta * beta * e1 * e1,
               1.0 / (gamma - 1.0)),
      1.0 - beta * e1 * x[1] / (2.0 * pi), beta * e1 * xc / (2.0 * pi), 0.0};
  double prim[4] = {q[0], q[1], q[2], std::pow(q[0], gamma)};
  return make_state_from_primitive(prim, 2, gamma);
}

namespace detail {

// Double Mach reflection setup: a Mach-10 shock at 60 degrees to the wall,
// meeting y = 0 at x = 1/6 at t = 0.  Pre-shock (rho,u,v,p) = (1.4,0,0,1);
// post-shock density 8, pressure 116.5, speed 8.25 normal to the front.
inline void double_mach_state(double x, double y, double t, double* prim) {
  const double xs = 1.0 / 6.0 + (y + 20.0 * t) / std::sqrt(3.0);
  if (x < xs) {
    prim[0] = 8.0;
    prim[1] = 8.25 * std::sqrt(3.0) / 2.0;
    prim[2] = -8.25 * 0.5;
    prim[3] = 116.5;
  } else {
    prim[0] = 1.4;
    prim[1] = 0.0;
    prim[2] = 0.0;
    prim[3] = 1.0;
  }
}

} // namespace detail

inline DirichletFn dirichlet_function(const std::string& id) {
  if (id == "vortex")
    return [](const double* x, double t, const Physics& ph, double* u) {
      EulerState s = vortex_exact(x, t, ph.gamma);
      for (int q = 0; q < 4; ++q) u[q] = s.u[q];
    };
  if (id == "double-mach-top")
    return [](const double* x, double t, const Physics& ph, double* u) {
      double prim[4];
      detail::double_mach_state(x[0], x[1], t, prim);
      primitive_to_conservative(prim, 2, ph.gamma, u);
    };
  throw ConfigError("unknown dirichlet function '" + id + "'");
}

// Named initial conditions, stored as primitives and converted.  1D states
// use a membrane at x = 0.5; quadrant states follow the four-panel layout
// Q1 = [0,.5]x[0,.5], Q2 = [0,.5]x[.5,1], Q3 = [.5,1]x[0,.5], Q4 = [.5,1]x[.5,1].
inline EulerState initial_state(const std::string& problem, const double* x, double gamma) {
  auto riemann1d = [&](const double* L, const double* R) {
    return make_state_from_primitive(x[0] < 0.5 ? L : R, 1, gamma);
  };
  auto quadrants = [&](const double (*uvpr)[4]) {
    // rows ordered Q1..Q4, each (u, v, p, rho)
    const int qx = x[0] < 0.5 ? 0 : 1;
    const int qy = x[1] < 0.5 ? 0 : 1;
    const double* s = uvpr[2 * qx + qy];
    double prim[4] = {s[3], s[0], s[1], s[2]};
    return make_state_from_primitive(prim, 2, gamma);
  };

  if (problem == "sod") {
    const double L[3] = {1.0, 0.0, 1.0}, R[3] = {0.125, 0.0, 0.1};
    return riemann1d(L, R);
  }
  if (problem == "sod-as-printed") {
    const double L[3] = {1.0, 0.0, 1.0}, R[3] = {0.1, 0.0, 0.125};
    return riemann1d(L, R);
  }
  if (problem == "lax") {
    const double L[3] = {0.445, 0.698, 3.528}, R[3] = {0.5, 0.0, 0.571};
    return riemann1d(L, R);
  }
  if (problem.rfind("sod-family-", 0) == 0) {
    // 8 shock tubes: rhoL in {0.7,1.3} (bit 0), rhoR in {0.05,0.2} (bit 1),
    // pL in {0.8,1.2} (bit 2); pR = 0.1, uL = uR = 0.
    int i = -1;
    try {
      i = std::stoi(problem.substr(11));
    } catch (const std::exception&) {
    }
    if (i < 0 || i > 7) throw ConfigError("unknown problem '" + problem + "'");
    const double rhoL[2] = {0.7, 1.3}, rhoR[2] = {0.05, 0.2}, pL[2] = {0.8, 1.2};
    const double L[3] = {rhoL[i & 1], 0.0, pL[(i >> 2) & 1]};
    const double R[3] = {rhoR[(i >> 1) & 1], 0.0, 0.1};
    return riemann1d(L, R);
  }
  if (problem == "vortex") return vortex_exact(x, 0.0, gamma);
  if (problem == "config6") {
    const double q[4][4] = {{-0.75, 0.5, 1.0, 1.0},
                            {0.75, 0.5, 1.0, 2.0},
                            {-0.75, -0.5, 1.0, 3.0},
                            {0.75, -0.5, 1.0, 1.0}};
    return quadrants(q);
  }
  if (problem == "config12") {
    const double q[4][4] = {{0.0, 0.0, 0.4, 0.5313},
                            {0.7276, 0.0, 1.0, 1.0},
                            {0.0, 0.0, 1.0, 0.8},
                            {0.0, 0.7276, 1.0, 1.0}};
    return quadrants(q);
  }
  if (problem == "mach3") {
    const double prim[4] = {gamma, 3.0, 0.0, 1.0};
    return make_state_from_primitive(prim, 2, gamma);
  }
  if (problem == "double-mach") {
    double prim[4];
    detail::double_mach_state(x[0], x[1], 0.0, prim);
    return make_state_from_primitive(prim, 2, gamma);
  }
  throw ConfigError("unknown problem '" + problem + "'");
}

} // namespace dgnet
