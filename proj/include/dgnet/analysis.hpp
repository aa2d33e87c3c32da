#pragma once

// Post-processing and diagnostics: relative L2 error series, least-squares
// convergence rates, the computable one-step error indicator, normalized
// wave-speed profiles of a trained flux network, input-density histograms of
// the normalized face triples, and the pressure coefficient field.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dgnet/training.hpp"

namespace dgnet {

// ---------------------------------------------------------------------------
// Relative L2 error between two snapshot sequences.
// ---------------------------------------------------------------------------

template <typename Real>
struct ErrorSeries {
  std::vector<int> components;
  MatX<Real> per_component;  // n_steps x n_components
  std::vector<Real> mean;    // per step, averaged over the components

  Real average() const {
    Real acc = 0;
    for (const Real v : mean) acc += v;
    return mean.empty() ? Real(0) : acc / Real(mean.size());
  }
};

template <typename Real>
ErrorSeries<Real> relative_l2(const std::vector<StateField<Real>>& pred,
                              const std::vector<StateField<Real>>& ref,
                              const DGOperators<Real>& ops,
                              const std::vector<int>& components = {}) {
  if (pred.empty() || pred.size() != ref.size())
    throw ConfigError("error series needs equally long, nonempty sequences");
  const int m = pred[0].m;
  const auto comps = detail::component_list(components, m);
  ErrorSeries<Real> s;
  s.components = comps;
  s.per_component.resize(Eigen::Index(pred.size()), Eigen::Index(comps.size()));
  s.mean.resize(pred.size());

  StateField<Real> e(ops.Np, ops.K, m);
  for (size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].Np != ops.Np || pred[i].K != ops.K || pred[i].m != m ||
        ref[i].Np != ops.Np || ref[i].K != ops.K || ref[i].m != m)
      throw ConfigError("error series shape mismatch");
    e.v = pred[i].v - ref[i].v;
    Real acc = 0;
    for (size_t c = 0; c < comps.size(); ++c) {
      const Real den = l2_norm(ops, ref[i], comps[c]);
      if (!(den > Real(0)))
        throw NumericalError("zero reference norm in component " + std::to_string(comps[c]));
      const Real rel = l2_norm(ops, e, comps[c]) / den;
      s.per_component(Eigen::Index(i), Eigen::Index(c)) = rel;
      acc += rel;
    }
    s.mean[i] = acc / Real(comps.size());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Convergence rate: least-squares slope of log(error) against log(h).
// ---------------------------------------------------------------------------

template <typename Real>
Real convergence_rate(const std::vector<Real>& h, const std::vector<Real>& errors) {
  if (h.size() != errors.size() || h.size() < 2)
    throw ConfigError("rate estimation needs at least two matched mesh levels");
  const int n = int(h.size());
  Real xb = 0, yb = 0;
  std::vector<Real> x(h.size()), y(h.size());
  for (int i = 0; i < n; ++i) {
    if (!(h[size_t(i)] > Real(0)) || !(errors[size_t(i)] > Real(0)))
      throw ConfigError("rate estimation needs positive mesh sizes and errors");
    x[size_t(i)] = std::log(h[size_t(i)]);
    y[size_t(i)] = std::log(errors[size_t(i)]);
    xb += x[size_t(i)];
    yb += y[size_t(i)];
  }
  xb /= n;
  yb /= n;
  Real num = 0, den = 0;
  for (int i = 0; i < n; ++i) {
    num += (x[size_t(i)] - xb) * (y[size_t(i)] - yb);
    den += (x[size_t(i)] - xb) * (x[size_t(i)] - xb);
  }
  return num / den;
}

// Convenience form for uniformly refined studies: h_i = ratio^{-i}.
template <typename Real>
Real convergence_rate(const std::vector<Real>& errors, Real ratio = Real(2)) {
  if (!(ratio > Real(1))) throw ConfigError("refinement ratio must exceed 1");
  std::vector<Real> h(errors.size());
  for (size_t i = 0; i < errors.size(); ++i) h[i] = std::pow(ratio, -Real(i));
  return convergence_rate(h, errors);
}

// ---------------------------------------------------------------------------
// One-step error indicator f^{i+1} = ||F2(u~^i) - Psi2(u~^i)||_{L2(Omega)}:
// both two-stage maps recomputed from each trajectory state, norm over all
// conservative components.  A blow-up in either branch truncates the series.
// ---------------------------------------------------------------------------

template <typename Real>
struct IndicatorSeries {
  std::vector<Real> f;
  bool truncated = false;
};

template <typename Real>
IndicatorSeries<Real> error_indicator(const std::vector<StateField<Real>>& traj, Real dt,
                                      const SurrogateParams<Real>& params,
                                      const TrainSetup<Real>& S,
                                      SurrogateMode mode = SurrogateMode::learned) {
  if (traj.size() < 2) throw ConfigError("the indicator needs at least one trajectory step");
  constexpr Real inf = std::numeric_limits<Real>::infinity();
  const std::vector<int> comps = detail::component_list({}, S.model.physics.n_comp());
  IndicatorSeries<Real> out;
  out.f.reserve(traj.size() - 1);
  StateField<Real> e = traj[0];
  for (size_t i = 0; i + 1 < traj.size(); ++i) {
    try {
      const StepRecord<Real> dg = detail::dg_stages(traj[i], dt, S);
      // deployment map: limiter yes, training-time density clamp no
      const auto P = detail::surrogate_stages(traj[i], dt, params, S, -inf, inf, mode);
      e.v = dg.u2.v - P.s2.v;
      if (!e.finite()) throw NumericalError("non-finite stage difference");
      out.f.push_back(std::sqrt(detail::weighted_sq_norm(S.sops(), e, comps)));
    } catch (const NumericalError&) {
      out.truncated = true;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalized local linearized wave speed of a flux network, swept over
// synthetic normalized inputs.  One face of the input cube per plane: the
// pinned component is +1 (planes 1..n_in) or -1 (planes n_in+1..2*n_in), the
// free components run over cell centers of a uniform grid on [-1,1].  With
// n_in = 3 this is the six-plane construction; n_in = 2 yields four edges.
// lambda = (Psi(x) - sum of average entries) / jump entry; cells whose jump
// magnitude falls below the mask tolerance hold NaN instead of a quotient.
// ---------------------------------------------------------------------------

template <typename Real>
struct WaveSpeedPlane {
  int axis = 0;    // pinned input index
  Real value = 1;  // pinned value, +1 or -1
  MatX<Real> lam;  // res x res grids for n_in = 3, res x 1 for n_in = 2
  int masked = 0;
};

template <typename Real, typename FluxFn>
std::vector<WaveSpeedPlane<Real>> wave_speed_profile(FluxFn&& flux, int n_inputs, int res,
                                                     Real mask_tol = Real(1e-6)) {
  if (n_inputs != 2 && n_inputs != 3)
    throw ConfigError("wave-speed profiles support 2 or 3 network inputs");
  if (res < 2) throw ConfigError("wave-speed grids need at least 2 cells per axis");
  const int d = n_inputs - 1;  // jump entry index
  const Real nan = std::numeric_limits<Real>::quiet_NaN();
  auto center = [&](int i) { return Real(-1) + (Real(i) + Real(0.5)) * Real(2) / Real(res); };

  std::vector<WaveSpeedPlane<Real>> planes;
  VecX<Real> xin(n_inputs);
  for (const Real value : {Real(1), Real(-1)})
    for (int axis = 0; axis < n_inputs; ++axis) {
      WaveSpeedPlane<Real> pl;
      pl.axis = axis;
      pl.value = value;
      int free1 = -1, free2 = -1;
      for (int l = 0; l < n_inputs; ++l) {
        if (l == axis) continue;
        (free1 < 0 ? free1 : free2) = l;
      }
      const int cols = n_inputs == 3 ? res : 1;
      pl.lam.resize(res, cols);
      for (int i = 0; i < res; ++i)
        for (int j = 0; j < cols; ++j) {
          xin(axis) = value;
          xin(free1) = center(i);
          if (free2 >= 0) xin(free2) = center(j);
          const Real jump = xin(d);
          if (std::abs(jump) < mask_tol) {
            pl.lam(i, j) = nan;
            ++pl.masked;
            continue;
          }
          Real avg_sum = 0;
          for (int l = 0; l < d; ++l) avg_sum += xin(l);
          pl.lam(i, j) = (flux(xin) - avg_sum) / jump;
        }
      planes.push_back(std::move(pl));
    }
  return planes;
}

template <typename Real>
std::vector<WaveSpeedPlane<Real>> wave_speed_profile(const SurrogateParams<Real>& params,
                                                     int res, Real mask_tol = Real(1e-6)) {
  return wave_speed_profile<Real>(
      [&](const VecX<Real>& x) { return mlp_forward(params.flux, x)(0); }, params.dim + 1, res,
      mask_tol);
}

// ---------------------------------------------------------------------------
// Input-density histogram of the normalized face triples a dataset feeds the
// flux network.  Triples are classified by the component attaining the scale
// (the entry of magnitude 1); the remaining components are binned on a
// uniform grid over [-1,1]^(n_in - 1).  Counts are normalized by the global
// maximum.  delta > 0 streams fresh noise realizations, one pass per epoch.
// ---------------------------------------------------------------------------

struct DensityHistogram {
  int res = 200;
  std::vector<MatX<double>> sets;       // one grid per input component
  std::vector<long long> raw_counts;    // samples landing in each set
  long long floored = 0;                // scale floor active: no unit entry
  long long total = 0;                  // all samples seen (set counts + floored)
  double max_count = 0;                 // global normalization constant

  long long occupied_cells() const {
    long long n = 0;
    for (const auto& g : sets)
      for (Eigen::Index i = 0; i < g.size(); ++i) n += g.data()[i] > 0 ? 1 : 0;
    return n;
  }
};

template <typename Real>
DensityHistogram input_density_histogram(const SnapshotDataset<Real>& data,
                                         const DGOperators<Real>& ops, const FluxModel& model,
                                         const BoundaryConfig& bcs, double delta, int n_epochs,
                                         Rng& rng, int res = 200) {
  if (res < 1) throw ConfigError("histogram resolution must be positive");
  if (n_epochs < 1) throw ConfigError("histogram needs at least one pass");
  if (data.Np != ops.Np || data.K != ops.K || data.m != model.physics.n_comp())
    throw ConfigError("dataset shape does not match operators/physics");
  const Physics& ph = model.physics;
  const int d = ph.dim, m = ph.n_comp();

  DensityHistogram hist;
  hist.res = res;
  const int cols = d == 2 ? res : 1;
  hist.sets.assign(size_t(d + 1), MatX<double>::Zero(res, cols));
  hist.raw_counts.assign(size_t(d + 1), 0);
  auto bin = [&](Real v) {
    const int idx = int((double(v) + 1.0) / 2.0 * res);
    return std::min(std::max(idx, 0), res - 1);
  };

  MatX<Real> um(ops.Nfp, m), up(ops.Nfp, m);
  Real a[4] = {}, b[4] = {}, f1m[4] = {}, f2m[4] = {}, f1p[4] = {}, f2p[4] = {}, avg[2] = {};
  for (int epoch = 0; epoch < n_epochs; ++epoch)
    for (int s = 0; s < data.n_snapshots(); ++s) {
      const StateField<Real> v = randomize(data.snapshot(s), delta, rng);
      for (int k = 0; k < ops.K; ++k)
        for (int fc = 0; fc < ops.Nfaces; ++fc) {
          const int kf = ops.face_index(k, fc);
          const Real n[2] = {ops.normal(kf, 0), d == 2 ? ops.normal(kf, 1) : Real(0)};
          detail::gather_face_states(v, ops, ph, bcs, v.t, k, fc, um, up);
          for (int i = 0; i < ops.Nfp; ++i) {
            for (int q = 0; q < m; ++q) {
              a[q] = um(i, q);
              b[q] = up(i, q);
            }
            physical_flux(ph, a, f1m, f2m);
            physical_flux(ph, b, f1p, f2p);
            for (int q = 0; q < m; ++q) {
              avg[0] = n[0] * Real(0.5) * (f1m[q] + f1p[q]);
              if (d == 2) avg[1] = n[1] * Real(0.5) * (f2m[q] + f2p[q]);
              const auto tri = normalize_face_triple(avg, d, a[q] - b[q]);
              ++hist.total;
              if (tri.argmax < 0) {
                ++hist.floored;
                continue;
              }
              ++hist.raw_counts[size_t(tri.argmax)];
              int rem[2] = {0, 0}, nr = 0;
              for (int l = 0; l <= d; ++l)
                if (l != tri.argmax) rem[nr++] = l;
              auto& grid = hist.sets[size_t(tri.argmax)];
              grid(bin(tri.vals[rem[0]]), d == 2 ? bin(tri.vals[rem[1]]) : 0) += 1.0;
            }
          }
        }
    }

  for (const auto& g : hist.sets) hist.max_count = std::max(hist.max_count, g.maxCoeff());
  if (hist.max_count > 0)
    for (auto& g : hist.sets) g /= hist.max_count;
  return hist;
}

// ---------------------------------------------------------------------------
// Pressure coefficient field Cp = (p - p0) / (rho0 (u0^2 + v0^2) / 2).
// ---------------------------------------------------------------------------

struct FreeStream {
  double rho = 1.0, u = 0.0, v = 0.0, p = 1.0;
};

template <typename Real>
MatX<Real> pressure_coefficient(const StateField<Real>& u, const Physics& ph,
                                const FreeStream& fs) {
  if (ph.eq != Equations::euler)
    throw ConfigError("the pressure coefficient needs the Euler equations");
  const double q_dyn = 0.5 * fs.rho * (fs.u * fs.u + fs.v * fs.v);
  if (!(q_dyn > 0.0)) throw ConfigError("free stream must have nonzero dynamic pressure");
  MatX<Real> cp(u.Np, u.K);
  Real uloc[4] = {};
  for (int k = 0; k < u.K; ++k)
    for (int i = 0; i < u.Np; ++i) {
      for (int q = 0; q < u.m; ++q) uloc[q] = u.v(i, k * u.m + q);
      cp(i, k) = (pressure(uloc, ph.dim, Real(ph.gamma)) - Real(fs.p)) / Real(q_dyn);
    }
  return cp;
}

}  // namespace dgnet
