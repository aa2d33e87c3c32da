#pragma once

// Training workbench for the DGNet block: dataset generation (DG snapshots
// with stored Runge-Kutta stages), magnitude-scaled data randomization, the
// naive and model-constrained losses with reverse-mode gradients through the
// complete stage pipeline (networks, normalization, limiter, density clamp,
// RK combination), ADAM, and validation-rollout model selection.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dgnet/surrogate.hpp"
#include "dgnet/time_integration.hpp"

namespace dgnet {

enum class TrainMode { naive, model_constrained };

inline TrainMode train_mode_from_string(const std::string& s) {
  if (s == "naive") return TrainMode::naive;
  if (s == "model-constrained") return TrainMode::model_constrained;
  throw ConfigError("unknown training mode '" + s + "'");
}

enum class Precision { single, double_ };

inline Precision precision_from_string(const std::string& s) {
  if (s == "single") return Precision::single;
  if (s == "double") return Precision::double_;
  throw ConfigError("unknown precision '" + s + "'");
}

// ---------------------------------------------------------------------------
// Snapshot data.  Each step record holds u^{i,0} and both stages, so the
// trajectory u^{i,0}, i = 0..n_steps is steps[i].u0 plus the final u2, and
// stage replay from u0 reproduces u1/u2 bitwise in a fixed build.
// ---------------------------------------------------------------------------

template <typename Real>
struct SnapshotDataset {
  std::string problem;
  int dim = 1, N = 1, K = 0, Np = 0, m = 0;
  QuadratureMode quad = QuadratureMode::collocation;
  FluxScheme scheme = FluxScheme::lax_friedrichs;
  double gamma = 1.4;
  Real dt = 0;
  bool limited = false;
  std::vector<StepRecord<Real>> steps;

  int n_steps() const { return int(steps.size()); }
  int n_snapshots() const { return n_steps() + 1; }
  const StateField<Real>& snapshot(int i) const {
    return i < n_steps() ? steps[size_t(i)].u0 : steps.back().u2;
  }
  const StateField<Real>& stage1(int i) const { return steps[size_t(i)].u1; }
  const StateField<Real>& stage2(int i) const { return steps[size_t(i)].u2; }
};

// Runs the DG solver with stored stages.  `t_final` must be an integer
// multiple of `dt`; blow-ups carry the offending step index.
template <typename Real = double>
SnapshotDataset<Real> generate_dataset(const Mesh& mesh, int N, QuadratureMode quad,
                                       const FluxModel& model, const BoundaryConfig& bcs,
                                       const std::string& problem, Real t_final, Real dt,
                                       bool use_limiter) {
  if (!(dt > Real(0)) || !(t_final > Real(0)))
    throw ConfigError("dataset needs positive dt and final time");
  const double ratio = double(t_final) / double(dt);
  const int n_steps = int(std::llround(ratio));
  if (n_steps < 1 || std::abs(ratio - n_steps) > 1e-8 * std::max(1.0, ratio))
    throw ConfigError("final time must be an integer multiple of dt");

  const auto ops = build_element_operators<Real>(mesh, N, quad, &bcs);
  const auto limiter = build_limiter_config(ops, use_limiter);
  auto tangent = [&](const StateField<Real>& u, double t) {
    return dg_tangent(u, ops, model, bcs, t);
  };

  SnapshotDataset<Real> ds;
  ds.problem = problem;
  ds.dim = ops.dim;
  ds.N = N;
  ds.K = ops.K;
  ds.Np = ops.Np;
  ds.m = model.physics.n_comp();
  ds.quad = quad;
  ds.scheme = model.scheme;
  ds.gamma = model.physics.gamma;
  ds.dt = dt;
  ds.limited = use_limiter;
  ds.steps.reserve(size_t(n_steps));

  StateField<Real> u = init_field<Real>(ops, problem, model.physics.gamma);
  for (int i = 0; i < n_steps; ++i) {
    StepRecord<Real> rec;
    try {
      rec = ssp_rk2_step(u, dt, tangent, limiter);
    } catch (const NumericalError& e) {
      throw NumericalError("time step " + std::to_string(i) + ": " + e.what(), e.element, i);
    }
    if (!rec.u2.finite())
      throw NumericalError("time step " + std::to_string(i) + ": non-finite solution", -1, i);
    u = rec.u2;
    ds.steps.push_back(std::move(rec));
  }
  return ds;
}

// One dataset per gamma, identical shapes.
template <typename Real = double>
std::vector<SnapshotDataset<Real>> generate_datasets(const Mesh& mesh, int N,
                                                     QuadratureMode quad, FluxScheme scheme,
                                                     const std::vector<double>& gammas, int dim,
                                                     const BoundaryConfig& bcs,
                                                     const std::string& problem, Real t_final,
                                                     Real dt, bool use_limiter) {
  std::vector<SnapshotDataset<Real>> out;
  out.reserve(gammas.size());
  for (const double g : gammas) {
    const FluxModel model{scheme, Physics{Equations::euler, dim, g, {0.0, 0.0}}};
    out.push_back(
        generate_dataset<Real>(mesh, N, quad, model, bcs, problem, t_final, dt, use_limiter));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Data randomization and the training-time density clamp.
// ---------------------------------------------------------------------------

// v = u + eta (.) u with eta ~ N(0, delta^2 I): noise scaled by the local
// solution magnitude, so zero components stay zero.  delta = 0 is bitwise.
template <typename Real>
StateField<Real> randomize(const StateField<Real>& u, double delta, Rng& rng) {
  if (delta < 0) throw ConfigError("noise level must be nonnegative");
  StateField<Real> v = u;
  if (delta == 0) return v;
  for (Eigen::Index i = 0; i < v.v.size(); ++i)
    v.v.data()[i] *= Real(1) + Real(delta * rng.normal());
  return v;
}

// Clips the density component; everything else passes through.  Applied to
// surrogate stage outputs during training only.
template <typename Real>
StateField<Real> clamp_density(const StateField<Real>& u, Real lo, Real hi) {
  if (!(lo < hi)) throw ConfigError("density bounds must satisfy low < high");
  StateField<Real> v = u;
  for (int k = 0; k < u.K; ++k) v.col(k, 0) = u.col(k, 0).cwiseMax(lo).cwiseMin(hi);
  return v;
}

// Almost-everywhere derivative: cotangent passes through where the density
// was strictly inside the bounds, and is zeroed where the clip was active.
template <typename Real>
StateField<Real> clamp_density_vjp(const StateField<Real>& u, Real lo, Real hi,
                                   const StateField<Real>& cot) {
  StateField<Real> g = cot;
  for (int k = 0; k < u.K; ++k)
    for (int i = 0; i < u.Np; ++i) {
      const Real r = u.v(i, k * u.m);
      if (!(r > lo && r < hi)) g.v(i, k * u.m) = Real(0);
    }
  return g;
}

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

struct TrainConfig {
  TrainMode mode = TrainMode::model_constrained;
  Precision precision = Precision::double_;
  double delta = 0.0;  // relative noise standard deviation
  double alpha = 1.0;  // model-constrained loss weight
  bool include_naive_term = false;  // add L_n to alpha*L_mc (default: mc term alone)
  int window = 1;                   // consecutive snapshots per epoch
  double lr = 1e-3;
  int epochs = 0;
  int cadence = 10;  // validation every `cadence` epochs
  double clamp_lo = 0.1, clamp_hi = 50.0;
  std::uint64_t seed = 0;
  int max_resample = 3;                    // noisy DG-branch retries before skipping
  std::vector<int> loss_components;        // empty = all conservative components
  std::vector<int> validation_components;  // empty = all

  void validate() const {
    if (delta < 0) throw ConfigError("noise level must be nonnegative");
    if (window < 1) throw ConfigError("window length must be at least 1");
    if (cadence < 1) throw ConfigError("validation cadence must be at least 1");
    if (!(lr > 0)) throw ConfigError("learning rate must be positive");
    if (epochs < 0) throw ConfigError("epoch count must be nonnegative");
    if (!(clamp_lo < clamp_hi)) throw ConfigError("density bounds must satisfy low < high");
    if (alpha < 0) throw ConfigError("loss balance must be nonnegative");
    if (max_resample < 0) throw ConfigError("resample count must be nonnegative");
  }
};

// Wires one mesh's machinery into the losses: `ops` carries the norms and the
// surrogate contraction; the DG branch may use a separate (over-integration)
// operator set and falls back to `ops` when unset.
template <typename Real>
struct TrainSetup {
  const DGOperators<Real>* ops = nullptr;
  const DGOperators<Real>* dg_ops = nullptr;
  const LimiterConfig<Real>* limiter = nullptr;
  FluxModel model;
  BoundaryConfig bcs;

  const DGOperators<Real>& sops() const {
    if (!ops) throw ConfigError("training setup is missing operators");
    return *ops;
  }
  const DGOperators<Real>& dops() const { return dg_ops ? *dg_ops : sops(); }
  const LimiterConfig<Real>& lim() const {
    if (!limiter) throw ConfigError("training setup is missing a limiter config");
    return *limiter;
  }
};

struct Window {
  int start = 0;
  int size = 0;
};

namespace detail {

template <typename Real>
void check_batch(const SnapshotDataset<Real>& data, Window w, const TrainSetup<Real>& S) {
  const auto& ops = S.sops();
  if (data.Np != ops.Np || data.K != ops.K || data.m != S.model.physics.n_comp())
    throw ConfigError("dataset shape does not match operators/physics");
  if (w.size < 1) throw ConfigError("empty training window");
  if (w.start < 0 || w.start + w.size > data.n_steps())
    throw ConfigError("training window exceeds the dataset");
}

inline std::vector<int> component_list(const std::vector<int>& sel, int m) {
  if (sel.empty()) {
    std::vector<int> all(static_cast<size_t>(m));
    for (int q = 0; q < m; ++q) all[size_t(q)] = q;
    return all;
  }
  for (const int q : sel)
    if (q < 0 || q >= m) throw ConfigError("component index out of range");
  return sel;
}

// ||e||^2 in L2(Omega) summed over the selected components.
template <typename Real>
Real weighted_sq_norm(const DGOperators<Real>& ops, const StateField<Real>& e,
                      const std::vector<int>& comps) {
  Real acc = 0;
  for (const int q : comps) acc += l2_norm_sq(ops, e, q);
  return acc;
}

// out += scale * W e on the selected components, W = blockdiag(detJ_k M).
template <typename Real>
void add_weighted_residual(const DGOperators<Real>& ops, const StateField<Real>& e,
                           const std::vector<int>& comps, Real scale, StateField<Real>& out) {
  for (int k = 0; k < ops.K; ++k)
    for (const int q : comps)
      out.col(k, q).noalias() += scale * ops.detJ(k) * (ops.M * e.col(k, q)).eval();
}

// Surrogate stage pipeline from input w (clean or randomized), retaining the
// intermediates the reverse sweep needs:
//   z1 = w + dt Psi(w),           s1 = clamp(S(z1)),
//   z2 = (s1 + w + dt Psi(s1))/2, s2 = clamp(S(z2)).
template <typename Real>
struct StagePath {
  StateField<Real> w, z1, l1, s1, z2, l2, s2;
};

template <typename Real>
StagePath<Real> surrogate_stages(const StateField<Real>& w, Real dt,
                                 const SurrogateParams<Real>& params, const TrainSetup<Real>& S,
                                 Real lo, Real hi,
                                 SurrogateMode mode = SurrogateMode::learned) {
  const double t0 = w.t, t1 = w.t + double(dt);
  StagePath<Real> P;
  P.w = w;
  P.z1 = w;
  P.z1.v += dt * dgnet_tangent(w, params, S.sops(), S.model, S.bcs, t0, mode).v;
  P.z1.t = t1;
  P.l1 = apply_limiter(P.z1, S.lim());
  P.l1.t = t1;
  P.s1 = clamp_density(P.l1, lo, hi);
  P.z2 = P.s1;
  P.z2.v = Real(0.5) * (P.s1.v + w.v +
                        dt * dgnet_tangent(P.s1, params, S.sops(), S.model, S.bcs, t1, mode).v);
  P.l2 = apply_limiter(P.z2, S.lim());
  P.l2.t = t1;
  P.s2 = clamp_density(P.l2, lo, hi);
  return P;
}

// Reverse sweep of the pipeline above.  `gs1` is the direct cotangent on s1
// (zero unless the loss reads stage 1), `gs2` the cotangent on s2.  Parameter
// contributions accumulate into `grad`; the return value is d<.>/dw.
template <typename Real>
StateField<Real> surrogate_stages_vjp(const StagePath<Real>& P, Real dt,
                                      const SurrogateParams<Real>& params,
                                      const TrainSetup<Real>& S, Real lo, Real hi,
                                      const StateField<Real>& gs1, const StateField<Real>& gs2,
                                      SurrogateParams<Real>& grad) {
  const double t0 = P.w.t, t1 = P.w.t + double(dt);

  StateField<Real> gl2 = clamp_density_vjp(P.l2, lo, hi, gs2);
  StateField<Real> gz2 = apply_limiter_vjp(P.z2, S.lim(), gl2);

  StateField<Real> gs1_total = gs1;
  gs1_total.v += Real(0.5) * gz2.v;
  StateField<Real> gw = gz2;
  gw.v *= Real(0.5);

  StateField<Real> cot = gz2;
  cot.v *= Real(0.5) * dt;
  gs1_total.v += dgnet_tangent_vjp(P.s1, params, S.sops(), S.model, S.bcs, t1, cot, grad).v;

  StateField<Real> gl1 = clamp_density_vjp(P.l1, lo, hi, gs1_total);
  StateField<Real> gz1 = apply_limiter_vjp(P.z1, S.lim(), gl1);
  gw.v += gz1.v;
  cot = gz1;
  cot.v *= dt;
  gw.v += dgnet_tangent_vjp(P.w, params, S.sops(), S.model, S.bcs, t0, cot, grad).v;
  return gw;
}

// DG branch of the model-constrained loss: SSP-RK2 stages of the randomized
// state under the reference tangent (no density clamp).
template <typename Real>
StepRecord<Real> dg_stages(const StateField<Real>& v, Real dt, const TrainSetup<Real>& S) {
  const auto& ops = S.dops();
  auto tangent = [&](const StateField<Real>& u, double t) {
    return dg_tangent(u, ops, S.model, S.bcs, t);
  };
  return ssp_rk2_step(v, dt, tangent, S.lim());
}

template <typename Real>
void check_gradient_finite(const SurrogateParams<Real>& grad) {
  if (!grad.flux.finite()) throw NumericalError("non-finite gradient in parameter block 'flux'");
  if (grad.vol_enabled && !grad.vol.finite())
    throw NumericalError("non-finite gradient in parameter block 'vol'");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Losses.  loss_naive is the data-only term L_n: surrogate stages from the
// clean snapshots against the stored stages.  loss_mc is the model-constrained
// objective alpha * L_mc (+ L_n when configured): both branches restarted from
// the same randomized state, the DG branch recomputed on the fly.
// ---------------------------------------------------------------------------

template <typename Real>
Real loss_naive(const SnapshotDataset<Real>& data, Window w, const SurrogateParams<Real>& params,
                const TrainSetup<Real>& S, const TrainConfig& cfg,
                SurrogateMode mode = SurrogateMode::learned) {
  detail::check_batch(data, w, S);
  const auto comps = detail::component_list(cfg.loss_components, data.m);
  const Real lo = Real(cfg.clamp_lo), hi = Real(cfg.clamp_hi);
  Real L = 0;
  StateField<Real> e(data.Np, data.K, data.m);
  for (int i = w.start; i < w.start + w.size; ++i) {
    const auto P = detail::surrogate_stages(data.snapshot(i), data.dt, params, S, lo, hi, mode);
    e.v = data.stage1(i).v - P.s1.v;
    L += detail::weighted_sq_norm(S.sops(), e, comps);
    e.v = data.stage2(i).v - P.s2.v;
    L += detail::weighted_sq_norm(S.sops(), e, comps);
  }
  return L;
}

template <typename Real>
Real loss_mc(const SnapshotDataset<Real>& data, Window w, const SurrogateParams<Real>& params,
             const TrainSetup<Real>& S, const TrainConfig& cfg, Rng& rng,
             SurrogateMode mode = SurrogateMode::learned) {
  detail::check_batch(data, w, S);
  const auto comps = detail::component_list(cfg.loss_components, data.m);
  const Real lo = Real(cfg.clamp_lo), hi = Real(cfg.clamp_hi);
  Real L = 0;
  StateField<Real> e(data.Np, data.K, data.m);
  for (int i = w.start; i < w.start + w.size; ++i) {
    // fresh noise per snapshot per call; on a blow-up in either branch under
    // noise, resample a bounded number of times, then skip the snapshot
    for (int attempt = 0;; ++attempt) {
      const StateField<Real> v = randomize(data.snapshot(i), cfg.delta, rng);
      try {
        const StepRecord<Real> dg = detail::dg_stages(v, data.dt, S);
        const auto P = detail::surrogate_stages(v, data.dt, params, S, lo, hi, mode);
        e.v = dg.u1.v - P.s1.v;
        L += detail::weighted_sq_norm(S.sops(), e, comps);
        e.v = dg.u2.v - P.s2.v;
        L += detail::weighted_sq_norm(S.sops(), e, comps);
      } catch (const NumericalError& err) {
        if (cfg.delta == 0)  // deterministic failure: resampling cannot help
          throw NumericalError("snapshot " + std::to_string(i) + ": " + err.what(),
                               err.element, i);
        if (attempt < cfg.max_resample) continue;
      }
      break;
    }
  }
  L *= Real(cfg.alpha);
  if (cfg.include_naive_term) L += loss_naive(data, w, params, S, cfg, mode);
  return L;
}

// ---------------------------------------------------------------------------
// Reverse-mode gradient of the configured loss; returns the loss value.  The
// DG branch is constant with respect to the parameters, so only the surrogate
// stages are swept.  Deterministic for a fixed rng state.
// ---------------------------------------------------------------------------

template <typename Real>
Real compute_gradients(const SnapshotDataset<Real>& data, Window w,
                       const SurrogateParams<Real>& params, const TrainSetup<Real>& S,
                       const TrainConfig& cfg, Rng& rng, SurrogateParams<Real>& grad,
                       SurrogateMode mode = SurrogateMode::learned) {
  detail::check_batch(data, w, S);
  const auto comps = detail::component_list(cfg.loss_components, data.m);
  const Real lo = Real(cfg.clamp_lo), hi = Real(cfg.clamp_hi);
  grad = params.zeros_like();
  Real L = 0;

  StateField<Real> e1(data.Np, data.K, data.m), e2(data.Np, data.K, data.m);
  StateField<Real> gs1(data.Np, data.K, data.m), gs2(data.Np, data.K, data.m);

  auto accumulate = [&](const StateField<Real>& start, const StateField<Real>& target1,
                        const StateField<Real>& target2, Real weight) {
    const auto P = detail::surrogate_stages(start, data.dt, params, S, lo, hi, mode);
    e1.v = target1.v - P.s1.v;
    e2.v = target2.v - P.s2.v;
    L += weight * (detail::weighted_sq_norm(S.sops(), e1, comps) +
                   detail::weighted_sq_norm(S.sops(), e2, comps));
    gs1.v.setZero();
    gs2.v.setZero();
    detail::add_weighted_residual(S.sops(), e1, comps, Real(-2) * weight, gs1);
    detail::add_weighted_residual(S.sops(), e2, comps, Real(-2) * weight, gs2);
    detail::surrogate_stages_vjp(P, data.dt, params, S, lo, hi, gs1, gs2, grad);
  };

  const bool mc = cfg.mode == TrainMode::model_constrained;
  for (int i = w.start; i < w.start + w.size; ++i) {
    if (mc) {
      for (int attempt = 0;; ++attempt) {
        const StateField<Real> v = randomize(data.snapshot(i), cfg.delta, rng);
        try {
          const StepRecord<Real> dg = detail::dg_stages(v, data.dt, S);
          accumulate(v, dg.u1, dg.u2, Real(cfg.alpha));
        } catch (const NumericalError& err) {
          if (cfg.delta == 0)
            throw NumericalError("snapshot " + std::to_string(i) + ": " + err.what(),
                                 err.element, i);
          if (attempt < cfg.max_resample) continue;
        }
        break;
      }
      if (cfg.include_naive_term)
        accumulate(data.snapshot(i), data.stage1(i), data.stage2(i), Real(1));
    } else {
      accumulate(data.snapshot(i), data.stage1(i), data.stage2(i), Real(1));
    }
  }
  detail::check_gradient_finite(grad);
  return L;
}

// ---------------------------------------------------------------------------
// ADAM with bias correction (standard decay rates and epsilon).
// ---------------------------------------------------------------------------

template <typename Real>
struct OptimizerState {
  VecX<Real> m, v;
  long long step = 0;
  Real lr = Real(1e-3), beta1 = Real(0.9), beta2 = Real(0.999), eps = Real(1e-8);
};

template <typename Real>
OptimizerState<Real> make_optimizer(const SurrogateParams<Real>& params, Real lr = Real(1e-3)) {
  OptimizerState<Real> st;
  st.lr = lr;
  st.m = VecX<Real>::Zero(params.n_params());
  st.v = VecX<Real>::Zero(params.n_params());
  return st;
}

template <typename Real>
void adam_step(SurrogateParams<Real>& params, const SurrogateParams<Real>& grad,
               OptimizerState<Real>& st) {
  if (grad.n_params() != params.n_params() || st.m.size() != params.n_params())
    throw ConfigError("optimizer state shape does not match parameters");
  const VecX<Real> g = grad.to_vector();
  VecX<Real> p = params.to_vector();
  ++st.step;
  st.m = st.beta1 * st.m + (Real(1) - st.beta1) * g;
  st.v = (st.beta2 * st.v.array() + (Real(1) - st.beta2) * g.array().square()).matrix();
  const Real c1 = Real(1) - Real(std::pow(double(st.beta1), double(st.step)));
  const Real c2 = Real(1) - Real(std::pow(double(st.beta2), double(st.step)));
  p.array() -= st.lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + st.eps);
  params.from_vector(p);
}

// ---------------------------------------------------------------------------
// Validation rollout and the training loop.
// ---------------------------------------------------------------------------

// Rolls the surrogate from the validation initial condition across the whole
// dataset and accumulates the per-snapshot relative L2 errors, averaged over
// snapshots and the selected components.  Blow-ups return +infinity.
template <typename Real>
double validation_error(const SnapshotDataset<Real>& val, const SurrogateParams<Real>& params,
                        const TrainSetup<Real>& S, const TrainConfig& cfg,
                        SurrogateMode mode = SurrogateMode::learned) {
  detail::check_batch(val, Window{0, val.n_steps()}, S);
  const auto comps = detail::component_list(cfg.validation_components, val.m);
  const Real lo = Real(cfg.clamp_lo), hi = Real(cfg.clamp_hi);
  constexpr double inf = std::numeric_limits<double>::infinity();

  StateField<Real> u = val.snapshot(0);
  StateField<Real> e(val.Np, val.K, val.m);
  double acc = 0;
  for (int i = 0; i < val.n_steps(); ++i) {
    try {
      u = detail::surrogate_stages(u, val.dt, params, S, lo, hi, mode).s2;
    } catch (const NumericalError&) {
      return inf;
    }
    if (!u.finite()) return inf;
    const auto& ref = val.snapshot(i + 1);
    e.v = u.v - ref.v;
    for (const int q : comps) {
      const Real den = l2_norm(S.sops(), ref, q);
      if (!(den > Real(0))) return inf;
      acc += double(l2_norm(S.sops(), e, q)) / double(den);
    }
  }
  return acc / (double(val.n_steps()) * double(comps.size()));
}

struct TrainHistoryRow {
  int epoch = 0;
  double loss = std::numeric_limits<double>::quiet_NaN();
  double val_error = std::numeric_limits<double>::quiet_NaN();  // NaN off-cadence
  double wall_s = 0;
};

template <typename Real>
struct TrainResult {
  SurrogateParams<Real> best;
  double best_error = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<TrainHistoryRow> history;
};

// Per epoch: one uniformly random window of consecutive snapshots, one
// gradient + ADAM step; validation at epoch 0 (the initialization), every
// `cadence` epochs, and at the final epoch; the minimum-error parameters are
// retained.  `validator` overrides the rollout (testing hook).
template <typename Real>
TrainResult<Real> train_loop(const TrainConfig& cfg, const SnapshotDataset<Real>& train,
                             const SnapshotDataset<Real>& val, const TrainSetup<Real>& S,
                             SurrogateParams<Real> params,
                             std::function<double(const SurrogateParams<Real>&, int)> validator =
                                 {}) {
  cfg.validate();
  detail::check_batch(train, Window{0, std::min(cfg.window, train.n_steps())}, S);
  if (cfg.window > train.n_steps())
    throw ConfigError("window length exceeds the dataset step count");

  auto validate = [&](const SurrogateParams<Real>& p, int epoch) {
    return validator ? validator(p, epoch) : validation_error(val, p, S, cfg);
  };

  Rng rng(cfg.seed);
  auto opt = make_optimizer(params, Real(cfg.lr));
  SurrogateParams<Real> grad = params.zeros_like();

  TrainResult<Real> res;
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  res.best = params;
  res.best_error = validate(params, 0);
  res.best_epoch = 0;
  res.history.push_back(
      {0, std::numeric_limits<double>::quiet_NaN(), res.best_error, elapsed()});

  const int n_starts = train.n_steps() - cfg.window + 1;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const Window w{int(rng.uniform_index(std::uint64_t(n_starts))), cfg.window};
    const double L = double(compute_gradients(train, w, params, S, cfg, rng, grad));
    adam_step(params, grad, opt);

    TrainHistoryRow row;
    row.epoch = epoch;
    row.loss = L;
    if (epoch % cfg.cadence == 0 || epoch == cfg.epochs) {
      row.val_error = validate(params, epoch);
      if (row.val_error < res.best_error) {
        res.best = params;
        res.best_error = row.val_error;
        res.best_epoch = epoch;
      }
    }
    row.wall_s = elapsed();
    res.history.push_back(row);
  }
  return res;
}

}  // namespace dgnet
