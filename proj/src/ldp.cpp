#include "mvldp/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mvldp {

namespace {

void check_opt_cfg(const OptControlConfig& cfg) {
  if (cfg.n_steps < 2) {
    throw std::invalid_argument("OptControlConfig: n_steps must be >= 2");
  }
  if (!(cfg.tol_gap > 0.0)) {
    throw std::invalid_argument("OptControlConfig: tol_gap must be positive");
  }
  if (!(cfg.mu0 > 0.0) || !(cfg.mu_factor > 1.0) || !(cfg.mu_max >= cfg.mu0)) {
    throw std::invalid_argument("OptControlConfig: bad penalty schedule");
  }
  if (cfg.max_inner_iters < 1 || cfg.restarts < 1) {
    throw std::invalid_argument("OptControlConfig: bad iteration budget");
  }
  if (!(cfg.grad_step > 0.0) || !(cfg.value_stab_tol > 0.0)) {
    throw std::invalid_argument("OptControlConfig: bad tolerance");
  }
}

void check_problem(const AveragedCoeffs& avg, const MonotoneOp& a,
                   const Eigen::VectorXd& x0, double t) {
  if (a.dim() != avg.dim()) {
    throw std::invalid_argument("rate: operator dimension mismatch");
  }
  if (x0.size() != avg.dim()) {
    throw std::invalid_argument("rate: x0 dimension mismatch");
  }
  if (!(t > 0.0)) {
    throw std::invalid_argument("rate: horizon must be positive");
  }
  if (a.domain_distance(x0) > MonotoneOp::kTol) {
    throw std::invalid_argument("rate: x0 outside the operator domain");
  }
}

using Controls = std::vector<Eigen::VectorXd>;

double action_of(const Controls& z, double dt) {
  double s = 0.0;
  for (const auto& zk : z) s += zk.squaredNorm();
  return 0.5 * s * dt;
}

// Terminal map of the controlled averaged dynamics; workspace reused across
// the many evaluations the numeric gradients need.
class Integrator {
 public:
  Integrator(const AveragedCoeffs& avg, const MonotoneOp& a,
             Eigen::VectorXd x0, double dt)
      : avg_(avg), a_(a), x0_(std::move(x0)), dt_(dt) {}

  const Eigen::VectorXd& terminal(const Controls& z) {
    x_ = x0_;
    for (const auto& zk : z) {
      pre_ = x_ + (avg_.drift(x_) + avg_.sigma(x_) * zk) * dt_;
      a_.resolvent_into(dt_, pre_, x_);
    }
    return x_;
  }

  double dt() const { return dt_; }

 private:
  const AveragedCoeffs& avg_;
  const MonotoneOp& a_;
  Eigen::VectorXd x0_;
  double dt_;
  Eigen::VectorXd x_, pre_;
};

template <class TermCost>
double objective(Integrator& integ, const Controls& z, TermCost&& tc) {
  return action_of(z, integ.dt()) + tc(integ.terminal(z));
}

struct InnerResult {
  double f = 0.0;
  bool grad_converged = false;
};

// Gradient descent with Armijo backtracking on central-difference gradients.
// The accepted step size carries over between iterations.
template <class TermCost>
InnerResult minimize_inner(Integrator& integ, Controls& z,
                           const OptControlConfig& cfg, TermCost&& tc) {
  InnerResult res;
  res.f = objective(integ, z, tc);
  const int nn = z.empty() ? 0 : static_cast<int>(z.front().size());
  Controls g(z.size(), Eigen::VectorXd::Zero(nn));
  Controls trial = z;
  double alpha = 1.0;
  int stall = 0;
  for (int iter = 0; iter < cfg.max_inner_iters; ++iter) {
    double gnorm2 = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      for (int i = 0; i < nn; ++i) {
        const double save = z[k][i];
        const double h = cfg.grad_step * (1.0 + std::abs(save));
        z[k][i] = save + h;
        const double fp = objective(integ, z, tc);
        z[k][i] = save - h;
        const double fm = objective(integ, z, tc);
        z[k][i] = save;
        const double gi = (fp - fm) / (2.0 * h);
        g[k][i] = gi;
        gnorm2 += gi * gi;
      }
    }
    if (std::sqrt(gnorm2) <= 1e-7 * (1.0 + std::abs(res.f))) {
      res.grad_converged = true;
      break;
    }
    alpha = std::min(alpha * 4.0, 1e3);
    bool accepted = false;
    while (alpha > 1e-14) {
      for (std::size_t k = 0; k < z.size(); ++k) trial[k] = z[k] - alpha * g[k];
      const double ft = objective(integ, trial, tc);
      if (ft <= res.f - 1e-4 * alpha * gnorm2) {
        z.swap(trial);
        if (res.f - ft <= 1e-11 * (1.0 + std::abs(ft))) {
          ++stall;
        } else {
          stall = 0;
        }
        res.f = ft;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || stall >= 3) break;  // descent has flattened out
  }
  return res;
}

// Pseudo-inverse of the symmetric PSD sigma-bar factor.
Eigen::MatrixXd pinv_psd(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (s + s.transpose()));
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double thresh = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] > thresh) inv[i] = 1.0 / ev[i];
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Controls constant_controls(const Eigen::VectorXd& zk, int steps) {
  return Controls(static_cast<std::size_t>(steps), zk);
}

// Starts: rest, the straight-line heuristic, then jittered copies of it.
std::vector<Controls> rate_starts(const AveragedCoeffs& avg,
                                  const Eigen::VectorXd& x0,
                                  const Eigen::VectorXd& x_target, double t,
                                  int steps, const OptControlConfig& cfg) {
  const int n = static_cast<int>(x0.size());
  std::vector<Controls> starts;
  starts.push_back(constant_controls(Eigen::VectorXd::Zero(n), steps));
  if (cfg.restarts >= 2) {
    const Eigen::VectorXd zline =
        pinv_psd(avg.sigma(x0)) * (x_target - x0) / t;
    starts.push_back(constant_controls(zline, steps));
    rng::NoiseStream jitter(90210, 0, 0);
    uint64_t draw = 0;
    for (int r = 2; r < cfg.restarts; ++r) {
      Controls c = starts.back();
      for (auto& zk : c) {
        for (int i = 0; i < n; ++i) zk[i] += 0.5 * jitter.normal(draw++);
      }
      starts.push_back(std::move(c));
    }
  }
  return starts;
}

struct PenaltySolve {
  double value = 0.0;       // action of the final controls
  Controls z;
  double gap = 0.0;
  bool converged = false;
  double mu_final = 0.0;
};

// One penalty continuation from a fixed start.
PenaltySolve continue_from(Integrator& integ, Controls z,
                           const Eigen::VectorXd& x_target,
                           const OptControlConfig& cfg) {
  PenaltySolve out;
  double mu = cfg.mu0;
  double prev_action = std::numeric_limits<double>::quiet_NaN();
  for (;;) {
    auto tc = [&](const Eigen::VectorXd& xt) {
      return 0.5 * mu * (xt - x_target).squaredNorm();
    };
    minimize_inner(integ, z, cfg, tc);
    const double act = action_of(z, integ.dt());
    const double gap = (integ.terminal(z) - x_target).norm();
    const bool stable =
        std::isfinite(prev_action) &&
        std::abs(act - prev_action) <=
            cfg.value_stab_tol * std::max(1.0, std::abs(act));
    out.value = act;
    out.gap = gap;
    out.mu_final = mu;
    if (stable && gap <= cfg.tol_gap) {
      out.converged = true;
      break;
    }
    prev_action = act;
    if (mu >= cfg.mu_max) break;
    mu = std::min(mu * cfg.mu_factor, cfg.mu_max);
  }
  out.z = std::move(z);
  return out;
}

PenaltySolve best_rate_solve(const AveragedCoeffs& avg, const MonotoneOp& a,
                             const Eigen::VectorXd& x0,
                             const Eigen::VectorXd& x_target, double t,
                             int steps, const OptControlConfig& cfg,
                             const std::vector<Controls>& starts,
                             bool* nonunique) {
  Integrator integ(avg, a, x0, t / steps);
  std::vector<PenaltySolve> solves;
  solves.reserve(starts.size());
  for (const auto& s : starts) {
    solves.push_back(continue_from(integ, s, x_target, cfg));
  }
  auto better = [](const PenaltySolve& l, const PenaltySolve& r) {
    if (l.converged != r.converged) return l.converged;
    return l.value < r.value;
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < solves.size(); ++i) {
    if (better(solves[i], solves[best])) best = i;
  }
  if (nonunique) {
    *nonunique = false;
    for (const auto& s : solves) {
      if (!s.converged || !solves[best].converged) continue;
      if (std::abs(s.value - solves[best].value) >
          0.01 * std::max(1e-12, std::abs(solves[best].value))) {
        *nonunique = true;
      }
    }
  }
  return std::move(solves[best]);
}

// Auto dt: gamma/50, nudged down so the horizon is an exact multiple.
double pick_mc_dt(double dt_cfg, double gamma, double t) {
  if (dt_cfg > 0.0) return dt_cfg;
  const double raw = gamma / 50.0;
  const double steps = std::ceil(t / raw - 1e-9);
  return t / steps;
}

Controls doubled(const Controls& z) {
  Controls out;
  out.reserve(2 * z.size());
  for (const auto& zk : z) {
    out.push_back(zk);
    out.push_back(zk);
  }
  return out;
}

ControlGrid to_grid(Controls z, double dt) {
  ControlGrid g;
  g.dt = dt;
  g.z = std::move(z);
  return g;
}

}  // namespace

double action(const ControlGrid& z) {
  if (!(z.dt > 0.0) && !z.z.empty()) {
    throw std::invalid_argument("action: dt must be positive");
  }
  return action_of(z.z, z.dt);
}

ControlledPath integrate_controlled(const AveragedCoeffs& avg,
                                    const MonotoneOp& a,
                                    const Eigen::VectorXd& x0,
                                    const ControlGrid& z) {
  if (a.dim() != avg.dim() || x0.size() != avg.dim()) {
    throw std::invalid_argument("integrate_controlled: dimension mismatch");
  }
  if (z.z.empty() || !(z.dt > 0.0)) {
    throw std::invalid_argument("integrate_controlled: empty control grid");
  }
  ControlledPath out;
  out.x.reserve(z.z.size() + 1);
  out.x.push_back(x0);
  Eigen::VectorXd x = x0, pre, next(x0.size());
  for (const auto& zk : z.z) {
    if (zk.size() != avg.dim()) {
      throw std::invalid_argument("integrate_controlled: control dim mismatch");
    }
    pre = x + (avg.drift(x) + avg.sigma(x) * zk) * z.dt;
    a.resolvent_into(z.dt, pre, next);
    x = next;
    out.x.push_back(x);
  }
  out.terminal = x;
  return out;
}

RateResult rate(const AveragedCoeffs& avg, const MonotoneOp& a,
                const Eigen::VectorXd& x0, const Eigen::VectorXd& x_target,
                double t, const OptControlConfig& cfg) {
  check_opt_cfg(cfg);
  check_problem(avg, a, x0, t);
  if (x_target.size() != avg.dim()) {
    throw std::invalid_argument("rate: x_target dimension mismatch");
  }

  const int n = static_cast<int>(x0.size());
  RateResult out;

  // Degenerate noise screen: with sigma-bar vanishing along the line between
  // the endpoints the dynamics are uncontrollable, so a persistent terminal
  // gap is reported as unreachable rather than ground down by the penalty.
  double sig_scale = 0.0;
  for (double w : {0.0, 0.5, 1.0}) {
    sig_scale = std::max(
        sig_scale, avg.sigma(x0 + w * (x_target - x0)).norm());
  }
  if (sig_scale <= 1e-14) {
    Controls zz = constant_controls(Eigen::VectorXd::Zero(n), cfg.n_steps);
    Integrator integ(avg, a, x0, t / cfg.n_steps);
    const double gap = (integ.terminal(zz) - x_target).norm();
    out.terminal_gap = gap;
    out.optimal_control = to_grid(std::move(zz), t / cfg.n_steps);
    if (gap > cfg.tol_gap) {
      out.value = std::numeric_limits<double>::infinity();
      out.diagnostic = "unreachable";
      return out;
    }
    out.converged = true;  // free dynamics already hit the target
    return out;
  }

  bool nonunique = false;
  PenaltySolve sol = best_rate_solve(
      avg, a, x0, x_target, t, cfg.n_steps, cfg,
      rate_starts(avg, x0, x_target, t, cfg.n_steps, cfg), &nonunique);

  out.value = sol.value;
  out.terminal_gap = sol.gap;
  out.converged = sol.converged;
  out.penalty_final = sol.mu_final;
  out.possible_nonuniqueness = nonunique;

  if (cfg.refine_check) {
    std::vector<Controls> warm{doubled(sol.z)};
    PenaltySolve fine = best_rate_solve(avg, a, x0, x_target, t,
                                        2 * cfg.n_steps, cfg, warm, nullptr);
    out.refinement_delta = std::abs(fine.value - sol.value);
    if (out.refinement_delta >
        0.02 * std::max(std::abs(sol.value), 1e-6)) {
      out.converged = false;
    }
  }
  out.optimal_control = to_grid(std::move(sol.z), t / cfg.n_steps);
  return out;
}

VariationalResult variational_value(const AveragedCoeffs& avg,
                                    const MonotoneOp& a,
                                    const Eigen::VectorXd& x0, double t,
                                    const expr::CoeffField& h,
                                    const OptControlConfig& cfg) {
  check_opt_cfg(cfg);
  check_problem(avg, a, x0, t);
  if (h.rows() != 1 || h.cols() != 1 || h.empty()) {
    throw std::invalid_argument("variational_value: h must be scalar");
  }
  if (h.depends_on_y()) {
    throw std::invalid_argument(
        "variational_value: h must depend on the slow variables only");
  }

  const int n = static_cast<int>(x0.size());
  const Eigen::VectorXd y_dummy = Eigen::VectorXd::Zero(h.dims().m);
  auto tc = [&](const Eigen::VectorXd& xt) {
    return h.eval_scalar(xt, y_dummy);
  };

  // Candidate terminals fan out along the noise directions; each one seeds a
  // constant control pointing at it.
  const Eigen::MatrixXd sig0 = avg.sigma(x0);
  const Eigen::MatrixXd pinv = pinv_psd(sig0);
  std::vector<Controls> starts;
  starts.push_back(constant_controls(Eigen::VectorXd::Zero(n), cfg.n_steps));
  const double spread = std::sqrt(t);
  for (int i = 0; i < n; ++i) {
    for (double w : {-3.0, -2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0, 3.0}) {
      const Eigen::VectorXd xc =
          x0 + sig0 * (w * spread * Eigen::VectorXd::Unit(n, i));
      starts.push_back(constant_controls(pinv * (xc - x0) / t, cfg.n_steps));
    }
  }

  struct Cand {
    double f = 0.0;
    Controls z;
    Eigen::VectorXd xt;
    bool grad_ok = false;
  };
  auto solve_all = [&](Integrator& integ,
                       const std::vector<Controls>& ss) {
    std::vector<Cand> cands;
    cands.reserve(ss.size());
    for (const auto& s : ss) {
      Cand c;
      c.z = s;
      const InnerResult r = minimize_inner(integ, c.z, cfg, tc);
      c.f = r.f;
      c.grad_ok = r.grad_converged;
      c.xt = integ.terminal(c.z);
      cands.push_back(std::move(c));
    }
    return cands;
  };

  Integrator integ(avg, a, x0, t / cfg.n_steps);
  std::vector<Cand> cands = solve_all(integ, starts);
  std::size_t best = 0;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    if (cands[i].f < cands[best].f) best = i;
  }

  VariationalResult out;
  out.value = cands[best].f;
  out.terminal = cands[best].xt;
  out.converged = cands[best].grad_ok;
  for (const auto& c : cands) {
    if (std::abs(c.f - cands[best].f) <=
            1e-3 * (1.0 + std::abs(cands[best].f)) &&
        (c.xt - cands[best].xt).norm() >
            1e-2 * (1.0 + cands[best].xt.norm())) {
      out.possible_nonuniqueness = true;
    }
  }

  if (cfg.refine_check) {
    Integrator fine(avg, a, x0, t / (2 * cfg.n_steps));
    std::vector<Controls> warm{doubled(cands[best].z)};
    std::vector<Cand> fc = solve_all(fine, warm);
    out.refinement_delta = std::abs(fc[0].f - out.value);
    if (out.refinement_delta > 0.02 * std::max(std::abs(out.value), 1e-6)) {
      out.converged = false;
    }
  }
  out.optimal_control = to_grid(std::move(cands[best].z), t / cfg.n_steps);
  return out;
}

Estimate laplace(const SystemSpec& spec, const ScaleParams& scales, double t,
                 const expr::CoeffField& h, const LaplaceConfig& cfg) {
  spec.validate();
  scales.validate();
  if (!(t > 0.0)) throw std::invalid_argument("laplace: t must be positive");
  if (cfg.n_paths < 2) {
    throw std::invalid_argument("laplace: need at least two paths");
  }
  if (h.rows() != 1 || h.cols() != 1 || h.empty() || h.depends_on_y()) {
    throw std::invalid_argument(
        "laplace: h must be a scalar in the slow variables");
  }

  SimConfig sim;
  sim.dt = pick_mc_dt(cfg.dt, scales.gamma, t);
  sim.horizon = t;
  sim.seed = cfg.seed;
  sim.path_count = cfg.n_paths;
  const std::vector<PathSummary> paths =
      run_ensemble(spec, scales, sim, cfg.threads);

  const double eps = scales.epsilon;
  const Eigen::VectorXd y_dummy = Eigen::VectorXd::Zero(h.dims().m);
  const long long mm = static_cast<long long>(paths.size());
  std::vector<double> w(paths.size());
  double wmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < paths.size(); ++i) {
    w[i] = -h.eval_scalar(paths[i].x_terminal, y_dummy) / eps;
    wmax = std::max(wmax, w[i]);
  }
  // Log-sum-exp with the max factored out: every residual weight is <= 1.
  double s1 = 0.0, s2 = 0.0;
  for (double wi : w) {
    const double e = std::exp(wi - wmax);
    s1 += e;
    s2 += e * e;
  }
  const double ess = s1 * s1 / s2;
  if (ess < 2.0) {
    throw std::runtime_error(
        "laplace: effective sample size below 2, the weights have collapsed; "
        "increase n_paths or epsilon");
  }
  const double mean = s1 / static_cast<double>(mm);
  const double var =
      std::max(0.0, (s2 - s1 * s1 / static_cast<double>(mm)) /
                        static_cast<double>(mm - 1));
  Estimate out;
  out.value = -eps * (wmax + std::log(mean));
  out.std_error =
      eps * std::sqrt(var) / (mean * std::sqrt(static_cast<double>(mm)));
  out.n_samples = mm;
  return out;
}

std::vector<TightnessRow> tightness_probe(const SystemSpec& spec,
                                          const ScaleParams& scales, double t,
                                          const std::vector<double>& thresholds,
                                          const LaplaceConfig& cfg) {
  spec.validate();
  scales.validate();
  if (!(t > 0.0)) {
    throw std::invalid_argument("tightness_probe: t must be positive");
  }
  if (thresholds.empty()) {
    throw std::invalid_argument("tightness_probe: no thresholds");
  }
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0) ||
        (i > 0 && !(thresholds[i] > thresholds[i - 1]))) {
      throw std::invalid_argument(
          "tightness_probe: thresholds must be positive and increasing");
    }
  }
  if (cfg.n_paths < 2) {
    throw std::invalid_argument("tightness_probe: need at least two paths");
  }

  SimConfig sim;
  sim.dt = pick_mc_dt(cfg.dt, scales.gamma, t);
  sim.horizon = t;
  sim.seed = cfg.seed;
  sim.path_count = cfg.n_paths;
  const std::vector<PathSummary> paths =
      run_ensemble(spec, scales, sim, cfg.threads);

  const double eps = scales.epsilon;
  const double nd = static_cast<double>(paths.size());
  const double zq = 1.96, z2 = zq * zq;
  std::vector<TightnessRow> rows;
  rows.reserve(thresholds.size());
  for (double m : thresholds) {
    TightnessRow row;
    row.threshold = m;
    for (const auto& p : paths) {
      if (p.sup_norm_x > m) ++row.exceed_count;
    }
    const double p = static_cast<double>(row.exceed_count) / nd;
    row.p_hat = p;
    const double upper =
        (p + z2 / (2.0 * nd) +
         zq * std::sqrt(p * (1.0 - p) / nd + z2 / (4.0 * nd * nd))) /
        (1.0 + z2 / nd);
    row.eps_log_upper = eps * std::log(upper);
    if (row.exceed_count == 0) {
      row.censored = true;
      row.eps_log_p = row.eps_log_upper;  // only an upper bound is available
    } else {
      row.eps_log_p = eps * std::log(p);
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mvldp
