#ifndef MVLDP_LDP_HPP
#define MVLDP_LDP_HPP

#include "mvldp/averaging.hpp"

#include <string>
#include <vector>

namespace mvldp {

// Piecewise-constant control on N equal subintervals of [0, t].
struct ControlGrid {
  double dt = 0.0;
  std::vector<Eigen::VectorXd> z;

  int size() const { return static_cast<int>(z.size()); }
};

// 1/2 sum |z_k|^2 dt, exact for piecewise-constant controls.
double action(const ControlGrid& z);

struct ControlledPath {
  Eigen::VectorXd terminal;
  std::vector<Eigen::VectorXd> x;  // N+1 states, x[0] = x0
};

// Resolvent-splitting Euler of the controlled averaged dynamics
//   X_{k+1} = J_dt(X_k + (bbar1(X_k) + sigbar1(X_k) z_k) dt).
ControlledPath integrate_controlled(const AveragedCoeffs& avg,
                                    const MonotoneOp& a,
                                    const Eigen::VectorXd& x0,
                                    const ControlGrid& z);

struct OptControlConfig {
  int n_steps = 32;
  double tol_gap = 1e-3;
  double mu0 = 1.0;         // penalty continuation start
  double mu_factor = 10.0;
  double mu_max = 1e6;
  int max_inner_iters = 400;
  double grad_step = 1e-5;  // central-difference scale, times 1+|z_k|
  int restarts = 2;         // z=0, straight-line, then perturbed copies
  double value_stab_tol = 1e-4;
  // Re-solve once with 2N steps; convergence additionally requires the value
  // to move by < 2%.
  bool refine_check = true;
};

struct RateResult {
  double value = 0.0;
  ControlGrid optimal_control;
  double terminal_gap = 0.0;
  bool converged = false;
  double penalty_final = 0.0;
  double refinement_delta = 0.0;
  bool possible_nonuniqueness = false;
  std::string diagnostic;  // empty, or e.g. "unreachable"
};

// Rate function I(x_target; x0, t) by penalty continuation over the terminal
// constraint, warm-started gradient descent with backtracking inside.
RateResult rate(const AveragedCoeffs& avg, const MonotoneOp& a,
                const Eigen::VectorXd& x0, const Eigen::VectorXd& x_target,
                double t, const OptControlConfig& cfg = {});

struct VariationalResult {
  double value = 0.0;
  ControlGrid optimal_control;
  Eigen::VectorXd terminal;
  bool converged = false;
  double refinement_delta = 0.0;
  bool possible_nonuniqueness = false;
};

// Variational value inf_z { action(z) + h(X^z(t)) } with multi-start over
// candidate terminal points.
VariationalResult variational_value(const AveragedCoeffs& avg,
                                    const MonotoneOp& a,
                                    const Eigen::VectorXd& x0, double t,
                                    const expr::CoeffField& h,
                                    const OptControlConfig& cfg = {});

struct LaplaceConfig {
  int n_paths = 20000;
  double dt = -1.0;  // < 0 selects gamma/50
  uint64_t seed = 321;
  int threads = 0;
};

// Prelimit Laplace functional -eps log E exp(-h(X_t)/eps), log-sum-exp with
// the max weight factored; stderr by the delta method.
Estimate laplace(const SystemSpec& spec, const ScaleParams& scales, double t,
                 const expr::CoeffField& h, const LaplaceConfig& cfg = {});

struct TightnessRow {
  double threshold = 0.0;
  double p_hat = 0.0;
  double eps_log_p = 0.0;      // upper bound when censored
  double eps_log_upper = 0.0;  // Wilson 95% upper bound
  long long exceed_count = 0;
  bool censored = false;
};

// eps log P(sup_{s<=t} |X_s| > M) over increasing thresholds M.
std::vector<TightnessRow> tightness_probe(const SystemSpec& spec,
                                          const ScaleParams& scales, double t,
                                          const std::vector<double>& thresholds,
                                          const LaplaceConfig& cfg = {});

}  // namespace mvldp

#endif
