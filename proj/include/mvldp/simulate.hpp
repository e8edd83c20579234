#ifndef MVLDP_SIMULATE_HPP
#define MVLDP_SIMULATE_HPP

#include "mvldp/expr.hpp"
#include "mvldp/monotone.hpp"
#include "mvldp/rng.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace mvldp {

// Coupled slow-fast system
//   dX in -A(X)dt + b1(X,Y)dt + sqrt(eps) sigma1(X,Y) dW1
//   dY =  (1/gamma) b2(X,Y)dt + (1/sqrt(gamma)) sigma2(X,Y) dW2
// with A maximal monotone acting on the slow component.
struct SystemSpec {
  int n = 0, m = 0, d1 = 0, d2 = 0;
  expr::CoeffField b1;      // n x 1
  expr::CoeffField sigma1;  // n x d1
  expr::CoeffField b2;      // m x 1
  expr::CoeffField sigma2;  // m x d2
  MonotoneOp op = MonotoneOp::zero(1);
  Eigen::VectorXd x0, y0;

  // Shape consistency, x0 in the domain closure, 0 interior to the domain.
  void validate() const;
};

struct ScaleParams {
  double epsilon = 0.1;
  double gamma = 0.01;
  void validate() const;  // both in (0,1)
};

struct SimConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  uint64_t seed = 1;
  int path_count = 1;
  // Fast-equation stability guard: requires dt <= gamma / this factor.
  double fast_stability_factor = 20.0;

  int steps() const;  // horizon/dt, which must be integral
};

// One realized path; dk[k] is the constraint increment applied between x[k]
// and x[k+1], i.e. dk[k]/dt in A(x[k+1]).
struct SlowFastPath {
  double dt = 0.0;
  std::vector<Eigen::VectorXd> x, y;  // steps+1 entries
  std::vector<Eigen::VectorXd> dk;    // steps entries
};

// Noise channel ids for NoiseStream construction.
inline constexpr uint32_t kChannelSlow = 0;
inline constexpr uint32_t kChannelFast = 1;

// One resolvent step of the slow component given standard-normal increments
// scaled into dW1 already; returns (x_next, dK).
std::pair<Eigen::VectorXd, Eigen::VectorXd> step_slow(
    const SystemSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
    double dt, double epsilon, const Eigen::VectorXd& dw1);

// Workspace-carrying stepper for the coupled system; noise inputs are raw
// standard normals (the stepper applies sqrt(dt) and the scale factors).
class SystemStepper {
 public:
  SystemStepper(const SystemSpec& spec, const ScaleParams& scales, double dt);
  void step(Eigen::VectorXd& x, Eigen::VectorXd& y, const double* z1,
            const double* z2, Eigen::VectorXd& dk);

 private:
  const SystemSpec& spec_;
  double dt_, slow_noise_, fast_drift_, fast_noise_;
  Eigen::VectorXd b1_, b2_, pre_;
  Eigen::MatrixXd s1_, s2_;
};

// Euler stepper for the frozen fast equation dY = b2(x,Y)dt + sigma2(x,Y)dW
// at a pinned slow state x.
class FrozenRunner {
 public:
  FrozenRunner(const SystemSpec& spec, Eigen::VectorXd x_frozen, double dt);
  void step(Eigen::VectorXd& y, const double* z2);
  const Eigen::VectorXd& frozen_x() const { return x_; }

 private:
  const SystemSpec& spec_;
  Eigen::VectorXd x_, b2_;
  Eigen::MatrixXd s2_;
  double dt_, sqrt_dt_;
};

// Full path of the coupled system for one path index.
SlowFastPath run_system(const SystemSpec& spec, const ScaleParams& scales,
                        const SimConfig& cfg, int path_index = 0);

// Frozen-equation path at slow state x (states at every step, y0 included).
std::vector<Eigen::VectorXd> run_frozen(const SystemSpec& spec,
                                        const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y_start,
                                        double dt, int steps, uint64_t seed,
                                        uint32_t stream_id = 0);

// Per-path terminal summary used by the Monte Carlo front ends.
struct PathSummary {
  Eigen::VectorXd x_terminal;
  double sup_norm_x = 0.0;  // running sup of |X| including the start point
};

// OpenMP kernel over paths; results are written into per-path slots, so the
// output is bit-identical for every worker count.
std::vector<PathSummary> run_ensemble(const SystemSpec& spec,
                                      const ScaleParams& scales,
                                      const SimConfig& cfg, int threads = 0);

// Serial reference implementation kept for testing the kernel above.
std::vector<PathSummary> run_ensemble_serial(const SystemSpec& spec,
                                             const ScaleParams& scales,
                                             const SimConfig& cfg);

// --- assumption verifiers -------------------------------------------------

struct ViReport {
  double max_violation = 0.0;  // most negative <x_{k+1}-xs, dk_k - ys dt>, sign flipped
  double tol = 0.0;
  bool pass = false;
};

// Discrete variational inequality against sampled graph pairs.
ViReport verify_discrete_vi(const SystemSpec& spec, const SlowFastPath& path,
                            uint64_t seed = 2024, int graph_count = 1000);

struct InteriorReport {
  double lhs = 0.0;  // sum <x_{k+1} - a, dk_k>
  double rhs = 0.0;  // m1*sum|dk| - m2*sum|x-a|dt - m3*t
  double m1 = 0.0, m2 = 0.0, m3 = 0.0;
  bool pass = false;
};

// Interior estimate at an anchor a; a must be strictly interior for the
// constrained variants.
InteriorReport verify_interior_estimate(const SystemSpec& spec,
                                        const SlowFastPath& path,
                                        const Eigen::VectorXd& a);

struct DissipativityReport {
  double beta_hat = 0.0;   // tightest beta in 2<dy,db2> + |dsig2|^2 <= -beta|dy|^2
  double l_hat = 0.0;      // smallest L in |db2|^2 + |dsig2|^2 <= L(|dx|^2+|dy|^2)
  double alpha_hat = 0.0;  // beta_hat - 2*l_hat
  bool pass = false;       // beta_hat > 2*l_hat
};

struct DissipativityConfig {
  int sample_count = 2000;
  double radius = 2.0;
  uint64_t seed = 7;
};

DissipativityReport verify_dissipativity(const SystemSpec& spec,
                                         const DissipativityConfig& cfg = {});

struct LyapunovReport {
  double max_violation = 0.0;  // max of L zeta + L1 zeta - L2 1_B over checked points
  Eigen::VectorXd argmax_y;
  int checked = 0, excluded = 0;
  bool pass = false;
};

struct LyapunovConfig {
  double l1 = 0.0, l2 = 0.0;
  double ball_radius = 0.0;     // indicator support |y| <= ball_radius
  double fd_step = 1e-4;
  double kink_radius = 1e-3;    // exclusion radius around detected kinks
  double tol = 1e-6;
  std::vector<Eigen::VectorXd> x_points;
  std::vector<Eigen::VectorXd> y_points;
};

// Checks generator(zeta) <= -L1 zeta + L2 1_B pointwise on the grid, applying
// the frozen generator by central differences and skipping neighborhoods of
// detected non-smooth points.
LyapunovReport verify_lyapunov(const SystemSpec& spec,
                               const expr::CoeffField& zeta,
                               const LyapunovConfig& cfg);

}  // namespace mvldp

#endif
