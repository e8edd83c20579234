#include "mvldp/simulate.hpp"

#include "mvldp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mvldp {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MVLDP_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void SystemSpec::validate() const {
  auto check_field = [&](const expr::CoeffField& f, int r, int c,
                         const char* name) {
    if (f.empty() || f.rows() != r || f.cols() != c)
      throw std::invalid_argument(std::string("SystemSpec: ") + name +
                                  " has the wrong shape");
    if (f.dims().n != n || f.dims().m != m)
      throw std::invalid_argument(std::string("SystemSpec: ") + name +
                                  " was parsed against other dimensions");
  };
  if (n <= 0 || m <= 0 || d1 <= 0 || d2 <= 0)
    throw std::invalid_argument("SystemSpec: dimensions must be positive");
  check_field(b1, n, 1, "b1");
  check_field(sigma1, n, d1, "sigma1");
  check_field(b2, m, 1, "b2");
  check_field(sigma2, m, d2, "sigma2");
  if (op.dim() != n)
    throw std::invalid_argument("SystemSpec: operator dimension mismatch");
  if (!op.zero_in_interior())
    throw std::invalid_argument(
        "SystemSpec: operator domain must contain 0 in its interior");
  if (static_cast<int>(x0.size()) != n || static_cast<int>(y0.size()) != m)
    throw std::invalid_argument("SystemSpec: initial state shape mismatch");
  if (op.domain_distance(x0) > MonotoneOp::kTol)
    throw std::invalid_argument(
        "SystemSpec: x0 lies outside the domain closure");
}

void ScaleParams::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("ScaleParams: epsilon must lie in (0,1)");
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("ScaleParams: gamma must lie in (0,1)");
}

int SimConfig::steps() const {
  if (!(dt > 0.0) || !(horizon > 0.0))
    throw std::invalid_argument("SimConfig: dt and horizon must be positive");
  const long long k = std::llround(horizon / dt);
  if (k < 1 || std::abs(static_cast<double>(k) * dt - horizon) >
                   1e-9 * std::max(1.0, horizon))
    throw std::invalid_argument("SimConfig: horizon must be a multiple of dt");
  return static_cast<int>(k);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> step_slow(
    const SystemSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
    double dt, double epsilon, const Eigen::VectorXd& dw1) {
  const Eigen::VectorXd b1 = spec.b1.eval_vector(x, y);
  const Eigen::MatrixXd s1 = spec.sigma1.eval_matrix(x, y);
  const Eigen::VectorXd pre =
      x + dt * b1 + std::sqrt(epsilon) * (s1 * dw1);
  Eigen::VectorXd next = spec.op.resolvent(dt, pre);
  return {next, pre - next};
}

SystemStepper::SystemStepper(const SystemSpec& spec, const ScaleParams& scales,
                             double dt)
    : spec_(spec),
      dt_(dt),
      slow_noise_(std::sqrt(scales.epsilon) * std::sqrt(dt)),
      fast_drift_(dt / scales.gamma),
      fast_noise_(std::sqrt(dt / scales.gamma)),
      b1_(spec.n),
      b2_(spec.m),
      pre_(spec.n),
      s1_(spec.n, spec.d1),
      s2_(spec.m, spec.d2) {}

void SystemStepper::step(Eigen::VectorXd& x, Eigen::VectorXd& y,
                         const double* z1, const double* z2,
                         Eigen::VectorXd& dk) {
  const double* xd = x.data();
  const double* yd = y.data();
  spec_.b1.eval(xd, yd, b1_.data());
  spec_.sigma1.eval(xd, yd, s1_.data());
  spec_.b2.eval(xd, yd, b2_.data());
  spec_.sigma2.eval(xd, yd, s2_.data());

  const Eigen::Map<const Eigen::VectorXd> z1v(z1, spec_.d1);
  const Eigen::Map<const Eigen::VectorXd> z2v(z2, spec_.d2);

  pre_ = x + dt_ * b1_;
  pre_.noalias() += slow_noise_ * (s1_ * z1v);
  y += fast_drift_ * b2_;
  y.noalias() += fast_noise_ * (s2_ * z2v);
  spec_.op.resolvent_into(dt_, pre_, x);
  dk = pre_ - x;
}

FrozenRunner::FrozenRunner(const SystemSpec& spec, Eigen::VectorXd x_frozen,
                           double dt)
    : spec_(spec),
      x_(std::move(x_frozen)),
      b2_(spec.m),
      s2_(spec.m, spec.d2),
      dt_(dt),
      sqrt_dt_(std::sqrt(dt)) {}

void FrozenRunner::step(Eigen::VectorXd& y, const double* z2) {
  spec_.b2.eval(x_.data(), y.data(), b2_.data());
  spec_.sigma2.eval(x_.data(), y.data(), s2_.data());
  const Eigen::Map<const Eigen::VectorXd> z2v(z2, spec_.d2);
  y += dt_ * b2_;
  y.noalias() += sqrt_dt_ * (s2_ * z2v);
}

namespace {

void check_fast_guard(const ScaleParams& scales, const SimConfig& cfg) {
  if (cfg.dt > scales.gamma / cfg.fast_stability_factor * (1.0 + 1e-12))
    throw std::invalid_argument(
        "SimConfig: dt violates the fast-equation stability guard dt <= "
        "gamma/" +
        std::to_string(cfg.fast_stability_factor));
}

// Single-path body shared in spirit by the ensemble kernels; kept inline so
// the OpenMP kernel and the serial reference run the exact same sequence of
// floating-point operations.
PathSummary simulate_one_path(const SystemSpec& spec, SystemStepper& stepper,
                              const SimConfig& cfg, int steps, int path) {
  rng::NoiseStream slow(cfg.seed, static_cast<uint32_t>(path), kChannelSlow);
  rng::NoiseStream fast(cfg.seed, static_cast<uint32_t>(path), kChannelFast);
  Eigen::VectorXd x = spec.x0, y = spec.y0, dk(spec.n);
  std::vector<double> z1(spec.d1), z2(spec.d2);
  double sup = x.norm();
  for (int k = 0; k < steps; ++k) {
    slow.step_normals(static_cast<uint64_t>(k), spec.d1, z1.data());
    fast.step_normals(static_cast<uint64_t>(k), spec.d2, z2.data());
    stepper.step(x, y, z1.data(), z2.data(), dk);
    sup = std::max(sup, x.norm());
  }
  return PathSummary{std::move(x), sup};
}

}  // namespace

SlowFastPath run_system(const SystemSpec& spec, const ScaleParams& scales,
                        const SimConfig& cfg, int path_index) {
  spec.validate();
  scales.validate();
  check_fast_guard(scales, cfg);
  const int steps = cfg.steps();

  SlowFastPath out;
  out.dt = cfg.dt;
  out.x.reserve(steps + 1);
  out.y.reserve(steps + 1);
  out.dk.reserve(steps);

  SystemStepper stepper(spec, scales, cfg.dt);
  rng::NoiseStream slow(cfg.seed, static_cast<uint32_t>(path_index),
                        kChannelSlow);
  rng::NoiseStream fast(cfg.seed, static_cast<uint32_t>(path_index),
                        kChannelFast);
  Eigen::VectorXd x = spec.x0, y = spec.y0, dk(spec.n);
  std::vector<double> z1(spec.d1), z2(spec.d2);
  out.x.push_back(x);
  out.y.push_back(y);
  for (int k = 0; k < steps; ++k) {
    slow.step_normals(static_cast<uint64_t>(k), spec.d1, z1.data());
    fast.step_normals(static_cast<uint64_t>(k), spec.d2, z2.data());
    stepper.step(x, y, z1.data(), z2.data(), dk);
    out.x.push_back(x);
    out.y.push_back(y);
    out.dk.push_back(dk);
  }
  return out;
}

std::vector<Eigen::VectorXd> run_frozen(const SystemSpec& spec,
                                        const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y_start,
                                        double dt, int steps, uint64_t seed,
                                        uint32_t stream_id) {
  if (!(dt > 0.0) || steps < 0)
    throw std::invalid_argument("run_frozen: bad dt or step count");
  FrozenRunner runner(spec, x, dt);
  rng::NoiseStream noise(seed, stream_id, kChannelFast);
  std::vector<Eigen::VectorXd> out;
  out.reserve(steps + 1);
  Eigen::VectorXd y = y_start;
  std::vector<double> z2(spec.d2);
  out.push_back(y);
  for (int k = 0; k < steps; ++k) {
    noise.step_normals(static_cast<uint64_t>(k), spec.d2, z2.data());
    runner.step(y, z2.data());
    out.push_back(y);
  }
  return out;
}

std::vector<PathSummary> run_ensemble(const SystemSpec& spec,
                                      const ScaleParams& scales,
                                      const SimConfig& cfg, int threads) {
  spec.validate();
  scales.validate();
  check_fast_guard(scales, cfg);
  const int steps = cfg.steps();
  std::vector<PathSummary> out(cfg.path_count);
  const int nt = resolve_threads(threads);
#ifdef _OPENMP
#pragma omp parallel num_threads(nt)
  {
    SystemStepper stepper(spec, scales, cfg.dt);
#pragma omp for schedule(static)
    for (int p = 0; p < cfg.path_count; ++p)
      out[p] = simulate_one_path(spec, stepper, cfg, steps, p);
  }
#else
  (void)nt;
  SystemStepper stepper(spec, scales, cfg.dt);
  for (int p = 0; p < cfg.path_count; ++p)
    out[p] = simulate_one_path(spec, stepper, cfg, steps, p);
#endif
  return out;
}

std::vector<PathSummary> run_ensemble_serial(const SystemSpec& spec,
                                             const ScaleParams& scales,
                                             const SimConfig& cfg) {
  spec.validate();
  scales.validate();
  check_fast_guard(scales, cfg);
  const int steps = cfg.steps();
  std::vector<PathSummary> out(cfg.path_count);
  SystemStepper stepper(spec, scales, cfg.dt);
  for (int p = 0; p < cfg.path_count; ++p)
    out[p] = simulate_one_path(spec, stepper, cfg, steps, p);
  return out;
}

ViReport verify_discrete_vi(const SystemSpec& spec, const SlowFastPath& path,
                            uint64_t seed, int graph_count) {
  const auto graph = spec.op.graph_sample(seed, graph_count);
  double max_dk = 0.0;
  for (const auto& d : path.dk) max_dk = std::max(max_dk, d.norm());

  ViReport rep;
  for (std::size_t k = 0; k < path.dk.size(); ++k) {
    const Eigen::VectorXd& x1 = path.x[k + 1];
    const Eigen::VectorXd& dk = path.dk[k];
    for (const auto& g : graph) {
      const double v = (x1 - g.x).dot(dk - path.dt * g.y);
      rep.max_violation = std::max(rep.max_violation, -v);
    }
  }
  rep.tol = 1e-8 * (1.0 + max_dk);
  rep.pass = rep.max_violation <= rep.tol;
  return rep;
}

InteriorReport verify_interior_estimate(const SystemSpec& spec,
                                        const SlowFastPath& path,
                                        const Eigen::VectorXd& a) {
  const MonotoneOp& op = spec.op;
  InteriorReport rep;
  switch (op.kind()) {
    case MonotoneOp::Kind::Box:
    case MonotoneOp::Kind::Ball:
      rep.m1 = op.interior_radius(a);
      if (!(rep.m1 > 0.0))
        throw std::invalid_argument(
            "verify_interior_estimate: anchor is not strictly interior");
      break;
    case MonotoneOp::Kind::SubdiffAbs:
      rep.m2 = op.abs_weight();
      break;
    case MonotoneOp::Kind::SubdiffQuadratic:
      rep.m2 = (op.quadratic_q() * a).norm();
      break;
    case MonotoneOp::Kind::Zero:
      break;
  }

  double sum_dk = 0.0, sum_dist = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < path.dk.size(); ++k) {
    const Eigen::VectorXd diff = path.x[k + 1] - a;
    rep.lhs += diff.dot(path.dk[k]);
    sum_dk += path.dk[k].norm();
    sum_dist += diff.norm() * path.dt;
    scale += diff.norm() * path.dk[k].norm();
  }
  const double t = path.dt * static_cast<double>(path.dk.size());
  rep.rhs = rep.m1 * sum_dk - rep.m2 * sum_dist - rep.m3 * t;
  rep.pass = rep.lhs >= rep.rhs - 1e-9 * (1.0 + scale);
  return rep;
}

DissipativityReport verify_dissipativity(const SystemSpec& spec,
                                         const DissipativityConfig& cfg) {
  rng::NoiseStream u(cfg.seed, 0xD155, 0);
  uint64_t du = 0;
  auto box_point = [&](int dim) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i)
      v[i] = cfg.radius * (2.0 * u.uniform(du++) - 1.0);
    return v;
  };

  DissipativityReport rep;
  bool have_beta = false;
  double worst_beta = 0.0, worst_l = 0.0;
  for (int s = 0; s < cfg.sample_count; ++s) {
    const Eigen::VectorXd x1 = box_point(spec.n);
    const Eigen::VectorXd y1 = box_point(spec.m);
    const Eigen::VectorXd y2 = box_point(spec.m);
    // Half the pairs share the slow state so the y-only Lipschitz direction
    // is probed as well.
    const Eigen::VectorXd x2 = (u.uniform(du++) < 0.5) ? x1 : box_point(spec.n);

    const Eigen::VectorXd dy = y1 - y2;
    if (dy.norm() > 1e-10) {
      const Eigen::VectorXd db = spec.b2.eval_vector(x1, y1) -
                                 spec.b2.eval_vector(x1, y2);
      const Eigen::MatrixXd ds = spec.sigma2.eval_matrix(x1, y1) -
                                 spec.sigma2.eval_matrix(x1, y2);
      const double val =
          (2.0 * dy.dot(db) + ds.squaredNorm()) / dy.squaredNorm();
      worst_beta = have_beta ? std::max(worst_beta, val) : val;
      have_beta = true;
    }

    const double dd = (x1 - x2).squaredNorm() + dy.squaredNorm();
    if (dd > 1e-20) {
      const Eigen::VectorXd db = spec.b2.eval_vector(x1, y1) -
                                 spec.b2.eval_vector(x2, y2);
      const Eigen::MatrixXd ds = spec.sigma2.eval_matrix(x1, y1) -
                                 spec.sigma2.eval_matrix(x2, y2);
      worst_l = std::max(worst_l, (db.squaredNorm() + ds.squaredNorm()) / dd);
    }
  }
  rep.beta_hat = -worst_beta;
  rep.l_hat = worst_l;
  rep.alpha_hat = rep.beta_hat - 2.0 * rep.l_hat;
  rep.pass = rep.beta_hat > 2.0 * rep.l_hat;
  return rep;
}

namespace {

// Central-difference machinery for the frozen generator applied to zeta.
struct ZetaProbe {
  const expr::CoeffField& zeta;

  double operator()(const Eigen::VectorXd& y) const {
    double v;
    zeta.eval(nullptr, y.data(), &v);
    return v;
  }
};

double second_diff(const ZetaProbe& z, const Eigen::VectorXd& y, int i,
                   double h) {
  Eigen::VectorXd yp = y, ym = y;
  yp[i] += h;
  ym[i] -= h;
  return (z(yp) - 2.0 * z(y) + z(ym)) / (h * h);
}

}  // namespace

LyapunovReport verify_lyapunov(const SystemSpec& spec,
                               const expr::CoeffField& zeta,
                               const LyapunovConfig& cfg) {
  if (zeta.rows() != 1 || zeta.cols() != 1)
    throw std::invalid_argument("verify_lyapunov: zeta must be scalar");
  if (zeta.depends_on_x())
    throw std::invalid_argument("verify_lyapunov: zeta must depend on y only");
  if (zeta.dims().m != spec.m)
    throw std::invalid_argument("verify_lyapunov: zeta dimension mismatch");
  if (cfg.x_points.empty() || cfg.y_points.empty())
    throw std::invalid_argument("verify_lyapunov: empty evaluation grid");

  const double h = cfg.fd_step;
  ZetaProbe probe{zeta};

  // Pass 1: flag grid points whose second differences are not step-stable;
  // those sit on (or next to) a kink of zeta.
  std::vector<bool> kink(cfg.y_points.size(), false);
  for (std::size_t j = 0; j < cfg.y_points.size(); ++j) {
    const Eigen::VectorXd& y = cfg.y_points[j];
    for (int i = 0; i < spec.m; ++i) {
      const double d2a = second_diff(probe, y, i, h);
      const double d2b = second_diff(probe, y, i, 0.5 * h);
      if (std::abs(d2a - d2b) >
          0.25 * std::max({1.0, std::abs(d2a), std::abs(d2b)})) {
        kink[j] = true;
        break;
      }
    }
  }

  LyapunovReport rep;
  rep.max_violation = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd d1(spec.m);
  for (std::size_t j = 0; j < cfg.y_points.size(); ++j) {
    const Eigen::VectorXd& y = cfg.y_points[j];
    bool excluded = kink[j];
    if (!excluded) {
      for (std::size_t k = 0; k < cfg.y_points.size() && !excluded; ++k)
        if (kink[k] && (y - cfg.y_points[k]).norm() <= cfg.kink_radius)
          excluded = true;
    }
    if (excluded) {
      ++rep.excluded;
      continue;
    }

    const double z0 = probe(y);
    Eigen::MatrixXd d2(spec.m, spec.m);
    for (int i = 0; i < spec.m; ++i) {
      Eigen::VectorXd yp = y, ym = y;
      yp[i] += h;
      ym[i] -= h;
      d1[i] = (probe(yp) - probe(ym)) / (2.0 * h);
      d2(i, i) = (probe(yp) - 2.0 * z0 + probe(ym)) / (h * h);
      for (int l = 0; l < i; ++l) {
        Eigen::VectorXd ypp = y, ypm = y, ymp = y, ymm = y;
        ypp[i] += h; ypp[l] += h;
        ypm[i] += h; ypm[l] -= h;
        ymp[i] -= h; ymp[l] += h;
        ymm[i] -= h; ymm[l] -= h;
        d2(i, l) = d2(l, i) =
            (probe(ypp) - probe(ypm) - probe(ymp) + probe(ymm)) /
            (4.0 * h * h);
      }
    }

    for (const auto& x : cfg.x_points) {
      const Eigen::VectorXd b2 = spec.b2.eval_vector(x, y);
      const Eigen::MatrixXd s2 = spec.sigma2.eval_matrix(x, y);
      const Eigen::MatrixXd a2 = s2 * s2.transpose();
      const double gen = b2.dot(d1) + 0.5 * (a2.array() * d2.array()).sum();
      const double indicator = (y.norm() <= cfg.ball_radius) ? 1.0 : 0.0;
      const double viol = gen + cfg.l1 * z0 - cfg.l2 * indicator;
      if (viol > rep.max_violation) {
        rep.max_violation = viol;
        rep.argmax_y = y;
      }
    }
    ++rep.checked;
  }

  if (rep.checked == 0)
    throw std::runtime_error(
        "verify_lyapunov: every grid point was excluded as non-smooth");
  rep.pass = rep.max_violation <= cfg.tol;
  return rep;
}

}  // namespace mvldp
