#include "mvldp/hjb.hpp"

#include "mvldp/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvldp {

namespace {

Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

struct Tableau {
  std::vector<double> x, bbar, abar;
};

Tableau tabulate(const AveragedCoeffs& avg, double lo, double dx, int nodes) {
  Tableau tab;
  tab.x.resize(nodes);
  tab.bbar.resize(nodes);
  tab.abar.resize(nodes);
  for (int j = 0; j < nodes; ++j) {
    tab.x[j] = lo + j * dx;
    const Eigen::VectorXd xj = vec1(tab.x[j]);
    tab.bbar[j] = avg.drift(xj)[0];
    const double a = avg.diffusion(xj)(0, 0);
    if (a < -1e-10) {
      throw std::runtime_error("solve_1d: negative averaged diffusion");
    }
    tab.abar[j] = std::max(a, 0.0);
  }
  return tab;
}

double hval(const Tableau& tab, int j, double p) {
  return tab.bbar[j] * p - 0.5 * tab.abar[j] * p * p;
}

void window_of(const MonotoneOp& a, const HjbConfig& cfg, double* lo,
               double* hi) {
  switch (a.kind()) {
    case MonotoneOp::Kind::Zero:
      *lo = cfg.x_min;
      *hi = cfg.x_max;
      break;
    case MonotoneOp::Kind::Box:
      *lo = a.box_lower()[0];
      *hi = a.box_upper()[0];
      break;
    default:
      throw std::invalid_argument(
          "solve_1d: operator must be Zero or a 1D Box");
  }
  if (!(*hi > *lo)) {
    throw std::invalid_argument("solve_1d: empty spatial window");
  }
}

}  // namespace

double hamiltonian(const AveragedCoeffs& avg, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& p) {
  if (x.size() != avg.dim() || p.size() != avg.dim()) {
    throw std::invalid_argument("hamiltonian: dimension mismatch");
  }
  const Eigen::VectorXd b = avg.drift(x);
  const Eigen::MatrixXd a = avg.diffusion(x);
  return b.dot(p) - 0.5 * p.dot(a * p);
}

GridSolution solve_1d(const AveragedCoeffs& avg, const MonotoneOp& a,
                      const expr::CoeffField& h, const HjbConfig& cfg) {
  if (avg.dim() != 1 || a.dim() != 1) {
    throw std::invalid_argument("solve_1d: 1D problems only");
  }
  if (h.rows() != 1 || h.cols() != 1 || h.empty() || h.depends_on_y()) {
    throw std::invalid_argument(
        "solve_1d: h must be a scalar in the slow variable");
  }
  if (!(cfg.dx > 0.0) || !(cfg.t_final > 0.0) ||
      !(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0)) {
    throw std::invalid_argument("solve_1d: bad grid parameters");
  }

  double lo = 0.0, hi = 0.0;
  window_of(a, cfg, &lo, &hi);
  const double span = hi - lo;
  const long long cells = std::llround(span / cfg.dx);
  if (cells < 4 || std::abs(cells * cfg.dx - span) > 1e-9 * std::max(1.0, span)) {
    throw std::invalid_argument("solve_1d: dx must divide the window");
  }
  const int nodes = static_cast<int>(cells) + 1;
  const double dx = cfg.dx;

  const Tableau tab = tabulate(avg, lo, dx, nodes);
  const Eigen::VectorXd y_dummy = Eigen::VectorXd::Zero(h.dims().m);
  std::vector<double> u0(nodes);
  for (int j = 0; j < nodes; ++j) {
    u0[j] = h.eval_scalar(vec1(tab.x[j]), y_dummy);
  }

  double lip = 0.0;
  for (int j = 0; j + 1 < nodes; ++j) {
    lip = std::max(lip, std::abs(u0[j + 1] - u0[j]) / dx);
  }
  const double p_max = cfg.p_max > 0.0 ? cfg.p_max : 1.2 * lip + 0.1;
  double theta = cfg.theta;
  if (theta <= 0.0) {
    theta = 0.0;
    for (int j = 0; j < nodes; ++j) {
      theta = std::max(theta, std::abs(tab.bbar[j]) + tab.abar[j] * p_max);
    }
  }
  const double speed = std::max(theta, 1e-12);

  double dt = cfg.dt;
  long long steps = 0;
  if (dt > 0.0) {
    steps = std::llround(cfg.t_final / dt);
    if (steps < 1 || std::abs(steps * dt - cfg.t_final) >
                         1e-9 * std::max(1.0, cfg.t_final)) {
      throw std::invalid_argument("solve_1d: dt must divide t_final");
    }
    if (dt * (speed + theta / dx) > dx * (1.0 + 1e-12)) {
      throw std::invalid_argument("solve_1d: CFL violation");
    }
  } else {
    const double bound = cfg.cfl_safety * dx / (speed + theta / dx);
    steps = static_cast<long long>(std::ceil(cfg.t_final / bound - 1e-9));
    steps = std::max<long long>(steps, 1);
    dt = cfg.t_final / static_cast<double>(steps);
  }

  GridSolution sol;
  sol.dx = dx;
  sol.dt = dt;
  sol.theta = theta;
  sol.x = tab.x;
  sol.t.resize(steps + 1);
  for (long long i = 0; i <= steps; ++i) sol.t[i] = i * dt;
  sol.u.assign(steps + 1, std::vector<double>(nodes, 0.0));
  sol.u[0] = u0;

  const int nt = resolve_threads(cfg.threads);
  const int last = nodes - 1;
  for (long long i = 0; i < steps; ++i) {
    const std::vector<double>& cur = sol.u[i];
    std::vector<double>& next = sol.u[i + 1];
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(nt) if (nodes > 256)
#endif
    for (int j = 1; j < last; ++j) {
      const double pm = (cur[j] - cur[j - 1]) / dx;
      const double pp = (cur[j + 1] - cur[j]) / dx;
      next[j] = cur[j] +
                dt * (0.5 * (hval(tab, j, pm) + hval(tab, j, pp)) +
                      0.5 * theta * (pp - pm));
    }
    // Interval ends: one-sided inward data only.  A characteristic pointing
    // inward is pure upwind from inside; one pressing outward would need an
    // outward normal contribution, which the reflecting condition replaces
    // by a zero-slope ghost cell.
    {
      const double pin = (cur[1] - cur[0]) / dx;
      const double v = tab.bbar[0] - tab.abar[0] * pin;
      next[0] = v > 0.0 ? cur[0] + dt * hval(tab, 0, pin)
                        : cur[0] + dt * (0.5 * hval(tab, 0, pin) +
                                         0.5 * theta * pin);
      const double qin = (cur[last] - cur[last - 1]) / dx;
      const double w = tab.bbar[last] - tab.abar[last] * qin;
      next[last] = w < 0.0 ? cur[last] + dt * hval(tab, last, qin)
                           : cur[last] + dt * (0.5 * hval(tab, last, qin) -
                                               0.5 * theta * qin);
    }
  }
  (void)nt;
  return sol;
}

HjbResidualReport residual_check(const GridSolution& sol,
                                 const AveragedCoeffs& avg,
                                 const MonotoneOp& a) {
  if (avg.dim() != 1 || a.dim() != 1) {
    throw std::invalid_argument("residual_check: 1D problems only");
  }
  const int frames = static_cast<int>(sol.u.size());
  const int nodes = frames > 0 ? static_cast<int>(sol.u[0].size()) : 0;
  if (frames < 3 || nodes < 3) {
    throw std::invalid_argument("residual_check: solution grid too small");
  }

  Tableau tab = tabulate(avg, sol.x.front(), sol.dx, nodes);
  HjbResidualReport rep;
  const double kink = 10.0 * sol.dx * sol.dx;  // one-sided slopes 10 dx apart
  for (int i = 1; i + 1 < frames; ++i) {
    const std::vector<double>& um = sol.u[i - 1];
    const std::vector<double>& uc = sol.u[i];
    const std::vector<double>& up = sol.u[i + 1];
    for (int j = 1; j + 1 < nodes; ++j) {
      if (std::abs(uc[j + 1] - 2.0 * uc[j] + uc[j - 1]) > kink) {
        ++rep.excluded;
        continue;
      }
      const double ut = (up[j] - um[j]) / (2.0 * sol.dt);
      const double px = (uc[j + 1] - uc[j - 1]) / (2.0 * sol.dx);
      const double r = std::abs(ut - hval(tab, j, px));
      ++rep.checked;
      if (r > rep.max_residual) {
        rep.max_residual = r;
        rep.argmax_t = sol.t[i];
        rep.argmax_x = sol.x[j];
      }
    }
  }
  return rep;
}

}  // namespace mvldp
