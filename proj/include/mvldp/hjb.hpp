#ifndef MVLDP_HJB_HPP
#define MVLDP_HJB_HPP

#include "mvldp/averaging.hpp"

#include <vector>

namespace mvldp {

// H(x,p) = <bbar1(x), p> - 1/2 <abar1(x) p, p>, so H(x, 0) = 0.
double hamiltonian(const AveragedCoeffs& avg, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& p);

struct HjbConfig {
  double dx = 1e-2;
  double dt = -1.0;       // < 0: auto from the CFL bound with safety 0.9
  double t_final = 0.5;
  double x_min = -2.0;    // window when the operator is Zero; Box supplies
  double x_max = 2.0;     // its own interval
  double p_max = -1.0;    // < 0: auto 1.2 Lip(h) + 0.1 from the initial grid
  double theta = -1.0;    // < 0: auto max |dH/dp| over the (x, p) box
  double cfl_safety = 0.9;
  int threads = 0;
};

struct GridSolution {
  std::vector<double> x;               // nodes, uniform dx
  std::vector<double> t;               // frame times, uniform dt
  std::vector<std::vector<double>> u;  // u[i][j] at (t[i], x[j])
  double dx = 0.0, dt = 0.0;
  double theta = 0.0;                  // artificial viscosity actually used
};

// Explicit Lax-Friedrichs in time for the 1D limit equation
// du/dt = H(x, du/dx), u(0,.) = h, with reflecting one-sided stencils at the
// interval ends (Box operator supplies the interval, Zero uses the window).
GridSolution solve_1d(const AveragedCoeffs& avg, const MonotoneOp& a,
                      const expr::CoeffField& h, const HjbConfig& cfg = {});

struct HjbResidualReport {
  double max_residual = 0.0;
  long long checked = 0;
  long long excluded = 0;  // kink cells skipped by the second-difference test
  double argmax_t = 0.0;
  double argmax_x = 0.0;
};

// |du/dt - H(x, du/dx)| by central differences at interior grid points,
// skipping cells whose one-sided slopes differ by more than 10 dx.
HjbResidualReport residual_check(const GridSolution& sol,
                                 const AveragedCoeffs& avg,
                                 const MonotoneOp& a);

}  // namespace mvldp

#endif
