// Wall-clock comparison of the OpenMP path ensemble against the serial
// reference, on the bundled scenario.
#include "mvldp/config.hpp"
#include "mvldp/parallel.hpp"
#include "mvldp/simulate.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>

namespace {

template <typename F>
double seconds(F&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ensemble kernel benchmark"};
  int paths = 2000;
  int threads = 0;
  int repeats = 3;
  app.add_option("--paths", paths, "ensemble size");
  app.add_option("--threads", threads, "worker threads (0 = resolve)");
  app.add_option("--repeats", repeats, "timing repetitions, best is reported");
  CLI11_PARSE(app, argc, argv);

  const mvldp::RunConfig cfg =
      mvldp::config_from_json(mvldp::builtin_scenario_json("example5"));
  mvldp::SimConfig sim = cfg.sim;
  sim.path_count = paths;
  const int workers = mvldp::resolve_threads(threads);
  const long long steps = sim.steps();

  // Warm-up run also provides the reference output for the equality check.
  const auto reference =
      mvldp::run_ensemble_serial(cfg.system, cfg.scales, sim);

  double serial = 1e300, parallel = 1e300;
  std::vector<mvldp::PathSummary> out;
  for (int r = 0; r < repeats; ++r) {
    serial = std::min(serial, seconds([&] {
      out = mvldp::run_ensemble_serial(cfg.system, cfg.scales, sim);
    }));
    parallel = std::min(parallel, seconds([&] {
      out = mvldp::run_ensemble(cfg.system, cfg.scales, sim, workers);
    }));
  }
  bool identical = out.size() == reference.size();
  for (std::size_t i = 0; identical && i < out.size(); ++i)
    identical = (out[i].x_terminal.array() == reference[i].x_terminal.array())
                    .all() &&
                out[i].sup_norm_x == reference[i].sup_norm_x;

  const double total_steps = static_cast<double>(paths) * steps;
  std::printf("paths=%d steps/path=%lld threads=%d\n", paths, steps, workers);
  std::printf("serial:   %.3fs  (%.0f ns/step)\n", serial,
              1e9 * serial / total_steps);
  std::printf("parallel: %.3fs  (%.0f ns/step)  speedup %.2fx\n", parallel,
              1e9 * parallel / total_steps, serial / parallel);
  std::printf("parallel output matches serial reference: %s\n",
              identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
