// Command-line front end: config ingestion, task dispatch, CSV/JSON output.
#include "mvldp/config.hpp"
#include "mvldp/parallel.hpp"
#include "mvldp/validation.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace {

using mvldp::RunConfig;
using nlohmann::json;

struct Opts {
  std::string config_path;
  std::string scenario;
  std::string out_dir = ".";
  long long seed = -1;  // < 0 means "leave the config's seed alone"
  int threads = 0;
  std::vector<std::string> overrides;
};

// Output sink for one run; collects file names for the manifest.
class OutDir {
 public:
  explicit OutDir(const std::string& dir) : dir_(dir) {
    std::filesystem::create_directories(dir_);
  }

  FILE* open(const std::string& name) {
    FILE* f = std::fopen((dir_ + "/" + name).c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write " + dir_ + "/" + name);
    files_.push_back(name);
    return f;
  }

  void write_json(const std::string& name, const json& doc) {
    FILE* f = open(name);
    const std::string text = doc.dump(2);
    std::fwrite(text.data(), 1, text.size(), f);
    std::fputc('\n', f);
    std::fclose(f);
  }

  void manifest(const std::string& command, const json& config_doc,
                uint64_t seed, int threads) {
    json m;
    m["command"] = command;
    m["config_digest"] = mvldp::config_digest(config_doc);
    m["seed"] = seed;
    m["threads"] = threads;
    m["version"] = mvldp::kVersion;
    m["outputs"] = files_;
    write_json("manifest.json", m);
  }

 private:
  std::string dir_;
  std::vector<std::string> files_;
};

void put(FILE* f, double v) { std::fprintf(f, "%.17g", v); }

void put_vec(FILE* f, const Eigen::VectorXd& v) {
  for (int i = 0; i < v.size(); ++i) {
    std::fputc(',', f);
    put(f, v[i]);
  }
}

void header_block(FILE* f, const char* stem, int count, bool lead_comma) {
  for (int i = 0; i < count; ++i)
    std::fprintf(f, "%s%s%d", (lead_comma || i > 0) ? "," : "", stem, i);
}

json load_document(const Opts& opts, bool default_scenario) {
  json doc;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in)
      throw mvldp::ConfigError("cannot open config file: " + opts.config_path);
    doc = json::parse(in, nullptr, false);
    if (doc.is_discarded())
      throw mvldp::ConfigError("config is not well-formed JSON: " +
                               opts.config_path);
  } else if (!opts.scenario.empty()) {
    doc = mvldp::builtin_scenario_json(opts.scenario);
  } else if (default_scenario) {
    doc = mvldp::builtin_scenario_json("example5");
  } else {
    throw mvldp::ConfigError("need --config PATH or --scenario NAME");
  }
  for (const auto& ov : opts.overrides) mvldp::apply_override(doc, ov);
  if (opts.seed >= 0) {
    if (!doc.contains("sim")) doc["sim"] = json::object();
    doc["sim"]["seed"] = static_cast<uint64_t>(opts.seed);
  }
  return doc;
}

int run_simulate(const RunConfig& cfg, const json& doc, const Opts& opts,
                 int threads) {
  if (!cfg.has_scales)
    throw mvldp::ConfigError("schema error at /scales: missing field");
  OutDir out(opts.out_dir);

  const mvldp::SlowFastPath path =
      run_system(cfg.system, cfg.scales, cfg.sim, 0);
  FILE* f = out.open("path.csv");
  std::fprintf(f, "t");
  header_block(f, "x", cfg.system.n, true);
  header_block(f, "y", cfg.system.m, true);
  header_block(f, "dk", cfg.system.n, true);
  std::fputc('\n', f);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(cfg.system.n);
  for (std::size_t k = 0; k < path.x.size(); ++k) {
    put(f, static_cast<double>(k) * path.dt);
    put_vec(f, path.x[k]);
    put_vec(f, path.y[k]);
    put_vec(f, k == 0 ? zero : path.dk[k - 1]);
    std::fputc('\n', f);
  }
  std::fclose(f);

  const auto summaries =
      run_ensemble(cfg.system, cfg.scales, cfg.sim, threads);
  f = out.open("summary.csv");
  std::fprintf(f, "path");
  header_block(f, "x_terminal", cfg.system.n, true);
  std::fprintf(f, ",sup_norm_x\n");
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    std::fprintf(f, "%zu", i);
    put_vec(f, summaries[i].x_terminal);
    std::fputc(',', f);
    put(f, summaries[i].sup_norm_x);
    std::fputc('\n', f);
  }
  std::fclose(f);

  out.manifest("simulate", doc, cfg.sim.seed, threads);
  return 0;
}

int run_average(const RunConfig& cfg, const json& doc, const Opts& opts,
                int threads) {
  OutDir out(opts.out_dir);
  const int n = cfg.system.n;
  const std::vector<Eigen::VectorXd> nodes =
      cfg.average.x_nodes.empty()
          ? std::vector<Eigen::VectorXd>{cfg.system.x0}
          : cfg.average.x_nodes;
  const mvldp::AveragedCoeffs avg =
      mvldp::AveragedCoeffs::build(cfg.system, cfg.ergodic, nodes);

  FILE* f = out.open("average.csv");
  header_block(f, "x", n, false);
  header_block(f, "bbar", n, true);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) std::fprintf(f, ",abar%d%d", r, c);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) std::fprintf(f, ",sigbar%d%d", r, c);
  header_block(f, "bbar_stderr", n, true);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) std::fprintf(f, ",abar_stderr%d%d", r, c);
  std::fputc('\n', f);
  for (const auto& x : nodes) {
    const Eigen::VectorXd bbar = avg.drift(x);
    const Eigen::MatrixXd abar = avg.diffusion(x);
    const Eigen::MatrixXd sigbar = avg.sigma(x);
    Eigen::VectorXd bse = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd ase = Eigen::MatrixXd::Zero(n, n);
    if (!avg.exact()) {
      bse = avg.drift_estimate(x).std_error;
      ase = avg.diffusion_estimate(x).std_error;
    }
    for (int i = 0; i < n; ++i) {
      if (i) std::fputc(',', f);
      put(f, x[i]);
    }
    put_vec(f, bbar);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        std::fputc(',', f);
        put(f, abar(r, c));
      }
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        std::fputc(',', f);
        put(f, sigbar(r, c));
      }
    put_vec(f, bse);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        std::fputc(',', f);
        put(f, ase(r, c));
      }
    std::fputc('\n', f);
  }
  std::fclose(f);

  out.manifest("average", doc, cfg.ergodic.seed, threads);
  return 0;
}

int run_rate(const RunConfig& cfg, const json& doc, const Opts& opts,
             int threads) {
  if (!cfg.rate.present)
    throw mvldp::ConfigError("schema error at /rate: missing field");
  OutDir out(opts.out_dir);
  const mvldp::AveragedCoeffs avg = mvldp::AveragedCoeffs::build(
      cfg.system, cfg.ergodic, cfg.average.x_nodes);
  const mvldp::RateResult r = mvldp::rate(avg, cfg.system.op, cfg.system.x0,
                                          cfg.rate.x_target, cfg.rate.t,
                                          cfg.rate.opt);
  json res;
  res["value"] = r.value;  // +inf serializes as null
  res["terminal_gap"] = r.terminal_gap;
  res["converged"] = r.converged;
  res["penalty_final"] = r.penalty_final;
  res["refinement_delta"] = r.refinement_delta;
  res["possible_nonuniqueness"] = r.possible_nonuniqueness;
  res["diagnostic"] = r.diagnostic;
  res["dt"] = r.optimal_control.dt;
  json control = json::array();
  for (const auto& z : r.optimal_control.z) {
    json row = json::array();
    for (int i = 0; i < z.size(); ++i) row.push_back(z[i]);
    control.push_back(row);
  }
  res["control"] = control;
  out.write_json("rate.json", res);
  out.manifest("rate", doc, cfg.ergodic.seed, threads);
  return 0;
}

int run_laplace(const RunConfig& cfg, const json& doc, const Opts& opts,
                int threads) {
  if (!cfg.laplace.present)
    throw mvldp::ConfigError("schema error at /laplace: missing field");
  OutDir out(opts.out_dir);
  mvldp::LaplaceConfig mc = cfg.laplace.mc;
  mc.threads = threads;
  FILE* f = out.open("laplace.csv");
  std::fprintf(f, "epsilon,gamma,value,stderr,n_paths\n");
  for (const mvldp::ScaleParams& s : cfg.scale_list()) {
    const mvldp::Estimate u =
        mvldp::laplace(cfg.system, s, cfg.laplace.t, cfg.laplace.h_field, mc);
    put(f, s.epsilon);
    std::fputc(',', f);
    put(f, s.gamma);
    std::fputc(',', f);
    put(f, u.value);
    std::fputc(',', f);
    put(f, u.std_error);
    std::fprintf(f, ",%lld\n", u.n_samples);
  }
  std::fclose(f);
  out.manifest("laplace", doc, mc.seed, threads);
  return 0;
}

int run_hjb(const RunConfig& cfg, const json& doc, const Opts& opts,
            int threads) {
  if (!cfg.hjb.present)
    throw mvldp::ConfigError("schema error at /hjb: missing field");
  OutDir out(opts.out_dir);
  const mvldp::AveragedCoeffs avg = mvldp::AveragedCoeffs::build(
      cfg.system, cfg.ergodic, cfg.average.x_nodes);
  mvldp::HjbConfig grid = cfg.hjb.grid;
  grid.threads = threads;
  const mvldp::GridSolution sol =
      mvldp::solve_1d(avg, cfg.system.op, cfg.hjb.h_field, grid);

  // Every node, thinned to at most ~100 time frames; the final frame always
  // makes the cut.
  const std::size_t frames = sol.u.size();
  const std::size_t stride = std::max<std::size_t>(1, (frames - 1) / 100);
  std::vector<std::size_t> picks;
  for (std::size_t k = 0; k < frames; k += stride) picks.push_back(k);
  if (picks.back() != frames - 1) picks.push_back(frames - 1);
  FILE* f = out.open("hjb.csv");
  std::fprintf(f, "t,x,u\n");
  for (const std::size_t frame : picks)
    for (std::size_t j = 0; j < sol.x.size(); ++j) {
      put(f, sol.t[frame]);
      std::fputc(',', f);
      put(f, sol.x[j]);
      std::fputc(',', f);
      put(f, sol.u[frame][j]);
      std::fputc('\n', f);
    }
  std::fclose(f);
  out.manifest("hjb", doc, cfg.ergodic.seed, threads);
  return 0;
}

int run_check(const RunConfig& cfg, const json& doc, const Opts& opts,
              int threads) {
  OutDir out(opts.out_dir);
  const mvldp::DissipativityReport diss =
      mvldp::verify_dissipativity(cfg.system, cfg.check.dissipativity);
  json res;
  res["dissipativity"] = {{"beta_hat", diss.beta_hat},
                          {"l_hat", diss.l_hat},
                          {"alpha_hat", diss.alpha_hat},
                          {"pass", diss.pass}};
  bool ok = diss.pass;
  if (!cfg.check.zeta.empty()) {
    mvldp::LyapunovConfig lcfg = cfg.check.lyapunov;
    lcfg.x_points = {cfg.system.x0};
    if (cfg.system.m != 1)
      throw mvldp::ConfigError(
          "schema error at /check/zeta: grid check requires m = 1");
    for (int i = 0; i < 41; ++i)
      lcfg.y_points.push_back(Eigen::VectorXd::Constant(
          1, cfg.system.y0[0] - 3.0 + 6.0 * i / 40.0));
    const mvldp::LyapunovReport lr =
        mvldp::verify_lyapunov(cfg.system, cfg.check.zeta_field, lcfg);
    res["lyapunov"] = {{"max_violation", lr.max_violation},
                       {"checked", lr.checked},
                       {"excluded", lr.excluded},
                       {"pass", lr.pass}};
    ok = ok && lr.pass;
  }
  res["pass"] = ok;
  out.write_json("check.json", res);
  out.manifest("check", doc, cfg.check.dissipativity.seed, threads);
  return ok ? 0 : 2;
}

int run_validate(const json& doc, const Opts& opts, int threads) {
  OutDir out(opts.out_dir);
  const mvldp::GoldenReport report = mvldp::run_golden_suite(threads);
  json arr = json::array();
  for (const auto& c : report.criteria) {
    std::printf("criterion %d (%s): %s  [%.1fs]  %s\n", c.id, c.name.c_str(),
                c.pass ? "PASS" : "FAIL", c.seconds, c.details.c_str());
    arr.push_back({{"id", c.id},
                   {"name", c.name},
                   {"pass", c.pass},
                   {"seconds", c.seconds},
                   {"details", c.details}});
  }
  json res;
  res["criteria"] = arr;
  res["all_pass"] = report.all_pass;
  out.write_json("validate.json", res);
  out.manifest("validate", doc, 0, threads);
  std::printf("%s\n", report.all_pass ? "all criteria pass"
                                      : "criteria failures present");
  return report.all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slow-fast constrained SDE toolkit"};
  app.require_subcommand(1);

  Opts opts;
  int exit_code = 0;
  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--scenario", opts.scenario,
                    "built-in scenario name (example5)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "replace the simulation seed");
    cmd->add_option("--threads", opts.threads,
                    "worker threads (0: MVLDP_THREADS, then all cores)");
    cmd->add_option("--override", opts.overrides,
                    "dotted.path=value config override")
        ->take_all();
  };

  const auto dispatch = [&](const char* name, auto runner,
                            bool default_scenario, const char* blurb) {
    CLI::App* cmd = app.add_subcommand(name, blurb);
    add_common(cmd);
    cmd->callback([&, runner, default_scenario, name] {
      const json doc = load_document(opts, default_scenario);
      const RunConfig cfg = mvldp::config_from_json(doc);
      const int threads = mvldp::resolve_threads(opts.threads);
      (void)name;
      exit_code = runner(cfg, doc, opts, threads);
    });
  };

  dispatch("simulate", run_simulate, true,
           "integrate coupled paths; writes path.csv and summary.csv");
  dispatch("average", run_average, true,
           "averaged coefficients at the configured nodes; writes average.csv");
  dispatch("rate", run_rate, true,
           "action minimization toward the configured target; writes rate.json");
  dispatch("laplace", run_laplace, true,
           "prelimit Laplace functional over the scale list; writes laplace.csv");
  dispatch("hjb", run_hjb, true,
           "limit equation on a grid; writes hjb.csv");
  dispatch("check", run_check, true,
           "assumption probes (dissipativity, Lyapunov); writes check.json");

  CLI::App* validate = app.add_subcommand(
      "validate", "golden acceptance suite; writes validate.json");
  add_common(validate);
  validate->callback([&] {
    const json doc = load_document(opts, true);
    mvldp::config_from_json(doc);  // surface config errors before the suite
    exit_code = run_validate(doc, opts, mvldp::resolve_threads(opts.threads));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return exit_code;
}
