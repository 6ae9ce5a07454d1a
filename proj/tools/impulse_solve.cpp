// impulse-solve: command-line front end for the solvers and the pipeline runner.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "impulse/errors.hpp"
#include "impulse/harness.hpp"

using namespace impulse;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config, preset = "exact", out;
  std::optional<double> theta;
  bool two_d = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON experiment config");
  app->add_option("--preset", c.preset, "parameter preset when no config is given")
      ->check(CLI::IsMember({"exact", "application"}));
  app->add_option("--theta", c.theta, "jump-law theta (application preset)");
  app->add_flag("--2d", c.two_d, "solve on the unit square");
  app->add_option("--out", c.out, "output CSV path");
}

ExperimentConfig base_config(const Common& c) {
  if (!c.config.empty()) {
    ExperimentConfig cfg = load_config(c.config);
    if (c.two_d && !cfg.grid.two_d) throw ConfigError("--2d conflicts with a 1-D config");
    return cfg;
  }
  nlohmann::json j = {{"preset", c.preset}};
  if (c.theta) j["theta"] = *c.theta;
  if (c.two_d) j["mode"] = "2d";
  return config_from_json(j);
}

void set_grid(ExperimentConfig& cfg, std::optional<int> n, std::optional<std::string> L) {
  if (n) cfg.grid.n = *n;
  cfg.grid.L = evaluate_L_rule(L ? *L : (n ? std::string("2n") : std::to_string(cfg.grid.L)), cfg.grid.n);
}

std::string out_path(const Common& c, const ExperimentConfig& cfg, const std::string& name) {
  if (!c.out.empty()) return c.out;
  return (fs::path(default_output_dir(cfg.output_dir)) / name).string();
}

// 1-D defaults to the exact threshold; otherwise run the HJB solve first.
std::vector<double> resolve_thresholds(const ExperimentConfig& cfg, const std::string& file) {
  if (!file.empty()) {
    auto xb = read_thresholds_csv(file);
    if (static_cast<int>(xb.size()) != cfg.grid.rows()) throw GridMismatch("threshold file does not match the grid");
    return xb;
  }
  if (cfg.thresholds == ThresholdSource::File) return resolve_thresholds(cfg, cfg.threshold_file);
  if (!cfg.grid.two_d && cfg.thresholds == ThresholdSource::Exact) return {solve_quintet(cfg.model).x_bar};
  const JumpGrid jg = build_jump_grid(cfg.grid, cfg.model);
  return value_iteration(cfg.grid, jg, cfg.model, cfg.hjb).x_bar;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Impulse-control solvers: closed-form 1-D case, HJB, Fokker-Planck, Monte Carlo"};
  app.require_subcommand(1);

  // exact1d
  Common ce;
  int points = 1000;
  auto* exact = app.add_subcommand("exact1d", "closed-form 1-D threshold, values and atoms");
  add_common(exact, ce);
  exact->add_option("--points", points, "samples on [0,1]")->check(CLI::PositiveNumber);

  // hjb
  Common ch;
  std::optional<int> h_n;
  std::optional<std::string> h_L, h_rho;
  std::optional<double> h_tol;
  std::optional<long> h_iter;
  auto* hjb = app.add_subcommand("hjb", "value iteration for the HJB equation");
  add_common(hjb, ch);
  hjb->add_option("--n", h_n)->check(CLI::PositiveNumber);
  hjb->add_option("--L", h_L, "jump nodes: integer or rule like 2n, n/2");
  hjb->add_option("--rho-preset", h_rho)->check(CLI::IsMember({"sec31", "sec41", "sec42"}));
  hjb->add_option("--tol", h_tol);
  hjb->add_option("--max-iter", h_iter);

  // fp
  Common cf;
  std::optional<int> f_n;
  std::optional<std::string> f_L;
  std::optional<double> f_dt, f_tol;
  std::optional<long> f_steps;
  std::string f_thr;
  auto* fp = app.add_subcommand("fp", "stationary Fokker-Planck density");
  add_common(fp, cf);
  fp->add_option("--n", f_n)->check(CLI::PositiveNumber);
  fp->add_option("--L", f_L);
  fp->add_option("--dt", f_dt);
  fp->add_option("--tol", f_tol);
  fp->add_option("--max-steps", f_steps);
  fp->add_option("--thresholds", f_thr, "threshold CSV from hjb or exact1d");

  // mc
  Common cm;
  std::optional<int> m_n;
  std::optional<long> m_paths;
  std::optional<double> m_dt, m_horizon, m_burn;
  std::optional<std::uint64_t> m_seed;
  std::string m_thr;
  double x0 = 1.0, y0 = 0.5;
  auto* mc = app.add_subcommand("mc", "Monte-Carlo density (or objective) under a threshold policy");
  add_common(mc, cm);
  mc->add_option("--n", m_n, "histogram cells per axis")->check(CLI::PositiveNumber);
  mc->add_option("--paths", m_paths)->check(CLI::PositiveNumber);
  mc->add_option("--dt", m_dt);
  mc->add_option("--horizon", m_horizon);
  mc->add_option("--burn-in", m_burn);
  mc->add_option("--seed", m_seed);
  mc->add_option("--thresholds", m_thr, "threshold CSV from hjb or exact1d");
  auto* objective = mc->add_subcommand("objective", "discounted objective from one initial state");
  objective->fallthrough();
  objective->add_option("--x0", x0)->check(CLI::Range(0.0, 1.0));
  objective->add_option("--y0", y0)->check(CLI::Range(0.0, 1.0));

  // sweep
  Common cs;
  std::vector<int> s_n;
  std::optional<std::string> s_L, s_kind;
  auto* sweep = app.add_subcommand("sweep", "convergence table over n");
  add_common(sweep, cs);
  sweep->add_option("--n", s_n, "resolutions")->delimiter(',')->check(CLI::PositiveNumber);
  sweep->add_option("--L", s_L, "L rule, e.g. 2n");
  sweep->add_option("--kind", s_kind)->check(CLI::IsMember({"hjb", "fp"}));

  // pipeline
  std::string p_config, p_dir;
  auto* pipe = app.add_subcommand("pipeline", "run the configured stages and write a manifest");
  pipe->add_option("--config", p_config)->required();
  pipe->add_option("--out-dir", p_dir, "output directory");

  // compare
  std::string c_a, c_b;
  CompareTolerances c_tol;
  auto* cmp = app.add_subcommand("compare", "compare two density CSVs");
  cmp->add_option("a", c_a)->required();
  cmp->add_option("b", c_b)->required();
  cmp->add_option("--l1", c_tol.l1);
  cmp->add_option("--max-rel", c_tol.max_rel);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1; // usage errors share the solver-error code
  }

  try {
    if (*exact) {
      ExperimentConfig cfg = base_config(ce);
      if (cfg.grid.two_d) throw ConfigError("exact1d needs a 1-D config");
      const Exact1DSolution s = solve_quintet(cfg.model);
      const std::string out = out_path(ce, cfg, "exact1d.csv");
      write_exact_csv(out, s, points);
      write_thresholds_csv(sibling_path(out, "_thresholds"), {s.x_bar}, false);
      std::printf("x_bar %.10f\nPhi0 %.6f\nPhi_plus0 %.6f\nPhi1 %.6f\nq %.6f\nr %.6f\n", s.x_bar, s.Phi0,
                  s.Phi_plus0, s.Phi1, s.q, s.r);
    } else if (*hjb) {
      ExperimentConfig cfg = base_config(ch);
      set_grid(cfg, h_n, h_L);
      if (h_rho) cfg.rho_preset = *h_rho, cfg.rho.reset();
      if (h_tol) cfg.hjb.tol = *h_tol;
      if (h_iter) cfg.hjb.max_iter = *h_iter;
      cfg.finalize();
      const JumpGrid jg = build_jump_grid(cfg.grid, cfg.model);
      const ValueField f = value_iteration(cfg.grid, jg, cfg.model, cfg.hjb);
      const std::string out = out_path(ch, cfg, "hjb.csv");
      write_value_csv(out, f);
      write_thresholds_csv(sibling_path(out, "_thresholds"), f.x_bar, f.two_d);
      std::printf("iterations %ld residual %.3e threshold_type %s x_bar[0] %.6f\n", f.iterations,
                  f.final_residual, f.all_threshold() ? "yes" : "no", f.x_bar[0]);
    } else if (*fp) {
      ExperimentConfig cfg = base_config(cf);
      set_grid(cfg, f_n, f_L);
      if (f_dt) cfg.dt = *f_dt;
      if (f_tol) cfg.fp.tol = *f_tol;
      if (f_steps) cfg.fp.max_steps = *f_steps;
      cfg.finalize();
      const auto xb = resolve_thresholds(cfg, f_thr);
      const JumpGrid jg = build_jump_grid(cfg.grid, cfg.model);
      const FpResult r = solve_stationary(cfg.grid, jg, cfg.model, cell_row_thresholds(xb, cfg.grid.two_d), cfg.fp);
      const std::string out = out_path(cf, cfg, "fp.csv");
      write_density_csv(out, r.field);
      write_history_csv(sibling_path(out, "_mass"), r.history);
      std::printf("steps %ld mass %.15f max_drift %.3e\n", r.steps, r.field.mass(), r.max_mass_drift);
    } else if (*mc) {
      ExperimentConfig cfg = base_config(cm);
      if (m_n) set_grid(cfg, m_n, std::nullopt);
      if (m_paths) cfg.mc.paths = *m_paths;
      if (m_dt) cfg.mc.dt = *m_dt;
      if (m_horizon) cfg.mc.horizon = *m_horizon;
      if (m_burn) cfg.mc.burn_in = *m_burn;
      if (m_seed) cfg.mc.seed = *m_seed;
      cfg.finalize();
      const auto xb = resolve_thresholds(cfg, m_thr);
      const ThresholdPolicy pol = ThresholdPolicy::rows(xb, cfg.grid.two_d);
      if (*objective) {
        const McObjective o = estimate_objective(x0, cfg.grid.two_d ? y0 : 0.0, cfg.model, pol, cfg.mc);
        std::printf("objective %.6f stderr %.6f bias_bound %.3e horizon %.1f paths %ld seed %llu\n", o.mean,
                    o.stderr_, o.bias_bound, o.horizon, o.paths, static_cast<unsigned long long>(cfg.mc.seed));
      } else {
        const McDensity d = estimate_density(cfg.model, pol, cfg.grid.n, cfg.grid.two_d, cfg.mc);
        write_density_csv(out_path(cm, cfg, "mc.csv"), d.field);
        std::printf("samples %ld burn_in %.1f seed %llu\n", d.samples, d.burn_in,
                    static_cast<unsigned long long>(cfg.mc.seed));
      }
    } else if (*sweep) {
      ExperimentConfig cfg = base_config(cs);
      if (!s_n.empty()) cfg.sweep_n = s_n;
      if (s_L) cfg.sweep_L = *s_L;
      if (s_kind) cfg.sweep_kind = *s_kind;
      if (cfg.sweep_n.empty()) throw ConfigError("sweep needs --n or sweep.n in the config");
      cfg.finalize();
      const auto rows = convergence_sweep(cfg);
      write_sweep_csv(out_path(cs, cfg, "sweep_" + cfg.sweep_kind + ".csv"), rows);
      std::printf("%6s %6s %12s %12s %12s %7s %7s %7s %9s\n", "n", "L", "l1", "l2", "linf", "CR1", "CR2", "CRinf",
                  "x_bar");
      int failed = 0;
      for (const auto& r : rows) {
        std::printf("%6d %6d %12.4e %12.4e %12.4e %7.2f %7.2f %7.2f %9.4f %s\n", r.n, r.L, r.err.l1, r.err.l2,
                    r.err.linf, r.cr1, r.cr2, r.crinf, r.threshold, r.status == "ok" ? "" : r.status.c_str());
        failed += r.status != "ok";
      }
      if (failed) return 1;
    } else if (*pipe) {
      ExperimentConfig cfg = load_config(p_config);
      if (!p_dir.empty()) cfg.output_dir = p_dir;
      const PipelineResult r = run_pipeline(cfg);
      std::cout << r.manifest.dump(2) << '\n';
      if (r.compare_failed) return 2;
    } else if (*cmp) {
      const CompareReport r = compare_densities(read_density_csv(c_a), read_density_csv(c_b), c_tol);
      std::printf("max p %.4g %.4g\nmax q %.4g %.4g\nmax r %.4g %.4g\nmass q %.4g %.4g\nmass r %.4g %.4g\n"
                  "l1 interior %.4g q %.4g r %.4g\n%s\n",
                  r.max_p[0], r.max_p[1], r.max_q[0], r.max_q[1], r.max_r[0], r.max_r[1], r.mass_q[0], r.mass_q[1],
                  r.mass_r[0], r.mass_r[1], r.l1_interior, r.l1_q, r.l1_r, r.pass ? "PASS" : "FAIL");
      if (!r.pass) return 2;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "impulse-solve: %s\n", e.what());
    return 1;
  }
  return 0;
}
