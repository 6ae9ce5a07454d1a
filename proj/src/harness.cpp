#include "impulse/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "impulse/errors.hpp"

namespace impulse {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

void read_model(const json& j, ModelParams& m) {
  take(j, "delta", m.delta);
  take(j, "Lambda", m.Lambda);
  take(j, "lambda", m.lambda);
  take(j, "c", m.c);
  take(j, "d", m.d);
  take(j, "xi", m.xi);
  take(j, "G", m.G);
  take(j, "z_lo", m.z_lo);
  take(j, "z_hi", m.z_hi);
  if (j.contains("source")) {
    const json& s = j.at("source");
    check_keys(s, {"kind", "S0", "table"}, "source");
    const std::string kind = s.value("kind", std::string("linear"));
    if (kind == "linear") m.source.kind = SourceKind::Linear;
    else if (kind == "hinge") m.source.kind = SourceKind::Hinge;
    else if (kind == "table") m.source.kind = SourceKind::Table;
    else throw ConfigError("source.kind must be linear, hinge or table");
    take(s, "S0", m.source.S0);
    m.source.table.clear();
    if (s.contains("table"))
      for (const auto& row : s.at("table")) m.source.table.emplace_back(row.at(0).get<double>(), row.at(1).get<double>());
  }
  if (j.contains("levy")) {
    const json& l = j.at("levy");
    check_keys(l, {"kind", "theta"}, "levy");
    const std::string kind = l.value("kind", std::string("uniform"));
    if (kind == "uniform") m.levy.kind = LevyKind::Uniform;
    else if (kind == "truncexp") m.levy.kind = LevyKind::TruncExp;
    else throw ConfigError("levy.kind must be uniform or truncexp");
    take(l, "theta", m.levy.theta);
  }
}

const char* source_name(SourceKind k) {
  return k == SourceKind::Linear ? "linear" : k == SourceKind::Hinge ? "hinge" : "table";
}

double now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::ofstream open_out(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  return os;
}

// Trapezoid weight of vertex i on an n-interval axis.
double trap(int i, int n) { return (i == 0 || i == n) ? 0.5 / n : 1.0 / n; }

// Coarse field vs the finest one, sampled at the coarse vertices.
ErrorNorms hjb_self_error(const ValueField& c, const ValueField& f) {
  if (f.n % c.n != 0 || c.two_d != f.two_d) throw GridMismatch("finest grid is not a refinement");
  const int k = f.n / c.n;
  std::vector<double> a, b, w;
  for (int j = 0; j < c.rows(); ++j)
    for (int i = 0; i <= c.n; ++i) {
      a.push_back(c.at(i, j));
      b.push_back(f.at(i * k, c.two_d ? j * k : 0));
      w.push_back(trap(i, c.n) * (c.two_d ? trap(j, c.n) : 1.0));
    }
  return error_norms(a, b, w);
}

// Coarse cell values vs block averages of the finest field.
ErrorNorms fp_self_error(const DensityField& c, const DensityField& f) {
  if (f.n % c.n != 0 || c.two_d != f.two_d) throw GridMismatch("finest grid is not a refinement");
  const int k = f.n / c.n;
  const int ky = c.two_d ? k : 1;
  std::vector<double> a, b, w;
  const double wc = 1.0 / c.n * (c.two_d ? 1.0 / c.n : 1.0);
  for (int j = 0; j < c.cell_rows(); ++j)
    for (int i = 0; i < c.n; ++i) {
      double s = 0;
      for (int jj = 0; jj < ky; ++jj)
        for (int ii = 0; ii < k; ++ii) s += f.at(i * k + ii, j * ky + jj);
      a.push_back(c.at(i, j));
      b.push_back(s / (k * ky));
      w.push_back(wc);
    }
  return error_norms(a, b, w);
}

} // namespace

// ---------------------------------------------------------------- config

void ExperimentConfig::finalize() {
  if (physical) {
    physical->validate();
  }
  if (!grid.two_d) {
    model.G = 0.0;
    model.source = SourceSpec{};
  }
  model.validate();
  grid = grid_at(grid.n, grid.L);
  grid.validate();
  for (const auto& s : pipeline)
    if (s != "exact1d" && s != "hjb" && s != "fp" && s != "mc" && s != "compare")
      throw ConfigError("unknown pipeline stage: " + s);
  for (int n : sweep_n) evaluate_L_rule(sweep_L, n);
  if (sweep_kind != "hjb" && sweep_kind != "fp") throw ConfigError("sweep.kind must be hjb or fp");
  if (thresholds == ThresholdSource::File && threshold_file.empty())
    throw ConfigError("threshold file source needs a path");
  if (thresholds == ThresholdSource::Exact && grid.two_d)
    throw ConfigError("exact thresholds exist only in 1-D");
}

GridSpec ExperimentConfig::grid_at(int n, int L) const {
  GridSpec g = grid;
  g.n = n;
  g.L = L;
  if (rho) g.rho = *rho;
  else g.rho = rho_preset_value(n);
  g.dt = dt ? *dt : (grid.two_d ? 1.0 : 2.0) / n;
  return g;
}

double ExperimentConfig::rho_preset_value(int n) const {
  return impulse::rho_preset(rho_preset.empty() ? (grid.two_d ? "sec42" : "sec41") : rho_preset, n);
}

int evaluate_L_rule(const std::string& rule, int n) {
  int L = 0;
  if (rule.empty()) throw ConfigError("empty L rule");
  if (rule.back() == 'n' || rule.find("n/") != std::string::npos) {
    const auto pos = rule.find('n');
    const std::string pre = rule.substr(0, pos), post = rule.substr(pos + 1);
    double mult = pre.empty() ? 1.0 : std::stod(pre);
    if (!post.empty()) {
      if (post[0] != '/') throw ConfigError("bad L rule: " + rule);
      mult /= std::stod(post.substr(1));
    }
    L = static_cast<int>(std::floor(mult * n + 1e-9));
  } else {
    std::size_t used = 0;
    L = std::stoi(rule, &used);
    if (used != rule.size()) throw ConfigError("bad L rule: " + rule);
  }
  if (L < 1) throw ConfigError("L rule '" + rule + "' gives L < 1 at n = " + std::to_string(n));
  return L;
}

std::string default_output_dir(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("IMPULSE_OUT_DIR"); env && *env) return env;
  return "out";
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j, {"preset", "theta", "model", "physical", "mode", "grid", "pipeline", "sweep", "output_dir",
                 "thresholds", "hjb", "fp", "mc", "compare", "delta", "Lambda", "lambda", "c", "d", "xi",
                 "G", "source", "levy", "z_lo", "z_hi"},
             "config");
  ExperimentConfig c;
  const std::string preset = j.value("preset", std::string("exact"));
  if (preset == "exact") c.model = exact_case_params();
  else if (preset == "application") c.model = application_params(j.value("theta", 50.0));
  else throw ConfigError("preset must be exact or application");
  c.grid.two_d = preset == "application";

  read_model(j, c.model);
  if (j.contains("model")) read_model(j.at("model"), c.model);
  if (j.contains("physical")) {
    const json& p = j.at("physical");
    PhysicalInputs ph;
    take(p, "X_bar", ph.X_bar);
    take(p, "kappa", ph.kappa);
    take(p, "width", ph.width);
    take(p, "slope", ph.slope);
    take(p, "roughness", ph.roughness);
    take(p, "grain", ph.grain);
    take(p, "rel_density", ph.rel_density);
    take(p, "gravity", ph.gravity);
    take(p, "mpm_coeff", ph.mpm_coeff);
    take(p, "shields_coeff", ph.shields_coeff);
    take(p, "critical_shields", ph.critical_shields);
    c.physical = ph;
    const bool explicit_xi = j.contains("xi") || (j.contains("model") && j.at("model").contains("xi"));
    if (!explicit_xi) c.model.xi = xi_from_physics(ph);
  }
  if (j.contains("mode")) {
    const std::string mode = j.at("mode").get<std::string>();
    if (mode != "1d" && mode != "2d") throw ConfigError("mode must be 1d or 2d");
    c.grid.two_d = mode == "2d";
  }
  int n = 50;
  std::string Lrule = "2n";
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    check_keys(g, {"n", "L", "rho", "rho_preset", "dt"}, "grid");
    take(g, "n", n);
    if (g.contains("L")) Lrule = g.at("L").is_string() ? g.at("L").get<std::string>() : std::to_string(g.at("L").get<int>());
    if (g.contains("rho")) c.rho = g.at("rho").get<double>();
    if (g.contains("dt")) c.dt = g.at("dt").get<double>();
    take(g, "rho_preset", c.rho_preset);
  }
  c.grid.n = n;
  if (n < 1) throw ConfigError("grid.n must be >= 1");
  c.grid.L = evaluate_L_rule(Lrule, n);
  take(j, "pipeline", c.pipeline);
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, {"n", "L", "kind"}, "sweep");
    take(s, "n", c.sweep_n);
    take(s, "L", c.sweep_L);
    take(s, "kind", c.sweep_kind);
  }
  take(j, "output_dir", c.output_dir);

  const bool has_hjb = std::find(c.pipeline.begin(), c.pipeline.end(), "hjb") != c.pipeline.end();
  c.thresholds = has_hjb || c.grid.two_d ? ThresholdSource::Hjb : ThresholdSource::Exact;
  if (j.contains("thresholds")) {
    const std::string t = j.at("thresholds").get<std::string>();
    if (t == "exact") c.thresholds = ThresholdSource::Exact;
    else if (t == "hjb") c.thresholds = ThresholdSource::Hjb;
    else {
      c.thresholds = ThresholdSource::File;
      c.threshold_file = t;
    }
  }
  if (j.contains("hjb")) {
    const json& h = j.at("hjb");
    check_keys(h, {"tol", "max_iter", "interp", "accelerate"}, "hjb");
    take(h, "tol", c.hjb.tol);
    take(h, "max_iter", c.hjb.max_iter);
    take(h, "accelerate", c.hjb.accelerate);
    if (h.contains("interp")) {
      const std::string m = h.at("interp").get<std::string>();
      if (m == "weno") c.hjb.interp = Interp::Weno;
      else if (m == "linear") c.hjb.interp = Interp::Linear;
      else throw ConfigError("hjb.interp must be weno or linear");
    }
  }
  if (j.contains("fp")) {
    const json& f = j.at("fp");
    check_keys(f, {"tol", "max_steps", "weno", "per_unit_time", "history_every"}, "fp");
    take(f, "tol", c.fp.tol);
    take(f, "max_steps", c.fp.max_steps);
    take(f, "weno", c.fp.weno);
    take(f, "per_unit_time", c.fp.per_unit_time);
    take(f, "history_every", c.fp.history_every);
  }
  if (c.grid.two_d) c.mc.dt = 0.01;
  if (j.contains("mc")) {
    const json& m = j.at("mc");
    check_keys(m, {"paths", "dt", "horizon", "burn_in", "window", "sample_every", "x0", "y0", "seed", "workers"},
               "mc");
    take(m, "paths", c.mc.paths);
    take(m, "dt", c.mc.dt);
    take(m, "horizon", c.mc.horizon);
    take(m, "burn_in", c.mc.burn_in);
    take(m, "window", c.mc.window);
    take(m, "sample_every", c.mc.sample_every);
    take(m, "x0", c.mc.x0);
    take(m, "y0", c.mc.y0);
    take(m, "seed", c.mc.seed);
    take(m, "workers", c.mc.workers);
  }
  if (j.contains("compare")) {
    const json& t = j.at("compare");
    check_keys(t, {"l1", "max_rel"}, "compare");
    take(t, "l1", c.compare.l1);
    take(t, "max_rel", c.compare.max_rel);
  }
  c.finalize();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

json config_to_json(const ExperimentConfig& c) {
  const ModelParams& m = c.model;
  json src = {{"kind", source_name(m.source.kind)}, {"S0", m.source.S0}};
  if (!m.source.table.empty()) {
    json t = json::array();
    for (const auto& [y, s] : m.source.table) t.push_back({y, s});
    src["table"] = t;
  }
  json j = {
      {"delta", m.delta}, {"Lambda", m.Lambda}, {"lambda", m.lambda}, {"c", m.c}, {"d", m.d},
      {"xi", m.xi}, {"G", m.G}, {"source", src},
      {"levy", {{"kind", m.levy.kind == LevyKind::Uniform ? "uniform" : "truncexp"}, {"theta", m.levy.theta}}},
      {"z_lo", m.z_lo}, {"z_hi", m.z_hi},
      {"mode", c.grid.two_d ? "2d" : "1d"},
      {"grid", {{"n", c.grid.n}, {"L", c.grid.L}, {"rho", c.grid.rho}, {"dt", c.grid.dt}}},
      {"pipeline", c.pipeline},
      {"output_dir", c.output_dir},
      {"hjb", {{"tol", c.hjb.tol}, {"max_iter", c.hjb.max_iter},
               {"interp", c.hjb.interp == Interp::Weno ? "weno" : "linear"}, {"accelerate", c.hjb.accelerate}}},
      {"fp", {{"tol", c.fp.tol}, {"max_steps", c.fp.max_steps}, {"weno", c.fp.weno},
              {"per_unit_time", c.fp.per_unit_time}, {"history_every", c.fp.history_every}}},
      {"mc", {{"paths", c.mc.paths}, {"dt", c.mc.dt}, {"horizon", c.mc.horizon}, {"burn_in", c.mc.burn_in},
              {"window", c.mc.window}, {"sample_every", c.mc.sample_every}, {"x0", c.mc.x0}, {"y0", c.mc.y0},
              {"seed", c.mc.seed}, {"workers", c.mc.workers}}},
      {"compare", {{"l1", c.compare.l1}, {"max_rel", c.compare.max_rel}}},
  };
  j["preset"] = "exact"; // every model field is echoed, so the preset only seeds defaults
  j["thresholds"] = c.thresholds == ThresholdSource::Exact ? std::string("exact")
                    : c.thresholds == ThresholdSource::Hjb ? std::string("hjb")
                                                           : c.threshold_file;
  if (!c.sweep_n.empty()) j["sweep"] = {{"n", c.sweep_n}, {"L", c.sweep_L}, {"kind", c.sweep_kind}};
  if (c.physical) {
    const PhysicalInputs& p = *c.physical;
    j["physical"] = {{"X_bar", p.X_bar}, {"kappa", p.kappa}, {"width", p.width}, {"slope", p.slope},
                     {"roughness", p.roughness}, {"grain", p.grain}, {"rel_density", p.rel_density},
                     {"gravity", p.gravity}, {"mpm_coeff", p.mpm_coeff}, {"shields_coeff", p.shields_coeff},
                     {"critical_shields", p.critical_shields}};
  }
  return j;
}

// ---------------------------------------------------------------- norms

ErrorNorms error_norms(const std::vector<double>& num, const std::vector<double>& ref,
                       const std::vector<double>& w) {
  if (num.size() != ref.size() || num.size() != w.size()) throw GridMismatch("error_norms: size mismatch");
  ErrorNorms e;
  double s2 = 0;
  for (std::size_t k = 0; k < num.size(); ++k) {
    const double d = std::abs(num[k] - ref[k]);
    e.l1 += d * w[k];
    s2 += d * d * w[k];
    e.linf = std::max(e.linf, d);
  }
  e.l2 = std::sqrt(s2);
  return e;
}

ErrorNorms hjb_error(const ValueField& f, const Exact1DSolution& s) {
  if (f.two_d) throw GridMismatch("the closed form exists only in 1-D");
  std::vector<double> ref(f.n + 1), w(f.n + 1);
  for (int i = 0; i <= f.n; ++i) {
    ref[i] = exact_value(static_cast<double>(i) / f.n, s);
    w[i] = trap(i, f.n);
  }
  return error_norms(f.Phi, ref, w);
}

ErrorNorms fp_error(const DensityField& f, const Exact1DSolution& s) {
  if (f.two_d) throw GridMismatch("the closed form exists only in 1-D");
  const double h = 1.0 / f.n;
  std::vector<double> ref(f.n), w(f.n, h);
  for (int i = 0; i < f.n; ++i) ref[i] = exact_density((i + 0.5) * h, s);
  return error_norms(f.p, ref, w);
}

DensityField exact_density_field(const Exact1DSolution& s, int n) {
  DensityField d = make_density(n, false);
  const double h = 1.0 / n;
  for (int i = 0; i < n; ++i) d.p[i] = exact_density_integral(i * h, (i + 1) * h, s) / h;
  d.q[0] = s.q;
  d.r[0] = s.r;
  return d;
}

std::vector<double> convergence_rates(const std::vector<double>& e) {
  std::vector<double> cr;
  for (std::size_t k = 0; k + 1 < e.size(); ++k) cr.push_back(std::log2(e[k] / e[k + 1]));
  return cr;
}

// ---------------------------------------------------------------- sweep

std::vector<SweepRow> convergence_sweep(const ExperimentConfig& c) {
  const bool exact = !c.grid.two_d && c.model.levy.kind == LevyKind::Uniform && c.model.z_lo == 0.0 &&
                     c.model.z_hi == 1.0;
  Exact1DSolution sol;
  if (exact) sol = solve_quintet(c.model);

  std::vector<SweepRow> rows;
  std::vector<ValueField> vf;
  std::vector<DensityField> df;
  for (int n : c.sweep_n) {
    SweepRow row;
    row.n = n;
    row.L = evaluate_L_rule(c.sweep_L, n);
    ValueField v;
    DensityField d;
    try {
      const GridSpec g = c.grid_at(n, row.L);
      const JumpGrid jg = build_jump_grid(g, c.model);
      std::vector<double> xb;
      if (c.sweep_kind == "hjb" || !exact || c.thresholds != ThresholdSource::Exact) {
        v = value_iteration(g, jg, c.model, c.hjb);
        xb = v.x_bar;
        row.threshold = v.x_bar[0];
        if (exact) row.threshold_error = std::abs(row.threshold - sol.x_bar);
      }
      if (c.sweep_kind == "fp") {
        if (exact && c.thresholds == ThresholdSource::Exact) xb = {sol.x_bar};
        const FpResult fr = solve_stationary(g, jg, c.model, cell_row_thresholds(xb, g.two_d), c.fp);
        d = fr.field;
        if (!g.two_d) {
          row.q = d.q[0];
          row.r = d.r[0];
        }
        if (exact) row.err = fp_error(d, sol);
      } else if (exact) {
        row.err = hjb_error(v, sol);
      }
    } catch (const Error& e) {
      row.status = e.what();
      row.err = {kNaN, kNaN, kNaN};
    }
    vf.push_back(std::move(v));
    df.push_back(std::move(d));
    rows.push_back(row);
  }

  if (!exact && !rows.empty()) {
    // self-convergence against the finest successful grid
    int ref = -1;
    for (std::size_t k = 0; k < rows.size(); ++k)
      if (rows[k].status == "ok" && (ref < 0 || rows[k].n > rows[ref].n)) ref = static_cast<int>(k);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k].status != "ok" || static_cast<int>(k) == ref) {
        rows[k].err = {kNaN, kNaN, kNaN};
        continue;
      }
      try {
        rows[k].err = c.sweep_kind == "fp" ? fp_self_error(df[k], df[ref]) : hjb_self_error(vf[k], vf[ref]);
      } catch (const Error& e) {
        rows[k].status = e.what();
        rows[k].err = {kNaN, kNaN, kNaN};
      }
    }
  }

  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (k + 1 < rows.size()) {
      rows[k].cr1 = convergence_rates({rows[k].err.l1, rows[k + 1].err.l1})[0];
      rows[k].cr2 = convergence_rates({rows[k].err.l2, rows[k + 1].err.l2})[0];
      rows[k].crinf = convergence_rates({rows[k].err.linf, rows[k + 1].err.linf})[0];
    } else {
      rows[k].cr1 = rows[k].cr2 = rows[k].crinf = kNaN;
    }
  }
  return rows;
}

// ---------------------------------------------------------------- compare

CompareReport compare_densities(const DensityField& a, const DensityField& b, const CompareTolerances& tol) {
  if (a.n != b.n || a.two_d != b.two_d) throw GridMismatch("compare_densities: grids differ");
  CompareReport rep;
  const DensityField* f[2] = {&a, &b};
  for (int k = 0; k < 2; ++k) {
    for (double v : f[k]->p) rep.max_p[k] = std::max(rep.max_p[k], v);
    for (double v : f[k]->q) {
      rep.max_q[k] = std::max(rep.max_q[k], v);
      rep.mass_q[k] += v * f[k]->row_weight();
    }
    for (double v : f[k]->r) {
      rep.max_r[k] = std::max(rep.max_r[k], v);
      rep.mass_r[k] += v * f[k]->row_weight();
    }
  }
  const double cell = a.row_weight() / a.n;
  for (std::size_t k = 0; k < a.p.size(); ++k) rep.l1_interior += std::abs(a.p[k] - b.p[k]) * cell;
  for (std::size_t k = 0; k < a.q.size(); ++k) {
    rep.l1_q += std::abs(a.q[k] - b.q[k]) * a.row_weight();
    rep.l1_r += std::abs(a.r[k] - b.r[k]) * a.row_weight();
  }
  auto rel = [](double x, double ref) { return ref == 0.0 ? (x == 0.0 ? 0.0 : 1.0) : std::abs(x - ref) / ref; };
  rep.pass = rep.l1_interior <= tol.l1 && rel(rep.max_q[0], rep.max_q[1]) <= tol.max_rel &&
             rel(rep.max_r[0], rep.max_r[1]) <= tol.max_rel;
  return rep;
}

// ---------------------------------------------------------------- CSV

std::string sibling_path(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  const std::string ext = p.has_extension() ? p.extension().string() : ".csv";
  return (p.parent_path() / (p.stem().string() + suffix + ext)).string();
}

void write_value_csv(const std::string& path, const ValueField& f) {
  auto os = open_out(path);
  os << "i,j,x,y,Phi,eta\n";
  const double h = 1.0 / f.n;
  for (int j = 0; j < f.rows(); ++j)
    for (int i = 0; i <= f.n; ++i)
      os << i << ',' << j << ',' << fmt(i * h) << ',' << fmt(f.two_d ? j * h : 0.0) << ',' << fmt(f.at(i, j))
         << ',' << fmt(f.eta[static_cast<std::size_t>(j) * (f.n + 1) + i]) << '\n';
}

void write_thresholds_csv(const std::string& path, const std::vector<double>& x_bar, bool two_d) {
  auto os = open_out(path);
  os << "j,y,x_bar\n";
  const int n = static_cast<int>(x_bar.size()) - 1;
  for (int j = 0; j < static_cast<int>(x_bar.size()); ++j)
    os << j << ',' << fmt(two_d && n > 0 ? static_cast<double>(j) / n : 0.0) << ',' << fmt(x_bar[j]) << '\n';
}

std::vector<double> read_thresholds_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open thresholds " + path);
  std::string line;
  std::getline(is, line);
  const auto head = split_csv(line);
  int col = -1;
  for (std::size_t k = 0; k < head.size(); ++k)
    if (head[k] == "x_bar") col = static_cast<int>(k);
  if (col < 0) throw ConfigError(path + ": no x_bar column");
  std::vector<double> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (static_cast<int>(cells.size()) <= col) throw ConfigError(path + ": short row");
    out.push_back(std::stod(cells[col]));
  }
  if (out.empty()) throw ConfigError(path + ": no thresholds");
  return out;
}

void write_density_csv(const std::string& path, const DensityField& f) {
  auto os = open_out(path);
  os << "kind,i,j,x,y,value\n";
  const double h = 1.0 / f.n;
  for (int j = 0; j < f.cell_rows(); ++j) {
    const int jj = f.two_d ? j + 1 : 0;
    const std::string y = fmt(f.two_d ? (j + 0.5) * h : 0.0);
    for (int i = 0; i < f.n; ++i)
      os << "cell," << i + 1 << ',' << jj << ',' << fmt((i + 0.5) * h) << ',' << y << ',' << fmt(f.at(i, j)) << '\n';
    os << "left,0," << jj << ",0," << y << ',' << fmt(f.q[j]) << '\n';
    os << "right," << f.n + 1 << ',' << jj << ",1," << y << ',' << fmt(f.r[j]) << '\n';
  }
}

DensityField read_density_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open density " + path);
  std::string line;
  std::getline(is, line);
  struct Rec { std::string kind; int i, j; double v; };
  std::vector<Rec> recs;
  int n = 0, jmax = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 6) throw ConfigError(path + ": expected 6 columns");
    Rec r{c[0], std::stoi(c[1]), std::stoi(c[2]), std::stod(c[5])};
    if (r.kind == "cell") n = std::max(n, r.i);
    jmax = std::max(jmax, r.j);
    recs.push_back(r);
  }
  if (n == 0) throw ConfigError(path + ": no cells");
  const bool two_d = jmax > 0;
  if (two_d && jmax != n) throw GridMismatch(path + ": cell rows do not match n");
  DensityField d = make_density(n, two_d);
  std::fill(d.p.begin(), d.p.end(), 0.0);
  for (const auto& r : recs) {
    const int j = two_d ? r.j - 1 : 0;
    if (r.kind == "cell") d.at(r.i - 1, j) = r.v;
    else if (r.kind == "left") d.q[j] = r.v;
    else if (r.kind == "right") d.r[j] = r.v;
    else throw ConfigError(path + ": unknown row kind " + r.kind);
  }
  return d;
}

void write_history_csv(const std::string& path, const std::vector<std::pair<double, double>>& h) {
  auto os = open_out(path);
  os << "t,mass,drift\n";
  const double M0 = h.empty() ? 0.0 : h.front().second;
  for (const auto& [t, m] : h) os << fmt(t) << ',' << fmt(m) << ',' << fmt(m - M0) << '\n';
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  auto os = open_out(path);
  os << "n,L,l1,l2,linf,cr_l1,cr_l2,cr_linf,threshold,threshold_error,q,r,status\n";
  for (const auto& r : rows)
    os << r.n << ',' << r.L << ',' << fmt(r.err.l1) << ',' << fmt(r.err.l2) << ',' << fmt(r.err.linf) << ','
       << fmt(r.cr1) << ',' << fmt(r.cr2) << ',' << fmt(r.crinf) << ',' << fmt(r.threshold) << ','
       << fmt(r.threshold_error) << ',' << fmt(r.q) << ',' << fmt(r.r) << ",\"" << r.status << "\"\n";
}

void write_exact_csv(const std::string& path, const Exact1DSolution& s, int points) {
  auto os = open_out(path);
  os << "x,Phi,p\n";
  for (int k = 0; k <= points; ++k) {
    const double x = static_cast<double>(k) / points;
    const double p = (k == 0 || k == points) ? 0.0 : exact_density(x, s);
    os << fmt(x) << ',' << fmt(exact_value(x, s)) << ',' << fmt(p) << '\n';
  }
}

// ---------------------------------------------------------------- pipeline

PipelineResult run_pipeline(const ExperimentConfig& c) {
  PipelineResult res;
  const std::string dir = default_output_dir(c.output_dir);
  fs::create_directories(dir);
  const auto file = [&](const std::string& name) { return (fs::path(dir) / name).string(); };

  json& man = res.manifest;
  man["config"] = config_to_json(c);
  man["seed"] = c.mc.seed;
  man["stages"] = json::array();

  const GridSpec& g = c.grid;
  std::optional<JumpGrid> jg;
  const auto jumps = [&]() -> const JumpGrid& {
    if (!jg) jg = build_jump_grid(g, c.model);
    return *jg;
  };
  std::optional<Exact1DSolution> sol;
  std::optional<ValueField> vf;
  std::optional<DensityField> fp, mc;

  const auto thresholds = [&]() -> std::vector<double> {
    switch (c.thresholds) {
    case ThresholdSource::Exact:
      if (!sol) sol = solve_quintet(c.model);
      return {sol->x_bar};
    case ThresholdSource::Hjb:
      if (!vf) throw ConfigError("hjb thresholds requested before the hjb stage");
      return vf->x_bar;
    case ThresholdSource::File:
      break;
    }
    auto xb = read_thresholds_csv(c.threshold_file);
    if (static_cast<int>(xb.size()) != g.rows()) throw GridMismatch("threshold file does not match the grid");
    return xb;
  };

  for (const std::string& stage : c.pipeline) {
    json info = {{"stage", stage}};
    const double t0 = now();
    try {
      if (stage == "exact1d") {
        if (g.two_d) throw ConfigError("exact1d needs 1-D mode");
        sol = solve_quintet(c.model);
        write_exact_csv(file("exact1d.csv"), *sol, 1000);
        write_thresholds_csv(file("exact1d_thresholds.csv"), {sol->x_bar}, false);
        const auto res4 = quintet_residuals(*sol);
        info["x_bar"] = sol->x_bar;
        info["Phi0"] = sol->Phi0;
        info["Phi_plus0"] = sol->Phi_plus0;
        info["Phi1"] = sol->Phi1;
        info["q"] = sol->q;
        info["r"] = sol->r;
        info["residual"] = std::max({std::abs(res4[0]), std::abs(res4[1]), std::abs(res4[2]), std::abs(res4[3])});
        info["files"] = {"exact1d.csv", "exact1d_thresholds.csv"};
      } else if (stage == "hjb") {
        vf = value_iteration(g, jumps(), c.model, c.hjb);
        write_value_csv(file("hjb.csv"), *vf);
        write_thresholds_csv(file("hjb_thresholds.csv"), vf->x_bar, g.two_d);
        info["iterations"] = vf->iterations;
        info["residual"] = vf->final_residual;
        info["threshold_type"] = vf->all_threshold();
        info["files"] = {"hjb.csv", "hjb_thresholds.csv"};
      } else if (stage == "fp") {
        const auto xb = thresholds();
        const FpResult fr = solve_stationary(g, jumps(), c.model, cell_row_thresholds(xb, g.two_d), c.fp);
        fp = fr.field;
        write_density_csv(file("fp.csv"), *fp);
        write_history_csv(file("fp_mass.csv"), fr.history);
        info["steps"] = fr.steps;
        info["max_mass_drift"] = fr.max_mass_drift;
        info["max_step_drift"] = fr.max_step_drift;
        info["min_value"] = fr.min_value;
        info["files"] = {"fp.csv", "fp_mass.csv"};
      } else if (stage == "mc") {
        const auto xb = thresholds();
        const McDensity md = estimate_density(c.model, ThresholdPolicy::rows(xb, g.two_d), g.n, g.two_d, c.mc);
        mc = md.field;
        write_density_csv(file("mc.csv"), *mc);
        info["paths"] = c.mc.paths;
        info["samples"] = md.samples;
        info["burn_in"] = md.burn_in;
        info["files"] = {"mc.csv"};
      } else if (stage == "compare") {
        if (!fp) throw ConfigError("compare needs an fp stage");
        DensityField other;
        if (mc) {
          other = *mc;
          info["against"] = "mc";
        } else if (sol && !g.two_d) {
          other = exact_density_field(*sol, g.n);
          info["against"] = "exact1d";
        } else {
          throw ConfigError("compare needs an mc or exact1d stage");
        }
        const CompareReport r = compare_densities(*fp, other, c.compare);
        info["max_p"] = {r.max_p[0], r.max_p[1]};
        info["max_q"] = {r.max_q[0], r.max_q[1]};
        info["max_r"] = {r.max_r[0], r.max_r[1]};
        info["mass_q"] = {r.mass_q[0], r.mass_q[1]};
        info["mass_r"] = {r.mass_r[0], r.mass_r[1]};
        info["l1_interior"] = r.l1_interior;
        info["l1_q"] = r.l1_q;
        info["l1_r"] = r.l1_r;
        info["pass"] = r.pass;
        if (!r.pass) res.compare_failed = true;
      }
    } catch (const Error& e) {
      throw Error("stage " + stage + ": " + e.what());
    }
    info["seconds"] = now() - t0;
    man["stages"].push_back(info);
  }
  man["status"] = res.compare_failed ? "compare_failed" : "ok";
  auto os = open_out(file("manifest.json"));
  os << man.dump(2) << '\n';
  return res;
}

} // namespace impulse
