#include "impulse/fp.hpp"

#include <algorithm>
#include <cmath>

#include "impulse/errors.hpp"

namespace impulse {

namespace {

std::vector<double> face_velocities(int n, bool two_d, const ModelParams& p) {
  const int my = two_d ? n : 1;
  std::vector<double> vel(my + 1, 0.0);
  if (two_d)
    for (int f = 1; f < my; ++f) vel[f] = growth(static_cast<double>(f) / n, p);
  return vel;
}

// Face values for one column of cells; out[0] = out[my] = 0.
void column_fluxes(const double* col, std::size_t stride, int my, const std::vector<double>& vel,
                   bool weno, double* out, std::size_t ostride) {
  auto c = [&](int j) { return col[static_cast<std::size_t>(j) * stride]; };
  out[0] = 0.0;
  out[static_cast<std::size_t>(my) * ostride] = 0.0;
  for (int f = 1; f < my; ++f) {
    const double v = vel[f];
    // upwind cell u, far upwind uu, downwind dn
    const int u = v >= 0 ? f - 1 : f;
    const int dn = v >= 0 ? f : f - 1;
    const int uu = v >= 0 ? f - 2 : f + 1;
    double face = c(u);
    if (weno && uu >= 0 && uu < my) {
      const double p0 = -0.5 * c(uu) + 1.5 * c(u);
      const double p1 = 0.5 * c(u) + 0.5 * c(dn);
      const double b0 = std::pow(c(u) - c(uu), 2), b1 = std::pow(c(dn) - c(u), 2);
      const double a0 = (1.0 / 3.0) / std::pow(1e-12 + b0, 2);
      const double a1 = (2.0 / 3.0) / std::pow(1e-12 + b1, 2);
      face = (a0 * p0 + a1 * p1) / (a0 + a1);
    }
    out[static_cast<std::size_t>(f) * ostride] = v * face;
  }
}

// Compressed jump transfer: targets < n*my are cells, the rest are x = 0 intervals.
struct Transfer {
  std::vector<std::size_t> start;
  std::vector<int> target;
  std::vector<double> weight;
};

void push_merged(Transfer& t, std::vector<std::pair<int, double>>& buf) {
  std::sort(buf.begin(), buf.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t k = 0; k < buf.size(); ++k) {
    if (k > 0 && buf[k].first == buf[k - 1].first) {
      t.weight.back() += buf[k].second;
    } else {
      t.target.push_back(buf[k].first);
      t.weight.push_back(buf[k].second);
    }
  }
  t.start.push_back(t.target.size());
}

struct Stepper {
  int n, my;
  bool two_d;
  double h, lam;
  Transfer from_p, from_r;
  std::vector<double> vel;
  // work
  std::vector<double> acc, Fp, Fq, Fr;

  Stepper(const JumpGrid& g, const ModelParams& p) : n(g.n), my(g.two_d ? g.n : 1), two_d(g.two_d) {
    h = 1.0 / n;
    lam = g.lambda_eff;
    const int cells = n * my;
    std::vector<std::pair<int, double>> buf;
    from_p.start.push_back(0);
    for (int j = 0; j < my; ++j)
      for (int i = 0; i < n; ++i) {
        buf.clear();
        for (int l = 0; l < g.L; ++l) {
          if (g.nu[l] == 0.0) continue;
          const int a = g.alpha_at(i, l), b = g.beta_at(i, j, l);
          if (a >= 0) buf.emplace_back(b * n + a, g.nu[l]);
          else buf.emplace_back(cells + b, g.nu[l] * h);
        }
        push_merged(from_p, buf);
      }
    from_r.start.push_back(0);
    for (int j = 0; j < my; ++j) {
      buf.clear();
      for (int l = 0; l < g.L; ++l) {
        if (g.nu[l] == 0.0) continue;
        const int c = g.gamma[l], w = g.omega_at(j, l);
        if (c >= 0) buf.emplace_back(w * n + c, g.nu[l] / h);
        else buf.emplace_back(cells + w, g.nu[l]);
      }
      push_merged(from_r, buf);
    }
    vel = face_velocities(n, two_d, p);
    acc.assign(cells + my, 0.0);
    Fp.assign(static_cast<std::size_t>(my + 1) * n, 0.0);
    Fq.assign(my + 1, 0.0);
    Fr.assign(my + 1, 0.0);
  }

  void inflow(const DensityField& f) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const std::size_t cells = static_cast<std::size_t>(n) * my;
    for (std::size_t s = 0; s < cells; ++s) {
      const double v = f.p[s];
      if (v == 0.0) continue;
      for (std::size_t k = from_p.start[s]; k < from_p.start[s + 1]; ++k) acc[from_p.target[k]] += from_p.weight[k] * v;
    }
    for (int j = 0; j < my; ++j) {
      const double v = f.r[j];
      if (v == 0.0) continue;
      for (std::size_t k = from_r.start[j]; k < from_r.start[j + 1]; ++k) acc[from_r.target[k]] += from_r.weight[k] * v;
    }
  }

  void fluxes(const DensityField& f, bool weno) {
    if (!two_d) return;
    for (int i = 0; i < n; ++i) column_fluxes(&f.p[i], n, my, vel, weno, &Fp[i], n);
    column_fluxes(f.q.data(), 1, my, vel, weno, Fq.data(), 1);
    column_fluxes(f.r.data(), 1, my, vel, weno, Fr.data(), 1);
  }

  // One forward-Euler step from f into out; returns the largest nodal change.
  double step(const DensityField& f, DensityField& out, double dt, const ModelParams& p,
              const Replenish& rep, bool weno) {
    inflow(f);
    fluxes(f, weno);
    const double Lam = p.Lambda;
    const std::size_t cells = static_cast<std::size_t>(n) * my;
    double change = 0.0;
    for (int j = 0; j < my; ++j) {
      const int k = rep.k[j];
      double m = rep.atom[j] ? f.q[j] : 0.0;
      for (int i = 0; i < n; ++i) {
        const std::size_t c = static_cast<std::size_t>(j) * n + i;
        const double v = f.p[c];
        if (i < k) m += v * h;
        const double div = (Fp[static_cast<std::size_t>(j + 1) * n + i] - Fp[static_cast<std::size_t>(j) * n + i]) / h;
        const double rate = -(i < k ? Lam : 0.0) * v - lam * v - div + acc[c];
        out.p[c] = v + dt * rate;
        change = std::max(change, std::abs(dt * rate));
      }
      const double dq = -(rep.atom[j] ? Lam : 0.0) * f.q[j] - (Fq[j + 1] - Fq[j]) / h + acc[cells + j];
      const double dr = -lam * f.r[j] - (Fr[j + 1] - Fr[j]) / h + Lam * m;
      out.q[j] = f.q[j] + dt * dq;
      out.r[j] = f.r[j] + dt * dr;
      change = std::max({change, std::abs(dt * dq), std::abs(dt * dr)});
    }
    out.t = f.t + dt;
    return change;
  }
};

void check_shape(const DensityField& f, const JumpGrid& g) {
  if (f.n != g.n || f.two_d != g.two_d) throw GridMismatch("density field and jump grid differ");
}

} // namespace

double DensityField::mass() const {
  const double h = 1.0 / n;
  double s = 0.0;
  for (int j = 0; j < cell_rows(); ++j) {
    double row = q[j] + r[j];
    for (int i = 0; i < n; ++i) row += at(i, j) * h;
    s += row;
  }
  return s * row_weight();
}

DensityField make_density(int n, bool two_d, FpInit init) {
  DensityField f;
  f.n = n;
  f.two_d = two_d;
  const int my = f.cell_rows();
  f.p.assign(static_cast<std::size_t>(n) * my, 0.0);
  f.q.assign(my, 0.0);
  f.r.assign(my, 0.0);
  const double area = (1.0 / n) * f.row_weight();
  if (init == FpInit::Uniform) std::fill(f.p.begin(), f.p.end(), 1.0);
  else f.at(n - 1, my - 1) = 1.0 / area;
  return f;
}

Replenish make_replenish(const std::vector<double>& x_bar, int n) {
  Replenish r;
  for (double x : x_bar) {
    r.k.push_back(replenish_cell_count(x, n));
    r.atom.push_back(x >= 0);
  }
  return r;
}

std::vector<double> cell_row_thresholds(const std::vector<double>& vx, bool two_d) {
  if (!two_d) return {vx.at(0)};
  return std::vector<double>(vx.begin() + 1, vx.end());
}

Fluxes upwind_fluxes(const DensityField& f, const ModelParams& p, bool weno) {
  const int n = f.n, my = f.cell_rows();
  Fluxes out;
  out.Fp.assign(static_cast<std::size_t>(my + 1) * n, 0.0);
  out.Fq.assign(my + 1, 0.0);
  out.Fr.assign(my + 1, 0.0);
  if (!f.two_d) return out;
  const auto vel = face_velocities(n, true, p);
  for (int i = 0; i < n; ++i) column_fluxes(&f.p[i], n, my, vel, weno, &out.Fp[i], n);
  column_fluxes(f.q.data(), 1, my, vel, weno, out.Fq.data(), 1);
  column_fluxes(f.r.data(), 1, my, vel, weno, out.Fr.data(), 1);
  return out;
}

Inflow jump_inflow(const DensityField& f, const JumpGrid& g) {
  check_shape(f, g);
  const int n = f.n, my = f.cell_rows();
  const double h = 1.0 / n;
  Inflow in;
  in.J.assign(static_cast<std::size_t>(n) * my, 0.0);
  in.JL.assign(my, 0.0);
  for (int j = 0; j < my; ++j)
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < g.L; ++l) {
        const int a = g.alpha_at(i, l), b = g.beta_at(i, j, l);
        if (a >= 0) in.J[static_cast<std::size_t>(b) * n + a] += g.nu[l] * f.at(i, j);
        else in.JL[b] += g.nu[l] * f.at(i, j) * h;
      }
  for (int j = 0; j < my; ++j)
    for (int l = 0; l < g.L; ++l) {
      const int c = g.gamma[l], w = g.omega_at(j, l);
      if (c >= 0) in.J[static_cast<std::size_t>(w) * n + c] += g.nu[l] * f.r[j] / h;
      else in.JL[w] += g.nu[l] * f.r[j];
    }
  return in;
}

double replenish_balance(const DensityField& f, const Replenish& rep, const ModelParams& p) {
  const int n = f.n;
  const double h = 1.0 / n, w = f.row_weight();
  double out_q = 0.0, out_p = 0.0, in_r = 0.0;
  for (int j = 0; j < f.cell_rows(); ++j) {
    double m = rep.atom[j] ? f.q[j] : 0.0;
    if (rep.atom[j]) out_q += p.Lambda * f.q[j] * w;
    for (int i = 0; i < rep.k[j]; ++i) {
      out_p += p.Lambda * f.at(i, j) * h * w;
      m += f.at(i, j) * h;
    }
    in_r += p.Lambda * m * w;
  }
  return -out_q - out_p + in_r;
}

double inflow_balance(const DensityField& f, const JumpGrid& g) {
  const Inflow in = jump_inflow(f, g);
  const int n = f.n;
  const double h = 1.0 / n, w = f.row_weight();
  double lhs = 0.0, src = 0.0;
  for (int j = 0; j < f.cell_rows(); ++j) {
    lhs += in.JL[j] * w;
    src += f.r[j] * w;
    for (int i = 0; i < n; ++i) {
      lhs += in.J[static_cast<std::size_t>(j) * n + i] * h * w;
      src += f.at(i, j) * h * w;
    }
  }
  return lhs - g.lambda_eff * src;
}

bool stable_step(const GridSpec& spec, const JumpGrid& g, const ModelParams& p) {
  double fmax = 0.0;
  if (spec.two_d)
    for (double v : face_velocities(spec.n, true, p)) fmax = std::max(fmax, std::abs(v));
  return spec.dt * (g.lambda_eff + p.Lambda + fmax * spec.n) <= 1.0;
}

DensityField euler_step(const DensityField& f, const GridSpec& spec, const JumpGrid& g,
                        const ModelParams& p, const Replenish& rep, bool weno) {
  check_shape(f, g);
  if (!stable_step(spec, g, p)) throw StabilityViolation("time step violates the positivity bound");
  Stepper st(g, p);
  DensityField out = f;
  st.step(f, out, spec.dt, p, rep, weno);
  return out;
}

FpResult solve_stationary(const GridSpec& spec, const JumpGrid& g, const ModelParams& p,
                          const std::vector<double>& cell_x_bar, const FpOptions& opt,
                          const DensityField* init) {
  spec.validate();
  if (g.n != spec.n || g.two_d != spec.two_d) throw GridMismatch("jump grid built for another grid");
  if (!stable_step(spec, g, p))
    throw StabilityViolation("dt (lambda_eff + Lambda + max f / h) > 1; reduce dt");
  const Replenish rep = make_replenish(cell_x_bar, spec.n);
  if (static_cast<int>(rep.k.size()) != (spec.two_d ? spec.n : 1))
    throw GridMismatch("threshold count does not match the cell rows");

  FpResult res;
  res.field = init ? *init : make_density(spec.n, spec.two_d);
  check_shape(res.field, g);
  DensityField next = res.field;
  Stepper st(g, p);
  const double M0 = res.field.mass();
  double Mprev = M0;
  res.history.emplace_back(res.field.t, M0);
  for (long s = 1;; ++s) {
    if (s > opt.max_steps)
      throw MaxSteps("stationary state not reached in " + std::to_string(opt.max_steps) + " steps");
    double change = st.step(res.field, next, spec.dt, p, rep, opt.weno);
    std::swap(res.field, next);
    const double M = res.field.mass();
    res.max_mass_drift = std::max(res.max_mass_drift, std::abs(M - M0));
    res.max_step_drift = std::max(res.max_step_drift, std::abs(M - Mprev));
    Mprev = M;
    if (opt.history_every > 0 && s % opt.history_every == 0) res.history.emplace_back(res.field.t, M);
    if (opt.per_unit_time) change /= spec.dt;
    if (change < opt.tol) {
      res.steps = s;
      break;
    }
  }
  if (res.history.back().first != res.field.t) res.history.emplace_back(res.field.t, res.field.mass());
  double mn = 0.0;
  for (double v : res.field.p) mn = std::min(mn, v);
  for (double v : res.field.q) mn = std::min(mn, v);
  for (double v : res.field.r) mn = std::min(mn, v);
  res.min_value = mn;
  return res;
}

} // namespace impulse
