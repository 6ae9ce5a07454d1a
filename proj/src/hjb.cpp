#include "impulse/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "impulse/errors.hpp"

namespace impulse {

namespace {

struct Stencil {
  int row0 = 0; // first row of the stencil
  int count = 0;
  double c[4] = {0, 0, 0, 0};
};

constexpr double kWenoEps = 1e-6;

// Interpolation weights at ordinate y for column data v (rows 0..n).
Stencil make_stencil(const double* v, int stride, int n, double y, Interp mode) {
  Stencil st;
  const double t = std::clamp(y, 0.0, 1.0) * n;
  const int jb = std::min(static_cast<int>(std::floor(t)), n - 1);
  const double s = t - jb;
  if (s <= 0.0) {
    st.row0 = jb;
    st.count = 1;
    st.c[0] = 1.0;
    return st;
  }
  const bool left = jb - 1 >= 0, right = jb + 2 <= n;
  if (mode == Interp::Linear || (!left && !right)) {
    st.row0 = jb;
    st.count = 2;
    st.c[0] = 1.0 - s;
    st.c[1] = s;
    return st;
  }
  // quadratics through rows jb-1..jb+1 and jb..jb+2, on a common 4-point frame
  const double p1[4] = {-0.5 * s + 0.5 * s * s, 1.0 - s * s, 0.5 * s + 0.5 * s * s, 0.0};
  const double p2[4] = {0.0, 1.0 - 1.5 * s + 0.5 * s * s, 2.0 * s - s * s, -0.5 * s + 0.5 * s * s};
  double w1, w2;
  if (left && right) {
    auto at = [&](int r) { return v[static_cast<std::size_t>(r) * stride]; };
    const double is1 = std::pow(at(jb + 1) - 2.0 * at(jb) + at(jb - 1), 2);
    const double is2 = std::pow(at(jb + 2) - 2.0 * at(jb + 1) + at(jb), 2);
    const double a1 = (2.0 - s) / 3.0 / std::pow(kWenoEps + is1, 2);
    const double a2 = (1.0 + s) / 3.0 / std::pow(kWenoEps + is2, 2);
    w1 = a1 / (a1 + a2);
    w2 = 1.0 - w1;
  } else {
    w1 = left ? 1.0 : 0.0;
    w2 = 1.0 - w1;
  }
  st.row0 = jb - 1;
  st.count = 4;
  for (int k = 0; k < 4; ++k) st.c[k] = w1 * p1[k] + w2 * p2[k];
  if (!left) { // drop the unused leading row
    st.row0 = jb;
    st.count = 3;
    for (int k = 0; k < 3; ++k) st.c[k] = st.c[k + 1];
  } else if (!right) {
    st.count = 3;
  }
  return st;
}

// Compressed jump stencil: targets and weights per vertex.
struct JumpCsr {
  std::vector<std::size_t> start;
  std::vector<int> target;
  std::vector<double> weight;
};

JumpCsr build_jump_csr(const JumpGrid& g, int rows) {
  const int n = g.n, L = g.L;
  JumpCsr m;
  m.start.reserve(static_cast<std::size_t>(rows) * (n + 1) + 1);
  m.start.push_back(0);
  std::vector<std::pair<int, double>> buf;
  buf.reserve(L);
  for (int j = 0; j < rows; ++j)
    for (int i = 0; i <= n; ++i) {
      buf.clear();
      for (int l = 0; l < L; ++l) {
        if (g.nu[l] == 0.0) continue;
        buf.emplace_back(g.b_at(i, j, l) * (n + 1) + g.post_jump_vertex(i, l), g.nu[l]);
      }
      std::sort(buf.begin(), buf.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      for (std::size_t k = 0; k < buf.size(); ++k) {
        if (k > 0 && buf[k].first == buf[k - 1].first) {
          m.weight.back() += buf[k].second;
        } else {
          m.target.push_back(buf[k].first);
          m.weight.push_back(buf[k].second);
        }
      }
      m.start.push_back(m.target.size());
    }
  return m;
}

// Solves a system whose row r has entries in columns r-1..r+2, using partial
// pivoting. w holds row r at w[5r .. 5r+4] for columns r-1..r+3.
void solve_band(std::vector<double>& w, std::vector<double>& rhs) {
  const int R = static_cast<int>(rhs.size());
  auto W = [&](int r, int k) -> double& { return w[static_cast<std::size_t>(r) * 5 + k]; };
  for (int k = 0; k + 1 < R; ++k) {
    double ra[4], rb[4];
    for (int c = 0; c < 4; ++c) {
      ra[c] = W(k, c + 1);
      rb[c] = W(k + 1, c);
    }
    double fa = rhs[k], fb = rhs[k + 1];
    if (std::abs(rb[0]) > std::abs(ra[0])) {
      std::swap(ra, rb);
      std::swap(fa, fb);
    }
    if (ra[0] == 0.0) throw MaxIterations("singular line system in value iteration");
    const double m = rb[0] / ra[0];
    for (int c = 1; c < 4; ++c) rb[c] -= m * ra[c];
    fb -= m * fa;
    W(k, 0) = 0.0;
    for (int c = 0; c < 4; ++c) W(k, c + 1) = ra[c];
    W(k + 1, 0) = 0.0;
    for (int c = 1; c < 4; ++c) W(k + 1, c) = rb[c];
    W(k + 1, 4) = 0.0;
    rhs[k] = fa;
    rhs[k + 1] = fb;
  }
  for (int r = R - 1; r >= 0; --r) {
    double v = rhs[r];
    for (int c = r + 1; c <= std::min(r + 3, R - 1); ++c) v -= W(r, c - r + 1) * rhs[c];
    if (W(r, 1) == 0.0) throw MaxIterations("singular line system in value iteration");
    rhs[r] = v / W(r, 1);
  }
}

} // namespace

bool ValueField::all_threshold() const {
  return std::all_of(threshold_row.begin(), threshold_row.end(), [](bool b) { return b; });
}

ValueField make_value_field(int n, bool two_d, double fill) {
  ValueField f;
  f.n = n;
  f.two_d = two_d;
  const std::size_t N = static_cast<std::size_t>(f.rows()) * (n + 1);
  f.Phi.assign(N, fill);
  f.eta.assign(N, 0.0);
  f.x_bar.assign(f.rows(), -1.0);
  f.threshold_row.assign(f.rows(), true);
  return f;
}

double nonlocal_jump(const ValueField& f, const JumpGrid& g, int i, int j) {
  if (g.n != f.n || g.two_d != f.two_d) throw GridMismatch("jump grid and value field differ");
  double s = 0.0;
  for (int l = 0; l < g.L; ++l) s += g.nu[l] * f.at(g.post_jump_vertex(i, l), g.b_at(i, j, l));
  return -g.lambda_eff * f.at(i, j) + s;
}

std::pair<double, double> replenish_operator(const ValueField& f, int i, int j, const ModelParams& p) {
  if (i >= f.n) return {0.0, 0.0};
  const double x = static_cast<double>(i) / f.n;
  const double phi = f.at(i, j);
  const double alt = f.at(f.n, j) + p.c * (1.0 - x) + p.d;
  if (phi > alt) return {p.Lambda * (phi - alt), 1.0 - x};
  return {0.0, 0.0};
}

double interpolate_column(const double* v, int stride, int n, double y, Interp mode) {
  const Stencil st = make_stencil(v, stride, n, y, mode);
  double s = 0.0;
  for (int k = 0; k < st.count; ++k) s += st.c[k] * v[static_cast<std::size_t>(st.row0 + k) * stride];
  return s;
}

ValueField semi_lagrangian_advect(const ValueField& f, double rho, const ModelParams& p, Interp mode) {
  ValueField out = f;
  if (!f.two_d) return out;
  const int n = f.n;
  for (int j = 0; j <= n; ++j) {
    const double y = static_cast<double>(j) / n;
    const double foot = std::clamp(y + growth(y, p) * rho, 0.0, 1.0);
    for (int i = 0; i <= n; ++i) out.at(i, j) = interpolate_column(&f.Phi[i], n + 1, n, foot, mode);
  }
  return out;
}

ValueField value_iteration(const GridSpec& spec, const JumpGrid& g, const ModelParams& p,
                           const HjbOptions& opt) {
  spec.validate();
  if (g.n != spec.n || g.two_d != spec.two_d) throw GridMismatch("jump grid built for another grid");
  const int n = spec.n, rows = spec.rows(), W = n + 1;
  const double h = spec.h();
  const double E = std::exp(-p.delta * spec.rho);
  const double eps = -std::expm1(-p.delta * spec.rho) / p.delta;
  const double lam = g.lambda_eff;

  const JumpCsr jc = build_jump_csr(g, rows);
  std::vector<double> foot(rows, 0.0), S(rows, 0.0);
  for (int j = 0; j < rows; ++j) {
    const double y = spec.two_d ? j * h : 0.0;
    foot[j] = spec.two_d ? std::clamp(y + growth(y, p) * spec.rho, 0.0, 1.0) : 0.0;
    S[j] = spec.two_d ? disutility(y, p) : 0.0;
  }

  ValueField f = make_value_field(n, spec.two_d, 0.0);
  std::vector<double> next(f.Phi.size());
  std::vector<double> band(static_cast<std::size_t>(rows) * 5), line(rows);
  constexpr double inf = std::numeric_limits<double>::infinity();

  bool accel = opt.accelerate;
  double best = inf;
  long since_best = 0;
  long it = 0;
  double diff = inf;
  while (true) {
    if (it >= opt.max_iter)
      throw MaxIterations("value iteration did not converge in " + std::to_string(opt.max_iter) +
                          " iterations (last change " + std::to_string(diff) + ")");
    ++it;
    diff = 0.0;
    if (accel) {
      // Line-implicit sweep: each x-column's y-coupling (interpolation with
      // frozen weights), jump self-weight and active replenishment are solved
      // exactly; other couplings use the latest values.
      for (int i = 0; i <= n; ++i) {
        std::fill(band.begin(), band.end(), 0.0);
        for (int j = 0; j < rows; ++j) {
          const std::size_t v = static_cast<std::size_t>(j) * W + i;
          const double* cur = f.Phi.data();
          double diag = 1.0, rhs = 0.0;
          if (spec.two_d) {
            diag = 0.0;
            const Stencil st = make_stencil(cur + i, W, n, foot[j], opt.interp);
            for (int k = 0; k < st.count; ++k) {
              const int r = st.row0 + k;
              if (r == j) diag -= E * st.c[k];
              else if (r >= j - 1 && r <= j + 2) band[static_cast<std::size_t>(j) * 5 + (r - j + 1)] -= E * st.c[k];
              else rhs += E * st.c[k] * cur[static_cast<std::size_t>(r) * W + i];
            }
            diag += 1.0;
          } else {
            diag = 1.0 - E;
          }
          double w_self = 0.0;
          for (std::size_t k = jc.start[v]; k < jc.start[v + 1]; ++k) {
            const int t = jc.target[k];
            if (static_cast<std::size_t>(t) == v) w_self += jc.weight[k];
            else rhs += eps * jc.weight[k] * cur[t];
          }
          diag += eps * (lam - w_self);
          rhs += eps * ((i == 0 ? 1.0 : 0.0) + S[j]);
          if (i < n) {
            const double A = cur[static_cast<std::size_t>(j) * W + n] + p.c * (1.0 - i * h) + p.d;
            if (cur[v] > A) {
              diag += eps * p.Lambda;
              rhs += eps * p.Lambda * A;
            }
          }
          band[static_cast<std::size_t>(j) * 5 + 1] += diag;
          line[j] = rhs;
        }
        solve_band(band, line);
        for (int j = 0; j < rows; ++j) {
          double& dst = f.Phi[static_cast<std::size_t>(j) * W + i];
          if (!std::isfinite(line[j])) throw MaxIterations("value iteration diverged");
          diff = std::max(diff, std::abs(line[j] - dst));
          dst = line[j];
        }
      }
    } else {
      const double* cur = f.Phi.data();
      for (int j = 0; j < rows; ++j) {
        for (int i = 0; i <= n; ++i) {
          const std::size_t v = static_cast<std::size_t>(j) * W + i;
          const double phi = cur[v];
          double adv = phi;
          if (spec.two_d) {
            const Stencil st = make_stencil(cur + i, W, n, foot[j], opt.interp);
            adv = 0.0;
            for (int k = 0; k < st.count; ++k) adv += st.c[k] * cur[static_cast<std::size_t>(st.row0 + k) * W + i];
          }
          double jump = 0.0;
          for (std::size_t k = jc.start[v]; k < jc.start[v + 1]; ++k) jump += jc.weight[k] * cur[jc.target[k]];
          const double src = (i == 0 ? 1.0 : 0.0) + S[j];
          double rep = 0.0;
          if (i < n) {
            const double A = cur[static_cast<std::size_t>(j) * W + n] + p.c * (1.0 - i * h) + p.d;
            if (phi > A) rep = p.Lambda * (phi - A);
          }
          const double val = E * adv + eps * (-lam * phi + jump - rep + src);
          if (!std::isfinite(val)) throw MaxIterations("value iteration diverged");
          diff = std::max(diff, std::abs(val - phi));
          next[v] = val;
        }
      }
      f.Phi.swap(next);
    }

    if (accel) {
      if (diff < best) {
        best = diff;
        since_best = 0;
      } else if (++since_best > opt.stall_window) {
        accel = false;
      }
      if (diff < 0.1 * opt.tol) accel = false;
      continue;
    }
    if (diff < opt.tol) break;
  }
  f.iterations = it;
  f.final_residual = diff;

  for (int j = 0; j < rows; ++j)
    for (int i = 0; i <= n; ++i) f.eta[static_cast<std::size_t>(j) * W + i] = replenish_operator(f, i, j, p).second;
  detect_threshold(f);
  return f;
}

std::vector<double> detect_threshold(ValueField& f) {
  const int n = f.n, W = n + 1;
  f.x_bar.assign(f.rows(), -1.0);
  f.threshold_row.assign(f.rows(), true);
  for (int j = 0; j < f.rows(); ++j) {
    const double* eta = &f.eta[static_cast<std::size_t>(j) * W];
    int last = -1;
    while (last + 1 <= n && eta[last + 1] > 0) ++last;
    bool prefix = true;
    for (int i = last + 1; i <= n; ++i)
      if (eta[i] > 0) prefix = false;
    f.threshold_row[j] = prefix;
    if (last >= 0) f.x_bar[j] = 0.5 * (static_cast<double>(last) / n + static_cast<double>(last + 1) / n);
  }
  return f.x_bar;
}

} // namespace impulse
