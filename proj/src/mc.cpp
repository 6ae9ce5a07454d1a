#include "impulse/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "impulse/errors.hpp"

namespace impulse {

ThresholdPolicy ThresholdPolicy::constant(double x_bar) { return {{x_bar}, false, 0}; }

ThresholdPolicy ThresholdPolicy::rows(const std::vector<double>& x_bar, bool two_d) {
  if (x_bar.empty()) throw ConfigError("empty threshold table");
  ThresholdPolicy pol{x_bar, two_d, two_d ? static_cast<int>(x_bar.size()) - 1 : 0};
  if (two_d && pol.n < 1) throw ConfigError("2-D threshold table needs n+1 rows");
  return pol;
}

double ThresholdPolicy::at(double y) const {
  if (!two_d) return x_bar[0];
  const int row = std::clamp(static_cast<int>(std::ceil(y * n - 1e-12)), 0, n);
  return x_bar[row];
}

double default_burn_in(const ModelParams& p) {
  return 20.0 / std::min({p.delta, p.Lambda, effective_intensity(p)});
}

namespace {

constexpr long kNever = std::numeric_limits<long>::max() / 4;

struct Walker {
  const ModelParams& p;
  const ThresholdPolicy& pol;
  double dt;
  Philox& rng;
  double pj, po, step_discount, step_weight;
  PathState s;
  long k = 0, next_jump = 0, next_obs = 0;

  Walker(const ModelParams& p_, const ThresholdPolicy& pol_, double dt_, Philox& rng_, double x0, double y0)
      : p(p_), pol(pol_), dt(dt_), rng(rng_) {
    pj = effective_intensity(p) * dt;
    po = p.Lambda * dt;
    if (pj >= 1.0 || po >= 1.0) throw ConfigError("dt too large: event probability per step must be < 1");
    step_discount = std::exp(-p.delta * dt);
    step_weight = -std::expm1(-p.delta * dt) / p.delta;
    s.x = x0;
    s.y = y0;
    next_jump = geom(pj) - 1;
    next_obs = geom(po) - 1;
  }

  // Steps until the first success, counting the success step.
  long geom(double prob) {
    if (prob <= 0.0) return kNever;
    const double k = std::floor(std::log(rng.uniform()) / std::log1p(-prob));
    return k >= static_cast<double>(kNever) ? kNever : 1 + static_cast<long>(k);
  }

  // Runs steps k..k_end-1; each step accrues costs on the state at its start,
  // moves y, then applies a jump and an observation if scheduled.
  void advance_to(long k_end, bool accrue) {
    while (k < k_end) {
      const long m = std::min({next_jump, next_obs, k_end - 1});
      const long count = m - k + 1;
      const double f = p.G * s.y * (1.0 - s.y);
      if (f == 0.0) {
        if (accrue) {
          const double w = std::exp(-p.delta * k * dt) * -std::expm1(-p.delta * count * dt) / p.delta;
          s.depletion += (s.x == 0.0 ? w : 0.0);
          s.disutility += disutility(s.y, p) * w;
        }
      } else {
        double disc = accrue ? std::exp(-p.delta * k * dt) : 0.0;
        for (long st = 0; st < count; ++st) {
          if (accrue) {
            const double w = disc * step_weight;
            s.depletion += (s.x == 0.0 ? w : 0.0);
            s.disutility += disutility(s.y, p) * w;
            disc *= step_discount;
          }
          s.y = std::clamp(s.y + p.G * s.y * (1.0 - s.y) * dt, 0.0, 1.0);
        }
      }
      k = m + 1;
      s.t = k * dt;
      if (next_jump == m) {
        const double z = levy_quantile(rng.uniform(), p);
        const double xp = s.x;
        s.x = std::max(xp - z, 0.0);
        s.y *= std::exp(-p.xi * std::min(xp, z));
        ++s.jumps;
        next_jump = m + geom(pj);
      }
      if (next_obs == m) {
        ++s.observations;
        if (s.x <= pol.at(s.y)) {
          if (accrue) s.cost += std::exp(-p.delta * s.t) * (p.c * (1.0 - s.x) + p.d);
          s.x = 1.0;
          ++s.replenishments;
        }
        next_obs = m + geom(po);
      }
    }
  }
};

long steps_for(double t, double dt) { return static_cast<long>(std::llround(t / dt)); }

template <class Fn>
void run_chunks(long paths, int workers, long chunk, Fn&& fn) {
  const long nchunks = (paths + chunk - 1) / chunk;
  if (workers <= 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<int>(std::min<long>(workers, nchunks));
  std::atomic<long> next{0};
  auto work = [&] {
    for (long c; (c = next.fetch_add(1)) < nchunks;) fn(c, c * chunk, std::min(paths, (c + 1) * chunk));
  };
  if (workers <= 1) {
    work();
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

constexpr long kChunk = 4096;

} // namespace

PathState simulate_path(double x0, double y0, double horizon, double dt, const ModelParams& p,
                        const ThresholdPolicy& policy, Philox& rng) {
  if (!(x0 >= 0 && x0 <= 1 && y0 >= 0 && y0 <= 1)) throw DomainError("initial state outside [0,1]^2");
  if (!(dt > 0)) throw ConfigError("dt must be > 0");
  Walker w(p, policy, dt, rng, x0, y0);
  w.advance_to(steps_for(horizon, dt), true);
  return w.s;
}

McDensity estimate_density(const ModelParams& p, const ThresholdPolicy& policy, int n, bool two_d,
                           const McOptions& opt) {
  const int my = two_d ? n : 1;
  const std::size_t cells = static_cast<std::size_t>(n) * my;
  const double burn = opt.burn_in < 0 ? default_burn_in(p) : opt.burn_in;
  const long burn_steps = steps_for(burn, opt.dt);
  const long every = std::max(1L, steps_for(opt.sample_every, opt.dt));
  const long nsamples = opt.window > 0 ? std::max(1L, steps_for(opt.window, opt.dt) / every) : 1;
  const double y0 = two_d ? opt.y0 : 0.0;

  // counts: cells, then q rows, then r rows; integer sums merge exactly in any order
  std::vector<std::vector<std::uint64_t>> partial((opt.paths + kChunk - 1) / kChunk);
  run_chunks(opt.paths, opt.workers, kChunk, [&](long c, long begin, long end) {
    std::vector<std::uint64_t> cnt(cells + 2 * my, 0);
    for (long path = begin; path < end; ++path) {
      Philox rng(opt.seed, static_cast<std::uint64_t>(path));
      Walker w(p, policy, opt.dt, rng, opt.x0, y0);
      for (long m = 0; m < nsamples; ++m) {
        w.advance_to(burn_steps + m * every, false);
        const int j = two_d ? std::min(static_cast<int>(w.s.y * n), n - 1) : 0;
        if (w.s.x == 0.0) ++cnt[cells + j];
        else if (w.s.x == 1.0) ++cnt[cells + my + j];
        else ++cnt[static_cast<std::size_t>(j) * n + std::min(static_cast<int>(w.s.x * n), n - 1)];
      }
    }
    partial[c] = std::move(cnt);
  });

  std::vector<std::uint64_t> cnt(cells + 2 * my, 0);
  for (const auto& pc : partial)
    for (std::size_t k = 0; k < cnt.size(); ++k) cnt[k] += pc[k];

  McDensity out;
  out.samples = opt.paths * nsamples;
  out.burn_in = burn;
  out.field = make_density(n, two_d);
  const double total = static_cast<double>(out.samples);
  const double h = 1.0 / n, wy = out.field.row_weight();
  for (std::size_t k = 0; k < cells; ++k) out.field.p[k] = cnt[k] / (total * h * wy);
  for (int j = 0; j < my; ++j) {
    out.field.q[j] = cnt[cells + j] / (total * wy);
    out.field.r[j] = cnt[cells + my + j] / (total * wy);
  }
  out.field.t = burn + (nsamples - 1) * every * opt.dt;
  return out;
}

McObjective estimate_objective(double x0, double y0, const ModelParams& p, const ThresholdPolicy& policy,
                               const McOptions& opt) {
  const double bound = (1.0 + disutility(1.0, p)) / p.delta;
  McObjective out;
  out.horizon = opt.horizon > 0 ? opt.horizon : std::log(bound / 1e-10) / p.delta;
  out.bias_bound = std::exp(-p.delta * out.horizon) * bound;
  out.paths = opt.paths;
  const long chunks = (opt.paths + kChunk - 1) / kChunk;
  std::vector<std::pair<double, double>> partial(chunks);
  run_chunks(opt.paths, opt.workers, kChunk, [&](long c, long begin, long end) {
    double s1 = 0.0, s2 = 0.0;
    for (long path = begin; path < end; ++path) {
      Philox rng(opt.seed, static_cast<std::uint64_t>(path));
      const double v = simulate_path(x0, y0, out.horizon, opt.dt, p, policy, rng).objective();
      s1 += v;
      s2 += v * v;
    }
    partial[c] = {s1, s2};
  });
  double s1 = 0.0, s2 = 0.0;
  for (const auto& [a, b] : partial) {
    s1 += a;
    s2 += b;
  }
  const double N = static_cast<double>(opt.paths);
  out.mean = s1 / N;
  const double var = std::max(0.0, (s2 - N * out.mean * out.mean) / std::max(1.0, N - 1.0));
  out.stderr_ = std::sqrt(var / N);
  return out;
}

} // namespace impulse
