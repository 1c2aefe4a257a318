#include "power_alloc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "util.hpp"

namespace irsma {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

double log2_1p(double x) { return std::log1p(x) / kLn2; }

double clamp_peak(double v, double peak) {
  if (std::isnan(v)) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(v, 0.0, peak);
}

bool finite_pair(double a, double b) { return std::isfinite(a) && std::isfinite(b); }

// Keeps the best candidate under the tie rule: higher value, then lower
// total power, then lower p1.
struct Best {
  StateAllocation alloc;
  bool has = false;

  void consider(const StateAllocation& cand) {
    if (!std::isfinite(cand.value)) return;
    if (!has) {
      alloc = cand;
      has = true;
      return;
    }
    const double tol = 1e-12 * std::max(1.0, std::fabs(alloc.value));
    if (cand.value > alloc.value + tol) {
      alloc = cand;
    } else if (cand.value >= alloc.value - tol) {
      const double tot_new = cand.p1 + cand.p2;
      const double tot_old = alloc.p1 + alloc.p2;
      if (tot_new < tot_old - 1e-15 ||
          (std::fabs(tot_new - tot_old) <= 1e-15 && cand.p1 < alloc.p1 - 1e-15))
        alloc = cand;
    }
  }
};

}  // namespace

void PowerBudget::validate() const {
  if (!(avg_power > 0.0)) throw std::invalid_argument("average power must be > 0");
  if (avg_power > peak_power) throw std::invalid_argument("average power must not exceed peak");
  if (min_rate < 0.0) throw std::invalid_argument("min rate must be >= 0");
}

std::pair<double, double> state_rates(const StateAllocation& alloc, double g1, double g2,
                                      Access scheme) {
  if (scheme == Access::Noma) {
    if (alloc.first_decoded == 0) {
      const double r1 = log2_1p(g1 * alloc.p1 / (g1 * alloc.p2 + 1.0));
      const double r2 = log2_1p(g2 * alloc.p2);
      return {r1, r2};
    }
    const double r2 = log2_1p(g2 * alloc.p2 / (g2 * alloc.p1 + 1.0));
    const double r1 = log2_1p(g1 * alloc.p1);
    return {r1, r2};
  }
  const double a1 = alloc.alpha1;
  const double a2 = 1.0 - a1;
  const double r1 = (a1 > 0.0 && alloc.p1 > 0.0) ? a1 * log2_1p(g1 * alloc.p1 / a1) : 0.0;
  const double r2 = (a2 > 0.0 && alloc.p2 > 0.0) ? a2 * log2_1p(g2 * alloc.p2 / a2) : 0.0;
  return {r1, r2};
}

double sub_lagrangian(const StateAllocation& alloc, double g1, double g2, Access scheme,
                      const DualMultipliers& duals) {
  const auto [r1, r2] = state_rates(alloc, g1, g2, scheme);
  return (1.0 + duals.delta) * r1 + (1.0 + duals.mu) * r2 -
         duals.lambda * (alloc.p1 + alloc.p2);
}

StateAllocation noma_state_opt(double g1, double g2, const DualMultipliers& duals,
                               double peak_power, int first_decoded) {
  if (g1 < 0.0 || g2 < 0.0) throw std::domain_error("negative effective gain");
  if (peak_power <= 0.0) throw std::domain_error("peak power must be > 0");

  // Work in (A, B) coordinates where A is decoded first (sees interference).
  const double ga = first_decoded == 0 ? g1 : g2;
  const double gb = first_decoded == 0 ? g2 : g1;
  const double da = first_decoded == 0 ? duals.delta : duals.mu;
  const double db = first_decoded == 0 ? duals.mu : duals.delta;
  const double lam = duals.lambda;
  const double peak = peak_power;

  const double inv_ga = ga > 0.0 ? 1.0 / ga : std::numeric_limits<double>::infinity();
  const double inv_gb = gb > 0.0 ? 1.0 / gb : std::numeric_limits<double>::infinity();
  const double level_a = (1.0 + da) / (lam * kLn2) - inv_ga;
  const double level_b = (1.0 + db) / (lam * kLn2) - inv_gb;

  std::vector<std::pair<double, double>> cands;
  cands.reserve(10);
  cands.emplace_back(0.0, 0.0);
  cands.emplace_back(0.0, peak);
  cands.emplace_back(peak, 0.0);
  if (!std::isnan(level_b)) cands.emplace_back(0.0, clamp_peak(level_b, peak));
  if (!std::isnan(level_a)) cands.emplace_back(clamp_peak(level_a, peak), 0.0);
  if (std::fabs(da - db) > 1e-12 && ga > 0.0 && gb > 0.0) {
    const double q = ((1.0 + db) * inv_ga - (1.0 + da) * inv_gb) / (da - db);
    if (std::isfinite(q)) {
      cands.emplace_back(clamp_peak(q, peak), clamp_peak(peak - q, peak));
      cands.emplace_back(clamp_peak(peak - q, peak), clamp_peak(q, peak));
      // Interior stationary pairs; kept only when inside the simplex.
      const double pa_int = level_a - q;
      if (finite_pair(pa_int, q) && pa_int >= 0.0 && q >= 0.0 && pa_int + q <= peak)
        cands.emplace_back(pa_int, q);
      const double pb_int = level_b - q;
      if (finite_pair(q, pb_int) && q >= 0.0 && pb_int >= 0.0 && q + pb_int <= peak)
        cands.emplace_back(q, pb_int);
    }
  }

  Best best;
  for (const auto& [pa, pb] : cands) {
    if (!finite_pair(pa, pb)) continue;
    StateAllocation alloc;
    alloc.first_decoded = first_decoded;
    alloc.p1 = first_decoded == 0 ? pa : pb;
    alloc.p2 = first_decoded == 0 ? pb : pa;
    if (alloc.p1 + alloc.p2 > peak * (1.0 + 1e-12)) continue;
    alloc.value = sub_lagrangian(alloc, g1, g2, Access::Noma, duals);
    best.consider(alloc);
  }
  return best.alloc;
}

namespace {

// d/dalpha1 of the OMA sub-Lagrangian along the per-user water levels at
// total price `level_price` (= lambda + facet multiplier).
double oma_alpha_derivative(double g1, double g2, double w1, double w2, double level_price,
                            double q1, double q2) {
  return w1 * std::log2(w1 * g1 / (level_price * kLn2)) -
         w2 * std::log2(w2 * g2 / (level_price * kLn2)) - level_price * q1 +
         level_price * q2;
}

}  // namespace

StateAllocation oma_state_opt(double g1, double g2, const DualMultipliers& duals,
                              double peak_power) {
  if (g1 < 0.0 || g2 < 0.0) throw std::domain_error("negative effective gain");
  if (peak_power <= 0.0) throw std::domain_error("peak power must be > 0");
  const double lam = duals.lambda;
  const double w1 = 1.0 + duals.delta;
  const double w2 = 1.0 + duals.mu;
  const double peak = peak_power;

  struct Cand {
    double p1, p2, a1;
  };
  std::vector<Cand> cands;
  cands.reserve(16);
  cands.push_back({0.0, 0.0, 0.5});
  cands.push_back({0.0, peak, 0.0});
  cands.push_back({peak, 0.0, 1.0});

  const double inv_g1 = g1 > 0.0 ? 1.0 / g1 : std::numeric_limits<double>::infinity();
  const double inv_g2 = g2 > 0.0 ? 1.0 / g2 : std::numeric_limits<double>::infinity();
  if (lam > 0.0) {
    const double c1 = w1 / (lam * kLn2) - inv_g1;
    const double c2 = w2 / (lam * kLn2) - inv_g2;
    if (std::isfinite(c2)) cands.push_back({0.0, clamp_peak(c2, peak), 0.0});
    if (std::isfinite(c1)) cands.push_back({clamp_peak(c1, peak), 0.0, 1.0});

    // Jointly stationary point: alpha derivative vanishes and the split is
    // feasible; measure-zero in multiplier space but kept for completeness.
    if (g1 > 0.0 && g2 > 0.0 && c1 > 0.0 && c2 > 0.0) {
      const double h = oma_alpha_derivative(g1, g2, w1, w2, lam, c1, c2);
      const double h_scale =
          std::max({1.0, std::fabs(w1 * std::log2(std::max(w1 * g1 / (lam * kLn2), 1e-300))),
                    std::fabs(lam * (c1 - c2))});
      if (std::fabs(h) <= 1e-6 * h_scale) {
        double lo = 0.0, hi = 1.0;
        if (std::fabs(c1 - c2) > 1e-15) {
          const double split = (peak - c2) / (c1 - c2);
          if (c1 > c2)
            hi = std::clamp(split, 0.0, 1.0);
          else
            lo = std::clamp(split, 0.0, 1.0);
        }
        if (hi >= lo) {
          const double a1 = 0.5 * (lo + hi);
          const double p1 = c1 * a1, p2 = c2 * (1.0 - a1);
          if (p1 + p2 <= peak * (1.0 + 1e-12)) cands.push_back({p1, p2, a1});
        }
      }
    }
  }

  // Peak-power facet with time sharing: raise the effective power price
  // until the alpha derivative vanishes; every sign change yields a
  // stationary split with p1 + p2 = peak.
  if (g1 > 0.0 && g2 > 0.0) {
    const double s_hi = std::max(w1 * g1, w2 * g2) / kLn2;  // both levels hit zero
    const double s_lo = std::max(lam, 1e-9 * s_hi);
    if (s_hi > s_lo) {
      const auto q_at = [&](double s, double w, double inv_g) {
        return w / (s * kLn2) - inv_g;
      };
      const auto phi = [&](double s) {
        return oma_alpha_derivative(g1, g2, w1, w2, s, q_at(s, w1, inv_g1),
                                    q_at(s, w2, inv_g2));
      };
      const int kScan = 64;
      double prev_s = s_lo, prev_phi = phi(s_lo);
      for (int i = 1; i <= kScan; ++i) {
        const double s =
            s_lo * std::pow(s_hi / s_lo, static_cast<double>(i) / kScan);
        const double f = phi(s);
        if (std::isfinite(prev_phi) && std::isfinite(f) && prev_phi * f <= 0.0) {
          double a = prev_s, bnd = s;
          for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (a + bnd);
            if (phi(a) * phi(mid) <= 0.0)
              bnd = mid;
            else
              a = mid;
          }
          const double s_star = 0.5 * (a + bnd);
          const double q1 = q_at(s_star, w1, inv_g1);
          const double q2 = q_at(s_star, w2, inv_g2);
          if (q1 >= -1e-12 && q2 >= -1e-12 && std::fabs(q1 - q2) > 1e-15) {
            const double a1 = (peak - q2) / (q1 - q2);
            if (a1 >= 0.0 && a1 <= 1.0) {
              const double p1 = std::max(q1, 0.0) * a1;
              const double p2 = std::max(q2, 0.0) * (1.0 - a1);
              cands.push_back({p1, p2, a1});
            }
          }
        }
        prev_s = s;
        prev_phi = f;
      }
    }
  }

  Best best;
  for (const auto& c : cands) {
    if (!finite_pair(c.p1, c.p2) || !std::isfinite(c.a1)) continue;
    StateAllocation alloc;
    alloc.p1 = c.p1;
    alloc.p2 = c.p2;
    alloc.alpha1 = std::clamp(c.a1, 0.0, 1.0);
    if (alloc.p1 + alloc.p2 > peak * (1.0 + 1e-12)) continue;
    alloc.value = sub_lagrangian(alloc, g1, g2, Access::Fdma, duals);
    best.consider(alloc);
  }
  if (best.alloc.p1 == 0.0 && best.alloc.p2 == 0.0) best.alloc.alpha1 = 0.5;
  return best.alloc;
}

StateAllocation grid_oracle(double g1, double g2, const DualMultipliers& duals,
                            double peak_power, Access scheme, int resolution,
                            int first_decoded) {
  if (resolution < 100) throw std::invalid_argument("grid oracle resolution must be >= 100");
  const double step = peak_power / resolution;
  Best best;
  if (scheme == Access::Noma) {
    for (int i = 0; i <= resolution; ++i) {
      const double p1 = i * step;
      for (int j = 0; j + i <= resolution; ++j) {
        StateAllocation alloc;
        alloc.p1 = p1;
        alloc.p2 = j * step;
        alloc.first_decoded = first_decoded;
        alloc.value = sub_lagrangian(alloc, g1, g2, scheme, duals);
        best.consider(alloc);
      }
    }
  } else {
    for (int a = 0; a <= resolution; ++a) {
      const double alpha1 = static_cast<double>(a) / resolution;
      for (int i = 0; i <= resolution; ++i) {
        const double p1 = i * step;
        for (int j = 0; j + i <= resolution; ++j) {
          StateAllocation alloc;
          alloc.p1 = p1;
          alloc.p2 = j * step;
          alloc.alpha1 = alpha1;
          alloc.value = sub_lagrangian(alloc, g1, g2, scheme, duals);
          best.consider(alloc);
        }
      }
    }
  }
  return best.alloc;
}

DualSolveResult dual_solve(const std::vector<StateGains>& states, const PowerBudget& budget,
                           Access scheme, const DualSolveOptions& options) {
  budget.validate();
  if (states.empty()) throw std::invalid_argument("dual_solve: no fading states");
  const auto n = states.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  DualMultipliers duals{1.0 / budget.avg_power, 0.1, 0.1};
  const double step_lambda = 0.1 / budget.avg_power;
  const double step_rate = 0.1;

  std::vector<StateAllocation> allocs(n);
  std::vector<double> powers(n), rates1(n), rates2(n), lagr(n);

  const auto solve_states = [&](const DualMultipliers& d) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
      const auto& st = states[i];
      allocs[i] = scheme == Access::Noma
                      ? noma_state_opt(st.g1, st.g2, d, budget.peak_power, st.first_decoded)
                      : oma_state_opt(st.g1, st.g2, d, budget.peak_power);
      const auto [r1, r2] = state_rates(allocs[i], st.g1, st.g2, scheme);
      powers[i] = allocs[i].p1 + allocs[i].p2;
      rates1[i] = r1;
      rates2[i] = r2;
      lagr[i] = allocs[i].value;
    }
  };

  DualSolveResult out;
  DualMultipliers best_duals = duals;
  double best_dual_value = std::numeric_limits<double>::infinity();
  double scale_l = 0.0, scale_d = 0.0, scale_m = 0.0;
  double best_min_rate = 0.0;

  int t = 1;
  for (; t <= options.max_iterations; ++t) {
    solve_states(duals);
    const double avg_p = pairwise_sum(powers) * inv_n;
    const double avg_r1 = pairwise_sum(rates1) * inv_n;
    const double avg_r2 = pairwise_sum(rates2) * inv_n;
    const double dual_value = pairwise_sum(lagr) * inv_n + duals.lambda * budget.avg_power -
                              (duals.delta + duals.mu) * budget.min_rate;
    best_min_rate = std::max(best_min_rate, std::min(avg_r1, avg_r2));
    if (dual_value < best_dual_value) {
      best_dual_value = dual_value;
      best_duals = duals;
    }

    const double g_l = budget.avg_power - avg_p;         // dD/dlambda
    const double g_d = avg_r1 - budget.min_rate;         // dD/ddelta
    const double g_m = avg_r2 - budget.min_rate;         // dD/dmu
    if (t == 1) {
      scale_l = std::max(std::fabs(g_l), 1e-9 * budget.avg_power);
      scale_d = std::max({std::fabs(g_d), std::fabs(g_m), 1e-9});
      scale_m = scale_d;
    }

    const double primal = avg_r1 + avg_r2;
    const double gap = std::fabs(best_dual_value - primal) / std::max(1e-9, std::fabs(best_dual_value));
    const bool power_ok = avg_p <= budget.avg_power * (1.0 + options.power_tol) &&
                          (duals.lambda <= 1e-6 ||
                           std::fabs(avg_p - budget.avg_power) <= options.power_tol * budget.avg_power);
    const bool rate_ok = avg_r1 >= budget.min_rate - options.rate_tol &&
                         avg_r2 >= budget.min_rate - options.rate_tol;
    if (power_ok && rate_ok && gap <= options.gap_tol) break;

    const double sl = step_lambda / std::sqrt(static_cast<double>(t));
    const double sr = step_rate / std::sqrt(static_cast<double>(t));
    duals.lambda = std::max(0.0, duals.lambda - sl * (g_l / scale_l));
    duals.delta = std::max(0.0, duals.delta - sr * (g_d / scale_d));
    duals.mu = std::max(0.0, duals.mu - sr * (g_m / scale_m));

    // When every state is peak-clamped and the average budget is met, the
    // dual is flat in lambda below the current value; walk to the smallest
    // optimal multiplier.
    if (avg_p <= budget.avg_power * (1.0 + 1e-12)) {
      double min_total = powers[0];
      for (double v : powers) min_total = std::min(min_total, v);
      if (min_total >= budget.peak_power * (1.0 - 1e-9))
        duals.lambda *= std::max(0.0, 1.0 - 0.5 / std::sqrt(static_cast<double>(t)));
    }
  }

  // Report the allocations at the best dual point found.
  solve_states(best_duals);
  out.duals = best_duals;
  out.allocations = allocs;
  out.avg_power = pairwise_sum(powers) * inv_n;
  out.avg_rate1 = pairwise_sum(rates1) * inv_n;
  out.avg_rate2 = pairwise_sum(rates2) * inv_n;
  out.primal_value = out.avg_rate1 + out.avg_rate2;
  out.dual_value = pairwise_sum(lagr) * inv_n + best_duals.lambda * budget.avg_power -
                   (best_duals.delta + best_duals.mu) * budget.min_rate;
  out.power_residual = (out.avg_power - budget.avg_power) / budget.avg_power;
  out.rate_residual = std::max(budget.min_rate - out.avg_rate1, budget.min_rate - out.avg_rate2);
  out.comp_slack = std::max(
      {std::fabs(best_duals.lambda * (budget.avg_power - out.avg_power)),
       std::fabs(best_duals.delta * (out.avg_rate1 - budget.min_rate)),
       std::fabs(best_duals.mu * (out.avg_rate2 - budget.min_rate))});
  out.max_min_rate = std::max(best_min_rate, std::min(out.avg_rate1, out.avg_rate2));
  out.feasible = out.rate_residual <= 10.0 * options.rate_tol;
  out.iterations = std::min(t, options.max_iterations);
  return out;
}

}  // namespace irsma
