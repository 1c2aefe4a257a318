#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "power_alloc.hpp"
#include "support/grid_refine.hpp"

using namespace irsma;

namespace {

constexpr double kLn2 = 0.69314718055994530942;

struct Draw {
  double g1, g2, peak;
  DualMultipliers duals;
};

Draw random_draw(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Draw d;
  d.g1 = std::pow(10.0, -2.0 + 5.0 * uni(rng));
  d.g2 = std::pow(10.0, -2.0 + 5.0 * uni(rng));
  d.peak = std::pow(10.0, -1.0 + 2.0 * uni(rng));
  d.duals.lambda = std::pow(10.0, -2.0 + 3.0 * uni(rng)) / d.peak;
  d.duals.delta = 2.0 * uni(rng);
  d.duals.mu = 2.0 * uni(rng);
  return d;
}

}  // namespace

TEST_CASE("state rates") {
  StateAllocation a;
  a.p1 = 0.0;
  a.p2 = 0.0;
  CHECK(state_rates(a, 3.0, 4.0, Access::Noma) == std::pair{0.0, 0.0});
  CHECK(state_rates(a, 3.0, 4.0, Access::Tdma) == std::pair{0.0, 0.0});

  a.p1 = 1.0;
  a.alpha1 = 1.0;
  const auto [r1, r2] = state_rates(a, 1.0, 1.0, Access::Fdma);
  CHECK(r1 == doctest::Approx(1.0));
  CHECK(r2 == 0.0);

  // NOMA telescoping: equal gains make the sum split-independent.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const double g = 0.2 + 5.0 * uni(rng);
    StateAllocation x;
    x.p1 = uni(rng);
    x.p2 = uni(rng);
    const auto [y1, y2] = state_rates(x, g, g, Access::Noma);
    CHECK(y1 + y2 ==
          doctest::Approx(std::log1p(g * (x.p1 + x.p2)) / kLn2).epsilon(1e-12));
  }
}

TEST_CASE("noma corner cases") {
  DualMultipliers expensive{1e6, 0.0, 0.0};
  const auto a = noma_state_opt(1e3, 10.0, expensive, 1.0, 0);
  CHECK(a.p1 == 0.0);
  CHECK(a.p2 == 0.0);

  DualMultipliers d{1.0, 0.0, 0.0};
  const auto b = noma_state_opt(0.0, 10.0, d, 5.0, 0);
  CHECK(b.p1 == 0.0);
  CHECK(b.p2 == doctest::Approx(1.0 / kLn2 - 0.1).epsilon(1e-12));
}

TEST_CASE("noma matches the grid oracle") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 150; ++trial) {
    const Draw d = random_draw(rng);
    const int order = trial % 2;
    const auto fast = noma_state_opt(d.g1, d.g2, d.duals, d.peak, order);
    const auto grid = grid_oracle(d.g1, d.g2, d.duals, d.peak, Access::Noma, 1000, order);
    const double scale = std::max(1.0, std::fabs(fast.value));
    // The candidate set must never be beaten by the grid.
    CHECK(grid.value <= fast.value + 1e-9 * scale);
    // And the closed form cannot exceed the locally refined grid optimum.
    const double refined = grid_refine::refined_max(
        d.g1, d.g2, d.duals, d.peak, Access::Noma, order, grid, fast, d.peak / 1000);
    CHECK(fast.value <= refined + 1e-3 * scale);
  }
}

TEST_CASE("oma corners and symmetry") {
  DualMultipliers expensive{1e6, 0.0, 0.0};
  const auto a = oma_state_opt(10.0, 10.0, expensive, 1.0);
  CHECK(a.p1 == 0.0);
  CHECK(a.p2 == 0.0);
  CHECK(a.alpha1 == doctest::Approx(0.5));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Draw d = random_draw(rng);
    DualMultipliers sym = d.duals;
    sym.mu = sym.delta;
    const auto x = oma_state_opt(d.g1, d.g2, sym, d.peak);
    const auto y = oma_state_opt(d.g2, d.g1, sym, d.peak);
    CHECK(x.value == doctest::Approx(y.value).epsilon(1e-12));
  }
}

TEST_CASE("oma matches the grid oracle") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 60; ++trial) {
    const Draw d = random_draw(rng);
    const auto fast = oma_state_opt(d.g1, d.g2, d.duals, d.peak);
    const auto grid = grid_oracle(d.g1, d.g2, d.duals, d.peak, Access::Fdma, 100);
    const double scale = std::max(1.0, std::fabs(fast.value));
    CHECK(grid.value <= fast.value + 1e-9 * scale);
    const double refined = grid_refine::refined_max(
        d.g1, d.g2, d.duals, d.peak, Access::Fdma, 0, grid, fast, d.peak / 100);
    CHECK(fast.value <= refined + 1e-3 * scale);
  }
}

TEST_CASE("grid oracle basics") {
  DualMultipliers huge{1e6, 0.0, 0.0};
  const auto z = grid_oracle(5.0, 2.0, huge, 1.0, Access::Noma, 100);
  CHECK(z.p1 == 0.0);
  CHECK(z.p2 == 0.0);

  DualMultipliers d{0.7, 0.3, 0.1};
  const auto coarse = grid_oracle(8.0, 3.0, d, 2.0, Access::Noma, 100);
  const auto fine = grid_oracle(8.0, 3.0, d, 2.0, Access::Noma, 400);
  CHECK(fine.value >= coarse.value - 1e-15);
  CHECK_THROWS_AS(grid_oracle(1.0, 1.0, d, 1.0, Access::Noma, 50), std::invalid_argument);
}

TEST_CASE("water-filling reduction in the single-user limit") {
  // With delta = mu = 0 and g2 >> g1, all power goes to user 2 at the
  // water level 1/(lambda ln2) - 1/g2.
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.2, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double g2 = 50.0 + 100.0 * uni(rng);
    const double g1 = 1e-4 * g2;
    const double peak = uni(rng);
    DualMultipliers d{uni(rng) / peak, 0.0, 0.0};
    const auto a = noma_state_opt(g1, g2, d, peak, 0);
    const double level = std::clamp(1.0 / (d.lambda * kLn2) - 1.0 / g2, 0.0, peak);
    CHECK(a.p1 + a.p2 == doctest::Approx(level).epsilon(1e-9).scale(peak));
  }
}

TEST_CASE("dual solve: unconstrained peak use") {
  std::vector<StateGains> states;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uni(5.0, 50.0);
  for (int i = 0; i < 64; ++i) states.push_back({uni(rng), uni(rng), 0});
  PowerBudget budget{10.0, 2.0, 0.0};
  budget.avg_power = 10.0;
  budget.peak_power = 2.0;
  // avg >= peak means the average constraint never binds.
  budget.avg_power = budget.peak_power;
  const auto res = dual_solve(states, budget, Access::Noma);
  CHECK(res.duals.lambda <= 2e-2 / budget.avg_power);
  for (const auto& a : res.allocations)
    CHECK(a.p1 + a.p2 == doctest::Approx(budget.peak_power).epsilon(1e-6));
}

TEST_CASE("dual solve: one state pins average power") {
  std::vector<StateGains> states{{40.0, 90.0, 0}};
  PowerBudget budget;
  budget.avg_power = 0.5;
  budget.peak_power = 2.0;
  budget.min_rate = 0.0;
  const auto res = dual_solve(states, budget, Access::Noma);
  CHECK(std::fabs(res.avg_power - budget.avg_power) <= 1e-2 * budget.avg_power);
}

TEST_CASE("dual solve: constraints and duality gap on random states") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<StateGains> states;
  for (int i = 0; i < 100; ++i)
    states.push_back({std::pow(10.0, 3.0 * uni(rng)), std::pow(10.0, 3.0 * uni(rng)), 0});
  for (auto& s : states) s.first_decoded = s.g1 <= s.g2 ? 0 : 1;

  PowerBudget budget;
  budget.peak_power = 1.0;
  budget.avg_power = 0.5;
  budget.min_rate = 0.5;
  for (Access scheme : {Access::Noma, Access::Fdma}) {
    const auto res = dual_solve(states, budget, scheme);
    CHECK(res.feasible);
    CHECK(res.avg_power <= budget.avg_power * 1.01);
    CHECK(res.avg_rate1 >= budget.min_rate - 1e-2);
    CHECK(res.avg_rate2 >= budget.min_rate - 1e-2);
    CHECK(std::fabs(res.dual_value - res.primal_value) <=
          1e-2 * std::max(1.0, std::fabs(res.dual_value)));
    CHECK(res.duals.lambda >= 0.0);
    CHECK(res.duals.delta >= 0.0);
    CHECK(res.duals.mu >= 0.0);
  }
}

TEST_CASE("dual solve: infeasible rate floor is reported") {
  std::vector<StateGains> states{{1e-6, 1e-6, 0}};
  PowerBudget budget;
  budget.peak_power = 1.0;
  budget.avg_power = 0.5;
  budget.min_rate = 5.0;
  const auto res = dual_solve(states, budget, Access::Noma);
  CHECK_FALSE(res.feasible);
  CHECK(res.max_min_rate < budget.min_rate);
}
