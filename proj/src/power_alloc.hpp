#pragma once

#include <utility>
#include <vector>

namespace irsma {

enum class Access { Noma, Tdma, Fdma };

// Lagrange multipliers: lambda prices average power, delta and mu the two
// per-user average rate floors.
struct DualMultipliers {
  double lambda = 0.0;
  double delta = 0.0;
  double mu = 0.0;
};

// Per-fading-state decision. first_decoded is the user whose signal is
// decoded (and cancelled) first under NOMA; alpha1 the user-1 share of the
// orthogonal resource under TDMA/FDMA.
struct StateAllocation {
  double p1 = 0.0;
  double p2 = 0.0;
  double alpha1 = 0.5;
  int first_decoded = 0;
  double value = 0.0;  // sub-Lagrangian at the optimum
};

struct PowerBudget {
  double avg_power = 1.0;   // Watts
  double peak_power = 2.0;  // Watts
  double min_rate = 0.0;    // bits/s/Hz
  void validate() const;
};

// Rates in bits/s/Hz. g1, g2 are effective gains |h + r^H Theta g|^2 / sigma^2,
// so g * p is an SNR.
std::pair<double, double> state_rates(const StateAllocation& alloc, double g1, double g2,
                                      Access scheme);

double sub_lagrangian(const StateAllocation& alloc, double g1, double g2, Access scheme,
                      const DualMultipliers& duals);

// Candidate-set maximizer of the per-state NOMA sub-Lagrangian.
StateAllocation noma_state_opt(double g1, double g2, const DualMultipliers& duals,
                               double peak_power, int first_decoded);

// Candidate-set maximizer of the per-state OMA sub-Lagrangian over
// (p1, p2, alpha1).
StateAllocation oma_state_opt(double g1, double g2, const DualMultipliers& duals,
                              double peak_power);

// Brute-force verifier: exhaustive evaluation on a uniform grid (plus the
// same tie-breaking). Used by tests and the oracle-check CLI only.
StateAllocation grid_oracle(double g1, double g2, const DualMultipliers& duals,
                            double peak_power, Access scheme, int resolution,
                            int first_decoded = 0);

struct StateGains {
  double g1 = 0.0;
  double g2 = 0.0;
  int first_decoded = 0;
};

struct DualSolveOptions {
  int max_iterations = 500;
  double power_tol = 1e-2;  // relative
  double rate_tol = 1e-2;   // absolute, bits/s/Hz
  double gap_tol = 1e-2;    // relative
};

struct DualSolveResult {
  DualMultipliers duals;
  std::vector<StateAllocation> allocations;
  double avg_power = 0.0;
  double avg_rate1 = 0.0;
  double avg_rate2 = 0.0;
  double primal_value = 0.0;  // average sum rate of the reported allocations
  double dual_value = 0.0;
  double power_residual = 0.0;      // (E[p] - avg budget) / avg budget
  double rate_residual = 0.0;       // max_k (min_rate - E[R_k]), >0 means violated
  double comp_slack = 0.0;          // max |multiplier * constraint slack|
  bool feasible = true;
  double max_min_rate = 0.0;        // best min-user average rate seen
  int iterations = 0;
};

// Projected subgradient on (lambda, delta, mu) with per-state closed-form
// subproblem solutions.
DualSolveResult dual_solve(const std::vector<StateGains>& states, const PowerBudget& budget,
                           Access scheme, const DualSolveOptions& options = {});

}  // namespace irsma
