#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>
#include <cstdint>
#include <random>

namespace irsma {

// Node placement and large-scale propagation parameters. Distances in
// meters, reference_loss is a linear power ratio.
struct ScenarioGeometry {
  Eigen::Vector3d bs_position{0.0, 0.0, 0.0};
  Eigen::Vector3d irs_position{70.0, 0.0, 0.0};
  std::array<Eigen::Vector3d, 2> user_positions{Eigen::Vector3d{80.0, 10.0, 0.0},
                                                Eigen::Vector3d{80.0, 10.0, 0.0}};
  double reference_distance = 1.0;
  double reference_loss = 1e-3;
  double exponent_bs_user = 3.5;
  double exponent_bs_irs = 2.2;
  double exponent_irs_user = 2.8;

  void validate() const;  // throws std::invalid_argument
};

struct FadingParams {
  double rician_factor = 1.9952623149688795;  // 3 dB, linear
  int num_elements = 30;
  double noise_power = 1e-12;  // Watts
  std::uint64_t seed = 1;

  void validate() const;
};

// One block-fading realization. h[k] is the direct BS->user k channel,
// g the BS->IRS vector, r[k] the IRS->user k vector.
struct ChannelState {
  std::array<std::complex<double>, 2> h{};
  Eigen::VectorXcd g;
  std::array<Eigen::VectorXcd, 2> r{};
  long index = 0;
};

// rho0 * (d/d0)^-phi
double path_loss(double distance, double exponent, const ScenarioGeometry& geom);

// Circularly symmetric complex Gaussian with E|x|^2 = mean_power.
std::complex<double> sample_rayleigh(std::mt19937_64& rng, double mean_power);

// sqrt(mean_power) * (sqrt(v/(1+v)) los + sqrt(1/(1+v)) nlos).
// los_component must be unit modulus; v may be +infinity (pure LoS).
std::complex<double> sample_rician(std::mt19937_64& rng, double mean_power,
                                   double rician_factor,
                                   std::complex<double> los_component);

// Deterministic in (params.seed, index). Element n's draws do not depend
// on num_elements, so realizations are nested across element counts.
ChannelState sample_state(const ScenarioGeometry& geom, const FadingParams& params,
                          long index);

// Uniform draw of both users in the quarter disc facing the BS/IRS
// (x <= cx, y <= cy), one draw per experiment.
std::array<Eigen::Vector3d, 2> sample_user_positions(std::uint64_t seed,
                                                     const Eigen::Vector3d& center,
                                                     double radius);

}  // namespace irsma
