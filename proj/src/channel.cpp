#include "channel.hpp"

#include <cmath>
#include <stdexcept>

#include "rng.hpp"

namespace irsma {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void ScenarioGeometry::validate() const {
  if (reference_distance <= 0.0) throw std::invalid_argument("reference distance must be > 0");
  if (reference_loss <= 0.0 || reference_loss > 1.0)
    throw std::invalid_argument("reference loss must be in (0, 1]");
  if (exponent_bs_user < 2.0 || exponent_bs_irs < 2.0 || exponent_irs_user < 2.0)
    throw std::invalid_argument("path loss exponents must be >= 2");
  const double d_bi = (irs_position - bs_position).norm();
  if (d_bi <= 0.0) throw std::invalid_argument("BS and IRS positions coincide");
  for (const auto& u : user_positions) {
    if ((u - bs_position).norm() <= 0.0 || (u - irs_position).norm() <= 0.0)
      throw std::invalid_argument("user position coincides with BS or IRS");
  }
}

void FadingParams::validate() const {
  if (rician_factor < 0.0) throw std::invalid_argument("Rician factor must be >= 0");
  if (num_elements < 1) throw std::invalid_argument("need at least one IRS element");
  if (noise_power <= 0.0) throw std::invalid_argument("noise power must be > 0");
}

double path_loss(double distance, double exponent, const ScenarioGeometry& geom) {
  if (distance <= 0.0) throw std::domain_error("path_loss: nonpositive distance");
  return geom.reference_loss * std::pow(distance / geom.reference_distance, -exponent);
}

std::complex<double> sample_rayleigh(std::mt19937_64& rng, double mean_power) {
  if (mean_power < 0.0) throw std::domain_error("sample_rayleigh: negative mean power");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double re = normal(rng);
  const double im = normal(rng);
  return std::sqrt(mean_power / 2.0) * std::complex<double>(re, im);
}

std::complex<double> sample_rician(std::mt19937_64& rng, double mean_power,
                                   double rician_factor,
                                   std::complex<double> los_component) {
  if (rician_factor < 0.0) throw std::domain_error("sample_rician: negative Rician factor");
  // v/(1+v) written as 1/(1+1/v) so v = +inf gives exactly 1.
  const double los_frac = 1.0 / (1.0 + 1.0 / rician_factor);
  const double nlos_frac = 1.0 / (1.0 + rician_factor);
  const std::complex<double> nlos = sample_rayleigh(rng, 1.0);
  return std::sqrt(mean_power) *
         (std::sqrt(los_frac) * los_component + std::sqrt(nlos_frac) * nlos);
}

ChannelState sample_state(const ScenarioGeometry& geom, const FadingParams& params,
                          long index) {
  geom.validate();
  params.validate();

  const int n = params.num_elements;
  const double d_bi = (geom.irs_position - geom.bs_position).norm();
  const double pl_bi = path_loss(d_bi, geom.exponent_bs_irs, geom);
  std::array<double, 2> pl_bu{}, pl_iu{};
  for (int k = 0; k < 2; ++k) {
    pl_bu[k] = path_loss((geom.user_positions[k] - geom.bs_position).norm(),
                         geom.exponent_bs_user, geom);
    pl_iu[k] = path_loss((geom.user_positions[k] - geom.irs_position).norm(),
                         geom.exponent_irs_user, geom);
  }

  ChannelState state;
  state.index = index;
  state.g.resize(n);
  state.r[0].resize(n);
  state.r[1].resize(n);

  const auto idx = static_cast<std::uint64_t>(index);
  {
    auto rng = make_stream(params.seed, Stream::DirectLink, idx);
    state.h[0] = sample_rayleigh(rng, pl_bu[0]);
    state.h[1] = sample_rayleigh(rng, pl_bu[1]);
  }

  // One steering angle per link per state; element phases follow a
  // half-wavelength ULA so they stay unit modulus.
  std::array<double, 3> sin_angle{};
  {
    auto rng = make_stream(params.seed, Stream::LosAngles, idx);
    std::uniform_real_distribution<double> uni(0.0, 2.0 * kPi);
    for (auto& s : sin_angle) s = std::sin(uni(rng));
  }

  for (int e = 0; e < n; ++e) {
    auto rng = make_stream(params.seed, Stream::IrsLink, idx, static_cast<std::uint64_t>(e));
    const auto steer = [&](int link) {
      return std::polar(1.0, kPi * static_cast<double>(e) * sin_angle[link]);
    };
    state.g(e) = sample_rician(rng, pl_bi, params.rician_factor, steer(0));
    state.r[0](e) = sample_rician(rng, pl_iu[0], params.rician_factor, steer(1));
    state.r[1](e) = sample_rician(rng, pl_iu[1], params.rician_factor, steer(2));
  }
  return state;
}

std::array<Eigen::Vector3d, 2> sample_user_positions(std::uint64_t seed,
                                                     const Eigen::Vector3d& center,
                                                     double radius) {
  auto rng = make_stream(seed, Stream::UserPlacement);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::array<Eigen::Vector3d, 2> users;
  for (auto& u : users) {
    const double rad = radius * std::sqrt(uni(rng));
    const double ang = kPi + 0.5 * kPi * uni(rng);  // x <= cx, y <= cy quadrant
    u = center + Eigen::Vector3d(rad * std::cos(ang), rad * std::sin(ang), 0.0);
  }
  return users;
}

}  // namespace irsma
