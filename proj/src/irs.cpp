#include "irs.hpp"

#include <cmath>
#include <stdexcept>

#include "rng.hpp"

namespace irsma {

namespace {
constexpr double kTwoPi = 6.28318530717958647692;
}

double wrap_angle(double theta) {
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  if (t >= kTwoPi) t = 0.0;
  return t;
}

double circular_distance(double a, double b) {
  const double d = std::fabs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, kTwoPi - d);
}

void PhaseConfig::validate() const {
  if (quantization_bits < 0) throw std::invalid_argument("negative quantization level");
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double t = theta(i);
    if (!(t >= 0.0 && t < kTwoPi)) throw std::invalid_argument("phase outside [0, 2pi)");
    if (quantization_bits > 0) {
      const double step = kTwoPi / static_cast<double>(1 << quantization_bits);
      const double k = t / step;
      if (std::fabs(k - std::round(k)) > 1e-9)
        throw std::invalid_argument("phase off the quantization codebook");
    }
  }
}

PhaseConfig random_phases(std::uint64_t seed, std::uint64_t tag, int num_elements) {
  auto rng = make_stream(seed, Stream::PhaseInit, tag);
  std::uniform_real_distribution<double> uni(0.0, kTwoPi);
  PhaseConfig config;
  config.theta.resize(num_elements);
  for (int i = 0; i < num_elements; ++i) config.theta(i) = wrap_angle(uni(rng));
  return config;
}

CascadeMatrix build_cascade(const ChannelState& state, int user) {
  if (user < 0 || user > 1) throw std::invalid_argument("user index must be 0 or 1");
  const int n = static_cast<int>(state.g.size());
  CascadeMatrix cascade;
  cascade.z.resize(n + 1);
  for (int e = 0; e < n; ++e)
    cascade.z(e) = std::conj(state.r[user](e)) * state.g(e);
  cascade.z(n) = state.h[user];
  return cascade;
}

std::complex<double> combined_channel(const ChannelState& state, const PhaseConfig& phases,
                                      int user) {
  const int n = static_cast<int>(state.g.size());
  if (phases.theta.size() != n) throw std::invalid_argument("phase/channel size mismatch");
  std::complex<double> reflected(0.0, 0.0);
  for (int e = 0; e < n; ++e)
    reflected += std::conj(state.r[user](e)) * std::polar(1.0, phases.theta(e)) * state.g(e);
  return state.h[user] + reflected;
}

double cascade_power(const CascadeMatrix& cascade, const PhaseConfig& phases) {
  const int n = cascade.elements();
  if (phases.theta.size() != n) throw std::invalid_argument("phase/cascade size mismatch");
  std::complex<double> acc = cascade.z(n);
  for (int e = 0; e < n; ++e) acc += std::polar(1.0, phases.theta(e)) * cascade.z(e);
  return std::norm(acc);
}

double effective_gain(const ChannelState& state, const PhaseConfig& phases, int user,
                      double noise_power) {
  if (noise_power <= 0.0) throw std::domain_error("effective_gain: nonpositive noise power");
  return std::norm(combined_channel(state, phases, user)) / noise_power;
}

PhaseConfig quantize(const PhaseConfig& continuous, int bits) {
  if (bits < 1) throw std::invalid_argument("quantize: need at least one bit");
  const int points = 1 << bits;
  const double step = kTwoPi / static_cast<double>(points);
  PhaseConfig out;
  out.quantization_bits = bits;
  out.theta.resize(continuous.theta.size());
  for (Eigen::Index i = 0; i < continuous.theta.size(); ++i) {
    const double t = wrap_angle(continuous.theta(i));
    const int lo = static_cast<int>(std::floor(t / step)) % points;
    const int hi = (lo + 1) % points;
    const double phase_lo = lo * step;
    const double phase_hi = hi * step;
    const double dist_lo = circular_distance(t, phase_lo);
    const double dist_hi = circular_distance(t, phase_hi);
    double chosen;
    if (dist_lo < dist_hi) {
      chosen = phase_lo;
    } else if (dist_hi < dist_lo) {
      chosen = phase_hi;
    } else {
      chosen = std::min(phase_lo, phase_hi);
    }
    out.theta(i) = wrap_angle(chosen);
  }
  return out;
}

}  // namespace irsma
