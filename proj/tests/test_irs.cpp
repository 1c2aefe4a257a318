#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "channel.hpp"
#include "irs.hpp"

using namespace irsma;

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

ChannelState make_state(int n, std::uint64_t seed) {
  ScenarioGeometry g;
  g.user_positions = {Eigen::Vector3d{75.0, 5.0, 0.0}, Eigen::Vector3d{62.0, -8.0, 0.0}};
  FadingParams p;
  p.num_elements = n;
  p.seed = seed;
  return sample_state(g, p, 0);
}

}  // namespace

TEST_CASE("cascade matches the all-ones example") {
  ChannelState s;
  s.h = {std::complex<double>(1.0, 0.0), std::complex<double>(1.0, 0.0)};
  s.g = Eigen::VectorXcd::Ones(2);
  s.r[0] = Eigen::VectorXcd::Ones(2);
  s.r[1] = Eigen::VectorXcd::Ones(2);
  PhaseConfig ph;
  ph.theta = Eigen::VectorXd::Zero(2);
  const auto cascade = build_cascade(s, 0);
  CHECK(cascade_power(cascade, ph) == doctest::Approx(9.0));
}

TEST_CASE("no reflected path leaves the direct channel") {
  ChannelState s;
  s.h = {std::complex<double>(0.3, -0.4), std::complex<double>(0.0, 0.0)};
  s.g = Eigen::VectorXcd::Zero(1);
  s.r[0] = Eigen::VectorXcd::Ones(1);
  s.r[1] = Eigen::VectorXcd::Ones(1);
  const auto cascade = build_cascade(s, 0);
  PhaseConfig ph;
  ph.theta.resize(1);
  for (double t : {0.0, 1.0, 2.5, 5.9}) {
    ph.theta(0) = t;
    CHECK(cascade_power(cascade, ph) == doctest::Approx(std::norm(s.h[0])));
  }
}

TEST_CASE("cascade identity against direct evaluation") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uni(0.0, kTwoPi);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const ChannelState s = make_state(n, 1000 + trial);
    PhaseConfig ph;
    ph.theta.resize(n);
    for (int e = 0; e < n; ++e) ph.theta(e) = uni(rng);
    for (int user = 0; user < 2; ++user) {
      const auto cascade = build_cascade(s, user);
      const double direct = std::norm(combined_channel(s, ph, user));
      const double lifted = cascade_power(cascade, ph);
      const double scale = std::max(direct, 1e-30);
      CHECK(std::fabs(direct - lifted) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("cascade entries") {
  const ChannelState s = make_state(3, 5);
  const auto cascade = build_cascade(s, 1);
  REQUIRE(cascade.z.size() == 4);
  for (int e = 0; e < 3; ++e)
    CHECK(cascade.z(e) == std::conj(s.r[1](e)) * s.g(e));
  CHECK(cascade.z(3) == s.h[1]);
  CHECK_THROWS_AS(build_cascade(s, 2), std::invalid_argument);
}

TEST_CASE("effective gain") {
  ChannelState s;
  s.h = {std::complex<double>(0.0, 0.0), std::complex<double>(1.0, 0.0)};
  s.g = Eigen::VectorXcd::Zero(1);
  s.r[0] = Eigen::VectorXcd::Zero(1);
  s.r[1] = Eigen::VectorXcd::Zero(1);
  PhaseConfig ph;
  ph.theta = Eigen::VectorXd::Zero(1);
  CHECK(effective_gain(s, ph, 0, 1.0) == doctest::Approx(0.0));
  CHECK(effective_gain(s, ph, 1, 1.0) == doctest::Approx(1.0));

  const ChannelState t = make_state(5, 9);
  PhaseConfig ph5;
  ph5.theta.resize(5);
  for (int e = 0; e < 5; ++e) ph5.theta(e) = 0.4 * e;
  std::complex<double> acc = t.h[0];
  for (int e = 0; e < 5; ++e)
    acc += std::conj(t.r[0](e)) * std::polar(1.0, ph5.theta(e)) * t.g(e);
  CHECK(effective_gain(t, ph5, 0, 1e-12) ==
        doctest::Approx(std::norm(acc) / 1e-12).epsilon(1e-12));
}

TEST_CASE("quantization reference points") {
  PhaseConfig ph;
  ph.theta.resize(1);

  ph.theta(0) = 2.0;
  CHECK(quantize(ph, 1).theta(0) == doctest::Approx(M_PI));

  ph.theta(0) = 0.3;
  CHECK(quantize(ph, 3).theta(0) == doctest::Approx(0.0));

  ph.theta(0) = kTwoPi - 0.01;
  CHECK(quantize(ph, 1).theta(0) == doctest::Approx(0.0));
}

TEST_CASE("quantization properties") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uni(0.0, kTwoPi);
  for (int bits = 1; bits <= 4; ++bits) {
    const double step = kTwoPi / (1 << bits);
    PhaseConfig ph;
    ph.theta.resize(64);
    for (int i = 0; i < 64; ++i) ph.theta(i) = uni(rng);
    const PhaseConfig q = quantize(ph, bits);
    q.validate();
    for (int i = 0; i < 64; ++i)
      CHECK(circular_distance(ph.theta(i), q.theta(i)) <= step / 2 + 1e-12);
    const PhaseConfig qq = quantize(q, bits);
    CHECK(qq.theta == q.theta);
  }
}

TEST_CASE("quantization midpoint ties go to the smaller phase") {
  PhaseConfig ph;
  ph.theta.resize(2);
  const double step = kTwoPi / 4;  // bits = 2
  ph.theta(0) = step / 2;          // between 0 and step
  ph.theta(1) = kTwoPi - step / 2; // between 3*step and 0 (wrap)
  const PhaseConfig q = quantize(ph, 2);
  CHECK(q.theta(0) == doctest::Approx(0.0));
  CHECK(q.theta(1) == doctest::Approx(0.0));
}

TEST_CASE("phase config validation") {
  PhaseConfig ph;
  ph.theta.resize(1);
  ph.theta(0) = -0.1;
  CHECK_THROWS_AS(ph.validate(), std::invalid_argument);
  ph.theta(0) = 1.0;
  ph.quantization_bits = 2;
  CHECK_THROWS_AS(ph.validate(), std::invalid_argument);
  ph.theta(0) = M_PI;
  ph.quantization_bits = 1;
  CHECK_NOTHROW(ph.validate());
}
