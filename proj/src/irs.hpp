#pragma once

#include <Eigen/Dense>

#include "channel.hpp"

namespace irsma {

// IRS reflection phases. quantization_bits == 0 marks a continuous
// configuration; otherwise every angle lies on the 2^L point codebook
// {0, dtheta, ..., (2^L - 1) dtheta} with dtheta = 2 pi / 2^L.
struct PhaseConfig {
  Eigen::VectorXd theta;
  int quantization_bits = 0;

  bool discrete() const { return quantization_bits > 0; }
  void validate() const;  // throws std::invalid_argument
};

PhaseConfig random_phases(std::uint64_t seed, std::uint64_t tag, int num_elements);

// Lifted cascade channel for one user: z has N+1 entries, z[n] = conj(r_n) g_n
// for n < N and z[N] = h, so that |u_bar . z|^2 equals the combined channel
// power |h + r^H diag(e^{j theta}) g|^2 with u_bar = [e^{j theta_1} ... 1].
struct CascadeMatrix {
  Eigen::VectorXcd z;

  int elements() const { return static_cast<int>(z.size()) - 1; }
};

CascadeMatrix build_cascade(const ChannelState& state, int user);

// h + r^H Theta g evaluated directly from the channel realization.
std::complex<double> combined_channel(const ChannelState& state, const PhaseConfig& phases,
                                      int user);

// |u_bar . z|^2 given a cascade vector.
double cascade_power(const CascadeMatrix& cascade, const PhaseConfig& phases);

// gamma_k = |h + r^H Theta g|^2 / sigma^2.
double effective_gain(const ChannelState& state, const PhaseConfig& phases, int user,
                      double noise_power);

// Nearest codebook point per element under circular distance on [0, 2pi);
// exact midpoints round toward the smaller codebook phase.
PhaseConfig quantize(const PhaseConfig& continuous, int bits);

double circular_distance(double a, double b);

// Wrap an angle into [0, 2pi).
double wrap_angle(double theta);

}  // namespace irsma
