#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "noma/hermitian.hpp"

namespace noma {

using Rng = std::mt19937_64;

enum class DistanceLaw {
  uniform_distance,  // d ~ U[min_dist, radius]
  uniform_area,      // user position uniform over the annulus
};

/// Physical and design parameters of one downlink cell.
struct Scenario {
  int num_antennas = 8;
  int num_users = 3;
  /// Error-ball radius per user, in the same units as the channel vectors.
  std::vector<double> epsilon;
  /// SINR thresholds per user, linear scale.
  std::vector<double> gamma_min;
  std::vector<double> noise_var;
  double cell_radius_m = 1000.0;
  double min_dist_m = 100.0;
  double shadow_std_db = 8.0;
  double pathloss_exp = 3.8;
  std::uint64_t seed = 1;
  DistanceLaw distance_law = DistanceLaw::uniform_distance;

  /// Same epsilon, threshold (given in dB) and noise for every user.
  static Scenario uniform(int antennas, int users, double epsilon, double gamma_min_db, double noise_var);

  void validate() const;
  Scenario with_epsilon(double eps) const;
  Scenario with_gamma_db(double gamma_db) const;
};

double db_to_linear(double db);
double linear_to_db(double linear);

/// Channels of one Monte-Carlo trial.  `order[p]` is the user decoded at
/// position p (position 0 is the weakest estimated channel).
struct ChannelSet {
  std::vector<ComplexVector> h_hat;
  std::vector<ComplexVector> h_true;
  std::vector<ComplexVector> delta;
  std::vector<int> order;
  std::vector<double> distance_m;
  std::vector<double> large_scale_gain;
};

/// Independent stream for (seed, trial, stream) built by SplitMix64 mixing.
Rng trial_rng(std::uint64_t seed, std::uint64_t trial_index, std::uint64_t stream);

/// Deterministic in (scenario, trial_index).  Errors use a separate stream
/// from the estimates and are drawn before scaling, so changing epsilon
/// rescales the same error directions and leaves h_hat untouched.
ChannelSet generate_channels(const Scenario& s, std::uint64_t trial_index, bool errors_on_sphere = false);

/// Uniform on the radius-epsilon sphere (surface_only) or in the closed ball.
ComplexVector sample_error(Rng& rng, int dim, double epsilon, bool surface_only);

/// Users sorted by ascending estimated channel norm, ties by lower index.
std::vector<int> order_users(std::span<const ComplexVector> h_hat);

/// i.i.d. CN(0, 1) entries.
ComplexVector complex_normal(Rng& rng, int dim);

}  // namespace noma
