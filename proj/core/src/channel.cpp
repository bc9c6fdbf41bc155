#include "noma/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "noma/errors.hpp"

namespace noma {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename T>
std::vector<T> broadcast(std::vector<T> v, int k, const char* what) {
  if (v.size() == 1 && k > 1) v.assign(static_cast<std::size_t>(k), v.front());
  if (static_cast<int>(v.size()) != k) {
    throw ContractError(std::string("Scenario: ") + what + " needs one value or one per user");
  }
  return v;
}

}  // namespace

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double linear) { return 10.0 * std::log10(linear); }

Scenario Scenario::uniform(int antennas, int users, double epsilon, double gamma_min_db, double noise_var) {
  Scenario s;
  s.num_antennas = antennas;
  s.num_users = users;
  s.epsilon.assign(static_cast<std::size_t>(std::max(users, 0)), epsilon);
  s.gamma_min.assign(static_cast<std::size_t>(std::max(users, 0)), db_to_linear(gamma_min_db));
  s.noise_var.assign(static_cast<std::size_t>(std::max(users, 0)), noise_var);
  s.validate();
  return s;
}

void Scenario::validate() const {
  if (num_antennas < 1) throw ContractError("Scenario: M must be at least 1");
  if (num_users < 1) throw ContractError("Scenario: K must be at least 1");
  const auto k = static_cast<std::size_t>(num_users);
  if (epsilon.size() != k || gamma_min.size() != k || noise_var.size() != k) {
    throw ContractError("Scenario: per-user lists must have K entries");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!(epsilon[i] >= 0.0)) throw ContractError("Scenario: epsilon must be nonnegative");
    if (!(gamma_min[i] > 0.0)) throw ContractError("Scenario: gamma_min must be positive");
    if (!(noise_var[i] > 0.0)) throw ContractError("Scenario: noise_var must be positive");
  }
  if (!(min_dist_m > 0.0) || !(min_dist_m < cell_radius_m)) {
    throw ContractError("Scenario: need 0 < min_dist_m < cell_radius_m");
  }
  if (!(shadow_std_db >= 0.0) || !(pathloss_exp >= 0.0)) {
    throw ContractError("Scenario: shadowing and path-loss exponent must be nonnegative");
  }
}

Scenario Scenario::with_epsilon(double eps) const {
  Scenario s = *this;
  s.epsilon = broadcast(std::vector<double>{eps}, num_users, "epsilon");
  s.validate();
  return s;
}

Scenario Scenario::with_gamma_db(double gamma_db) const {
  Scenario s = *this;
  s.gamma_min = broadcast(std::vector<double>{db_to_linear(gamma_db)}, num_users, "gamma_min");
  s.validate();
  return s;
}

Rng trial_rng(std::uint64_t seed, std::uint64_t trial_index, std::uint64_t stream) {
  std::uint64_t z = splitmix64(seed);
  z = splitmix64(z ^ trial_index);
  z = splitmix64(z ^ (stream * 0xd1b54a32d192ed03ULL));
  return Rng(z);
}

ComplexVector complex_normal(Rng& rng, int dim) {
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  Eigen::VectorXcd v(dim);
  for (int i = 0; i < dim; ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v(i) = cplx(re, im);
  }
  return ComplexVector(std::move(v));
}

ComplexVector sample_error(Rng& rng, int dim, double epsilon, bool surface_only) {
  if (!(epsilon >= 0.0)) throw ContractError("sample_error: epsilon must be nonnegative");
  if (dim < 1) throw ContractError("sample_error: dim must be positive");
  // Draws are consumed identically for every epsilon so streams stay aligned.
  ComplexVector dir = complex_normal(rng, dim);
  double n = dir.norm();
  while (n == 0.0) {
    dir = complex_normal(rng, dim);
    n = dir.norm();
  }
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (epsilon == 0.0) return ComplexVector::zeros(dim);
  const double radius = surface_only ? epsilon : epsilon * std::pow(u, 1.0 / (2.0 * dim));
  return dir * cplx(radius / n, 0.0);
}

std::vector<int> order_users(std::span<const ComplexVector> h_hat) {
  if (h_hat.empty()) throw ContractError("order_users: empty channel list");
  std::vector<int> idx(h_hat.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> norms(h_hat.size());
  for (std::size_t i = 0; i < h_hat.size(); ++i) norms[i] = h_hat[i].norm();
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return norms[static_cast<std::size_t>(a)] < norms[static_cast<std::size_t>(b)];
  });
  return idx;
}

ChannelSet generate_channels(const Scenario& s, std::uint64_t trial_index, bool errors_on_sphere) {
  s.validate();
  Rng geometry = trial_rng(s.seed, trial_index, 0);
  Rng errors = trial_rng(s.seed, trial_index, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> shadow(0.0, 1.0);

  ChannelSet cs;
  const int m = s.num_antennas;
  for (int k = 0; k < s.num_users; ++k) {
    const double u = unit(geometry);
    double d = 0.0;
    if (s.distance_law == DistanceLaw::uniform_distance) {
      d = s.min_dist_m + u * (s.cell_radius_m - s.min_dist_m);
    } else {
      const double r0 = s.min_dist_m * s.min_dist_m;
      const double r1 = s.cell_radius_m * s.cell_radius_m;
      d = std::sqrt(r0 + u * (r1 - r0));
    }
    const double shadow_db = s.shadow_std_db * shadow(geometry);
    const double gain = db_to_linear(shadow_db) * std::pow(d / s.min_dist_m, -s.pathloss_exp);
    ComplexVector h = complex_normal(geometry, m) * cplx(std::sqrt(gain), 0.0);
    ComplexVector delta = sample_error(errors, m, s.epsilon[static_cast<std::size_t>(k)], errors_on_sphere);
    cs.distance_m.push_back(d);
    cs.large_scale_gain.push_back(gain);
    cs.h_true.push_back(h + delta);
    cs.h_hat.push_back(std::move(h));
    cs.delta.push_back(std::move(delta));
  }
  cs.order = order_users(cs.h_hat);
  return cs;
}

}  // namespace noma
