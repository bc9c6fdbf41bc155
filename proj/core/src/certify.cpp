#include "noma/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "noma/errors.hpp"

namespace noma {

namespace {

constexpr double kGolden = 0.6180339887498949;
constexpr int kMaxBisection = 60;

void check_layer(std::span<const ComplexVector> w, const ComplexVector& h, int k) {
  if (w.empty()) throw ContractError("sinr: need at least one beamformer");
  if (k < 0 || k >= static_cast<int>(w.size())) throw ContractError("sinr: position out of range");
  for (const auto& v : w) {
    if (v.dim() != h.dim()) throw ContractError("sinr: beamformer and channel dimensions differ");
  }
}

double nominal_sinr(std::span<const ComplexVector> w, const ComplexVector& h, double sigma2, int k) {
  return achieved_sinr(w, h, ComplexVector::zeros(h.dim()), sigma2, k);
}

// C(lambda) = [[A + lambda I, b], [b^H, c - lambda e^2]] for one threshold.
struct Pencil {
  Eigen::MatrixXcd a;
  Eigen::VectorXcd b;
  double c = 0.0;
  double eps_sq = 0.0;

  double margin(double lambda) const {
    const auto m = a.rows();
    Eigen::MatrixXcd full(m + 1, m + 1);
    full.topLeftCorner(m, m) = a;
    full.topLeftCorner(m, m).diagonal().array() += lambda;
    full.topRightCorner(m, 1) = b;
    full.bottomLeftCorner(1, m) = b.adjoint();
    full(m, m) = c - lambda * eps_sq;
    return min_eigenvalue(HermitianMatrix::hermitian_part(full));
  }
};

Pencil make_pencil(std::span<const ComplexVector> w, const ComplexVector& h_hat, double epsilon, double sigma2,
                   int k, double gamma) {
  const int m = h_hat.dim();
  Eigen::MatrixXcd phi = Eigen::MatrixXcd::Zero(m, m);
  Eigen::MatrixXcd nu = Eigen::MatrixXcd::Zero(m, m);
  for (int p = 0; p < static_cast<int>(w.size()); ++p) {
    const Eigen::VectorXcd& v = w[static_cast<std::size_t>(p)].eigen();
    if (p == k) phi += v * v.adjoint();
    if (p > k) phi -= gamma * v * v.adjoint();
    if (p < k) nu -= gamma * v * v.adjoint();
  }
  const Eigen::VectorXcd& h = h_hat.eigen();
  Pencil pen;
  pen.a = phi + nu;
  pen.b = phi * h;
  pen.c = h.dot(phi * h).real() - gamma * sigma2;
  pen.eps_sq = epsilon * epsilon;
  return pen;
}

struct Feasibility {
  bool feasible = false;
  double lambda = 0.0;
};

// min-eig of the pencil is concave in lambda, so a bracketed golden-section
// search finds its maximum; stop as soon as a nonnegative value shows up.
Feasibility search_multiplier(const Pencil& pen) {
  if (pen.margin(0.0) >= 0.0) return {true, 0.0};
  // Grow the bracket until the margin stops improving.
  double hi = 1.0;
  double f_hi = pen.margin(hi);
  while (true) {
    if (f_hi >= 0.0) return {true, hi};
    const double next = 2.0 * hi;
    const double f_next = pen.margin(next);
    if (!(f_next > f_hi) || next > 1e300) {
      hi = next;
      if (f_next >= 0.0) return {true, next};
      break;
    }
    hi = next;
    f_hi = f_next;
  }
  double lo = 0.0;
  double x1 = hi - kGolden * (hi - lo);
  double x2 = lo + kGolden * (hi - lo);
  double f1 = pen.margin(x1);
  double f2 = pen.margin(x2);
  while (hi - lo > 1e-10 && hi - lo > 1e-13 * hi) {
    if (f1 >= 0.0) return {true, x1};
    if (f2 >= 0.0) return {true, x2};
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kGolden * (hi - lo);
      f2 = pen.margin(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kGolden * (hi - lo);
      f1 = pen.margin(x1);
    }
  }
  const double mid = 0.5 * (lo + hi);
  return {pen.margin(mid) >= 0.0, mid};
}

}  // namespace

double SinrReport::min_worst_case() const {
  double out = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) out = std::min(out, e.worst_case);
  return out;
}

double achieved_sinr(std::span<const ComplexVector> w, const ComplexVector& h_true_l, const ComplexVector& delta_l,
                     double sigma2_l, int k) {
  check_layer(w, h_true_l, k);
  if (delta_l.dim() != h_true_l.dim()) throw ContractError("sinr: error and channel dimensions differ");
  if (!(sigma2_l > 0.0)) throw ContractError("sinr: noise variance must be positive");
  double interference = 0.0;
  for (int m = 0; m < static_cast<int>(w.size()); ++m) {
    const ComplexVector& v = w[static_cast<std::size_t>(m)];
    if (m < k) interference += std::norm(delta_l.inner(v));
    if (m > k) interference += std::norm(h_true_l.inner(v));
  }
  return std::norm(h_true_l.inner(w[static_cast<std::size_t>(k)])) / (interference + sigma2_l);
}

double sprocedure_margin(std::span<const ComplexVector> w, const ComplexVector& h_hat_l, double epsilon,
                         double sigma2_l, int k, double gamma, double lambda) {
  check_layer(w, h_hat_l, k);
  return make_pencil(w, h_hat_l, epsilon, sigma2_l, k, gamma).margin(lambda);
}

SinrEntry worst_case_sinr(std::span<const ComplexVector> w, const ComplexVector& h_hat_l, double epsilon,
                          double sigma2_l, int k, double tol) {
  check_layer(w, h_hat_l, k);
  if (!(epsilon >= 0.0)) throw ContractError("worst_case_sinr: epsilon must be nonnegative");
  if (!(sigma2_l > 0.0)) throw ContractError("worst_case_sinr: noise variance must be positive");
  if (!(tol > 0.0)) throw ContractError("worst_case_sinr: tolerance must be positive");
  SinrEntry e;
  e.k = k;
  e.nominal = nominal_sinr(w, h_hat_l, sigma2_l, k);
  e.certified = true;
  if (epsilon == 0.0 || e.nominal == 0.0) {
    e.worst_case = e.nominal;
    return e;
  }
  // gamma = 0 always holds (lambda = 0 gives [I; h^H] W_k [I, h] >= 0).
  double lo = 0.0;
  double hi = e.nominal;
  double lambda_lo = 0.0;
  for (int it = 0; it < kMaxBisection && hi - lo > tol * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Feasibility f = search_multiplier(make_pencil(w, h_hat_l, epsilon, sigma2_l, k, mid));
    if (f.feasible) {
      lo = mid;
      lambda_lo = f.lambda;
    } else {
      hi = mid;
    }
  }
  e.worst_case = lo;
  e.lambda_star = lambda_lo;
  return e;
}

SinrReport certify_design(const BeamDesign& design, const Scenario& s, std::span<const ComplexVector> h_hat) {
  s.validate();
  if (!design.solved()) throw ContractError("certify_design: design is not solved");
  if (static_cast<int>(h_hat.size()) != s.num_users) throw ContractError("certify_design: need K channels");
  SinrReport report;
  if (design.scheme == Scheme::oma) {
    for (int u = 0; u < s.num_users; ++u) {
      const auto iu = static_cast<std::size_t>(u);
      const std::span<const ComplexVector> solo(&design.w[iu], 1);
      SinrEntry e = worst_case_sinr(solo, h_hat[iu], s.epsilon[iu], s.noise_var[iu], 0);
      e.k = u;
      e.l = u;
      report.entries.push_back(e);
    }
    return report;
  }
  for (int k = 0; k < s.num_users; ++k) {
    for (int l = k; l < s.num_users; ++l) {
      const auto user = static_cast<std::size_t>(design.order[static_cast<std::size_t>(l)]);
      SinrEntry e = worst_case_sinr(design.w, h_hat[user], s.epsilon[user], s.noise_var[user], k);
      e.l = l;
      report.entries.push_back(e);
    }
  }
  return report;
}

double min_achieved_sinr(const BeamDesign& design, const ChannelSet& cs, const Scenario& s) {
  if (!design.solved()) throw ContractError("min_achieved_sinr: design is not solved");
  double out = std::numeric_limits<double>::infinity();
  if (design.scheme == Scheme::oma) {
    for (int u = 0; u < s.num_users; ++u) {
      const auto iu = static_cast<std::size_t>(u);
      const std::span<const ComplexVector> solo(&design.w[iu], 1);
      const double slot = achieved_sinr(solo, cs.h_true[iu], cs.delta[iu], s.noise_var[iu], 0);
      out = std::min(out, std::pow(1.0 + slot, 1.0 / s.num_users) - 1.0);
    }
    return out;
  }
  for (int k = 0; k < s.num_users; ++k) {
    for (int l = k; l < s.num_users; ++l) {
      const auto user = static_cast<std::size_t>(design.order[static_cast<std::size_t>(l)]);
      out = std::min(out, achieved_sinr(design.w, cs.h_true[user], cs.delta[user], s.noise_var[user], k));
    }
  }
  return out;
}

}  // namespace noma
