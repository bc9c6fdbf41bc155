#pragma once

// SINR of fixed beamformers: achieved values at concrete channels and
// certified worst cases over the error ball.
//
// Beamformers are indexed by decoding position.  The signal of position k
// seen at receiver l >= k, after cancelling positions m < k, has SINR
//
//   |h_l^H w_k|^2 / ( sum_{m<k} |d_l^H w_m|^2 + sum_{m>k} |h_l^H w_m|^2 + s_l )
//
// where h_l is the true channel, d_l its estimation error and s_l the noise
// variance.  Cancellation of earlier layers leaves only the error-driven
// residual.

#include <span>
#include <vector>

#include "noma/channel.hpp"
#include "noma/formulation.hpp"
#include "noma/hermitian.hpp"

namespace noma {

struct SinrEntry {
  int k = 0;
  int l = 0;
  double worst_case = 0.0;
  double nominal = 0.0;
  bool certified = false;
  double lambda_star = 0.0;
};

struct SinrReport {
  std::vector<SinrEntry> entries;

  double min_worst_case() const;
};

double achieved_sinr(std::span<const ComplexVector> w, const ComplexVector& h_true_l, const ComplexVector& delta_l,
                     double sigma2_l, int k);

/// Largest gamma such that the SINR of position k stays >= gamma for every
/// channel h_hat_l + d with ||d|| <= epsilon.  Bisection over [0, nominal];
/// each candidate is decided by maximizing the smallest eigenvalue of the
/// S-procedure matrix over the multiplier.  `tol` is relative.
SinrEntry worst_case_sinr(std::span<const ComplexVector> w, const ComplexVector& h_hat_l, double epsilon,
                          double sigma2_l, int k, double tol = 1e-9);

/// Smallest eigenvalue of the S-procedure matrix for threshold gamma and
/// multiplier lambda.  Nonnegative means the threshold holds over the ball.
double sprocedure_margin(std::span<const ComplexVector> w, const ComplexVector& h_hat_l, double epsilon,
                         double sigma2_l, int k, double gamma, double lambda);

/// Worst-case report for every (k, l >= k) layer of a NOMA design, or every
/// user of an OMA design (k = l = user, thresholds in slot SINR).
SinrReport certify_design(const BeamDesign& design, const Scenario& s, std::span<const ComplexVector> h_hat);

/// Per-trial statistic: min over k and l >= k of the achieved SINR at the
/// trial's true channels (linear).  For OMA designs each user's slot SINR s
/// is mapped to the equal-rate full-time value (1 + s)^(1/K) - 1 first.
double min_achieved_sinr(const BeamDesign& design, const ChannelSet& cs, const Scenario& s);

}  // namespace noma
