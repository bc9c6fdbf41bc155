#pragma once

// Robust NOMA power minimization as an LMI-form SDP.
//
// Users are handled in decoding position p = 0..K-1 (weakest estimated
// channel first).  For every signal position k and every receiver position
// l >= k the worst-case SINR constraint becomes, via the S-procedure with
// multiplier lambda_kl >= 0,
//
//   C_kl = [ lambda I + phi_k + nu_k      phi_k h_l                           ]  >= 0
//          [ h_l^H phi_k                  h_l^H phi_k h_l - s_l - lambda e_l^2 ]
//
//   phi_k = W_k / gamma_k - sum_{m>k} W_m,     nu_k = - sum_{m<k} W_m,
//
// where h_l is the estimated channel, s_l the receiver noise variance and
// e_l its error radius.  Minimizing sum_k tr(W_k) over W_k >= 0 gives the
// relaxed design.  w_k is read off the principal eigenpair of W_k; an
// optimum that is not rank one within tolerance is flagged, never repaired.

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "noma/channel.hpp"
#include "noma/hermitian.hpp"
#include "noma/sdp.hpp"

namespace noma {

enum class Scheme { robust, nonrobust, oma };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

/// Coordinates of the decision vector x.  Each W_p takes M^2 real entries:
/// the diagonal, then (re, im) for every strictly upper position.
class VarIndex {
 public:
  VarIndex() = default;
  VarIndex(int antennas, int users, bool with_multipliers);
  /// Multipliers only for receiver positions l with layer_multiplier[l].
  VarIndex(int antennas, int users, std::vector<bool> layer_multiplier);

  int antennas() const { return antennas_; }
  int users() const { return users_; }
  int num_vars() const { return num_vars_; }
  bool has_multipliers() const { return num_multipliers_ > 0; }
  bool has_multiplier(int k, int l) const;

  int diag(int p, int i) const;
  int re(int p, int i, int j) const;
  int im(int p, int i, int j) const;
  /// Multiplier of signal position k at receiver position l >= k.
  int lambda(int k, int l) const;
  int num_multipliers() const { return num_multipliers_; }

  HermitianMatrix unpack(std::span<const double> x, int p) const;

 private:
  int offdiag_slot(int i, int j) const;

  int antennas_ = 0;
  int users_ = 0;
  std::vector<bool> layer_multiplier_;
  std::vector<int> lambda_slot_;
  int num_multipliers_ = 0;
  int num_vars_ = 0;
};

struct SdpProblem {
  LmiProblem lmi;
  VarIndex index;
  std::vector<int> order;
  /// Block index of C_kl (or its scalar form when epsilon is zero).
  std::vector<std::vector<int>> layer_block;

  /// Lower bound on the optimal power from the own-receiver constraints
  /// alone (1 when no positive bound exists); sets the scale of the
  /// normalized solve.
  double power_hint = 1.0;

  /// One real coordinate per diagonal entry of W_0, used to normalize the power.
  int pivot_var() const { return index.diag(0, 0); }

  bool operator==(const SdpProblem& other) const {
    return lmi == other.lmi && order == other.order && layer_block == other.layer_block;
  }
};

/// Robust SDP.  A user with zero error radius gets the exact limit of C_kl
/// as lambda grows: the scalar block h_l^H phi_k h_l - s_l >= 0 and no
/// multiplier.  Throws ContractError on dimension mismatches.
SdpProblem build_robust_sdp(const Scenario& s, std::span<const ComplexVector> h_hat,
                            std::span<const int> order);

/// The same structure with every error radius set to zero.
SdpProblem build_nonrobust_sdp(const Scenario& s, std::span<const ComplexVector> h_hat,
                               std::span<const int> order);

/// Per-user single-user robust problems for time-division OMA.  Each user
/// gets a 1/K time share, so its target becomes (1 + gamma)^K - 1.
std::vector<SdpProblem> build_oma_design(const Scenario& s, std::span<const ComplexVector> h_hat);

double oma_target(double gamma_min, int users);

/// Rank ratio above tolerance after extraction.
class RankOneViolation : public std::runtime_error {
 public:
  RankOneViolation(int position, double ratio);
  int position() const { return position_; }
  double ratio() const { return ratio_; }

 private:
  int position_;
  double ratio_;
};

struct Extraction {
  std::vector<ComplexVector> w;
  /// Second-largest over largest eigenvalue per matrix (0 when W is zero).
  std::vector<double> rank_ratio;
};

/// w_k = sqrt(lambda_1) u_1.  Never throws on rank.
Extraction extract_beamformers(std::span<const HermitianMatrix> w_mats);
/// Throws RankOneViolation for the first ratio above tol_rank.
Extraction extract_beamformers(std::span<const HermitianMatrix> w_mats, double tol_rank);

/// Minimizes the power through the equivalent normalized problem
///   maximize s  subject to  s F0 + sum_i x_i F_i >= 0,  c^T x = 1,
/// with c^T x = 1 eliminated through the pivot coordinate.  Its optimum is
/// 1 / P*, it is strictly feasible for every channel draw, and s* <= 0
/// proves the power problem infeasible.  The returned solution is mapped back
/// to the coordinates of `prob` (x / s, objective P* = 1 / s).  s starts
/// scaled by `power_hint` and is rescaled by its estimate until the gap holds
/// relative to P* as well; `iterations` sums all rounds.  An s* within
/// tolerance of zero that rescaling cannot resolve is reported infeasible.
SdpSolution solve_min_power(const SdpProblem& prob, const SolverOptions& opts = {});

struct BeamDesign {
  Scheme scheme = Scheme::robust;
  SolveStatus status = SolveStatus::numerical_failure;
  /// Decoding order used for the design; W and w are in decoding position.
  /// OMA designs keep user order (order is the identity).
  std::vector<int> order;
  std::vector<HermitianMatrix> W;
  std::vector<ComplexVector> w;
  /// lambda[k][l - k] for robust layers; empty for layers without multiplier.
  std::vector<std::vector<double>> lambda;
  std::vector<double> rank_ratio;
  /// Sum of ||w_k||^2; for OMA the time average (1/K) sum_k ||w_k||^2.
  double total_power = 0.0;
  /// Solver objective, sum_k tr(W_k) (time-averaged for OMA).
  double sdp_objective = 0.0;
  int iterations = 0;
  /// Some W_k has rank ratio above DesignOptions::tol_rank; w does not
  /// realize the relaxed optimum and the design must not be trusted.
  bool rank_violation = false;

  bool solved() const { return status == SolveStatus::optimal; }
  bool accepted() const { return solved() && !rank_violation; }
  double max_rank_ratio() const;
};

struct DesignOptions {
  SolverOptions solver;
  /// Skip the SDP when a cheap necessary condition already proves the robust
  /// problem infeasible.
  bool prescreen = true;
  double tol_rank = 1e-4;
};

BeamDesign design_noma(const Scenario& s, std::span<const ComplexVector> h_hat, std::span<const int> order,
                       Scheme scheme, const DesignOptions& opts = {});
BeamDesign design_oma(const Scenario& s, std::span<const ComplexVector> h_hat, const DesignOptions& opts = {});
/// Dispatches on scheme using the trial's estimates and decoding order.
BeamDesign design(const Scenario& s, const ChannelSet& cs, Scheme scheme, const DesignOptions& opts = {});

/// Necessary condition for robust feasibility in closed form; false proves
/// infeasibility.  See the implementation for the derivation.
bool robust_may_be_feasible(const Scenario& s, std::span<const ComplexVector> h_hat, std::span<const int> order);

}  // namespace noma
