#pragma once

// Small dense block-diagonal SDPs in LMI form:
//
//   minimize    c^T x
//   subject to  F_b(x) = F_b0 + sum_i x_i F_bi  >= 0   for every block b
//
// with Hermitian (possibly complex) blocks.  The dual handled alongside is
//
//   maximize    -sum_b <F_b0, Y_b>
//   subject to  sum_b <F_bi, Y_b> = c_i,   Y_b >= 0.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noma/hermitian.hpp"

namespace noma {

/// One stored entry of a Hermitian coefficient matrix.  Only row <= col is
/// stored; the (col, row) entry is the conjugate.  Diagonal values must be real.
struct LmiEntry {
  int row = 0;
  int col = 0;
  cplx value{};

  bool operator==(const LmiEntry&) const = default;
};

struct LmiTerm {
  int var = 0;
  std::vector<LmiEntry> coeff;

  bool operator==(const LmiTerm&) const = default;
};

struct LmiBlock {
  int dim = 0;
  std::string label;
  std::vector<LmiEntry> constant;
  std::vector<LmiTerm> terms;

  /// Accumulates value into (row, col), mirroring to the upper triangle.
  void add_constant(int row, int col, cplx value);
  void add_coeff(int var, int row, int col, cplx value);

  HermitianMatrix constant_matrix() const;
  HermitianMatrix coeff_matrix(int var) const;
  HermitianMatrix evaluate(std::span<const double> x) const;
  bool is_real() const;
  /// Drops entries that are exactly zero and merges duplicates.
  void compress();

  bool operator==(const LmiBlock&) const = default;
};

struct LmiProblem {
  int num_vars = 0;
  std::vector<double> objective;
  std::vector<LmiBlock> blocks;

  /// Throws ContractError on out-of-range indices or a mismatched objective.
  void validate() const;
  bool operator==(const LmiProblem&) const = default;
};

enum class SolveStatus { optimal, infeasible, max_iters, numerical_failure };

std::string to_string(SolveStatus status);

struct IterationTrace {
  int iter = 0;
  double gap = 0.0;
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  double step_primal = 0.0;
  double step_dual = 0.0;
  double mu = 0.0;
};

struct SolverOptions {
  double tol_gap = 1e-7;
  double tol_feas = 1e-8;
  int max_iters = 100;
  double step_fraction = 0.98;
  /// Centering used when the predictor-corrector is disabled, and the floor
  /// on centering while the iterate is still far from feasible.
  double mu_reduction = 0.3;
  bool predictor_corrector = true;
  /// Rescale each block by a diagonal congruence before solving.  A run
  /// that ends in max_iters or numerical_failure is retried once with the
  /// other setting; iterations of both runs are counted.
  bool equilibrate = true;
  /// Optional strictly feasible starting point (F(x0) > 0).
  std::optional<std::vector<double>> warm_start;
  /// Stop with status infeasible once a dual-feasible iterate proves the
  /// optimal value exceeds this level (no point with c^T x <= cutoff).
  std::optional<double> objective_cutoff;
  std::function<void(const IterationTrace&)> trace;

  void validate() const;
};

struct SdpSolution {
  std::vector<double> x;
  std::vector<HermitianMatrix> dual_blocks;
  double objective = 0.0;
  double dual_objective = 0.0;
  double gap = 0.0;
  SolveStatus status = SolveStatus::numerical_failure;
  int iterations = 0;
  /// Residual of the normalized Farkas certificate when status is infeasible.
  double certificate_residual = 0.0;
  std::string certificate;
  double merit_start = 0.0;
  double merit_end = 0.0;
};

struct Residuals {
  /// max(0, -lambda_min(F(x))) / (1 + ||F0||).  For an infeasible solution
  /// this is instead -r, where r >= 0 is the certificate residual
  /// ||A(Y)|| / (-<F0, Y>); a negative value therefore flags a certificate.
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  double gap = 0.0;
};

SdpSolution solve(const LmiProblem& problem, const SolverOptions& opts = {});

/// Recomputes feasibility and gap from the problem data alone.
Residuals residuals(const LmiProblem& problem, const SdpSolution& sol);

}  // namespace noma
