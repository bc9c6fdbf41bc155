#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "noma/errors.hpp"
#include "noma/sdp.hpp"

namespace noma {

namespace {

void accumulate(std::vector<LmiEntry>& entries, int row, int col, cplx value) {
  if (row > col) {
    std::swap(row, col);
    value = std::conj(value);
  }
  entries.push_back({row, col, value});
}

Eigen::MatrixXcd densify(const std::vector<LmiEntry>& entries, int dim) {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
  for (const auto& e : entries) {
    if (e.row == e.col) {
      m(e.row, e.row) += e.value.real();
    } else {
      m(e.row, e.col) += e.value;
      m(e.col, e.row) += std::conj(e.value);
    }
  }
  return m;
}

std::vector<LmiEntry> merged(const std::vector<LmiEntry>& entries) {
  std::map<std::pair<int, int>, cplx> acc;
  for (const auto& e : entries) acc[{e.row, e.col}] += e.value;
  std::vector<LmiEntry> out;
  out.reserve(acc.size());
  for (const auto& [pos, v] : acc) {
    if (v != cplx{}) out.push_back({pos.first, pos.second, v});
  }
  return out;
}

}  // namespace

void LmiBlock::add_constant(int row, int col, cplx value) { accumulate(constant, row, col, value); }

void LmiBlock::add_coeff(int var, int row, int col, cplx value) {
  auto it = std::find_if(terms.begin(), terms.end(), [var](const LmiTerm& t) { return t.var == var; });
  if (it == terms.end()) {
    terms.push_back({var, {}});
    it = std::prev(terms.end());
  }
  accumulate(it->coeff, row, col, value);
}

HermitianMatrix LmiBlock::constant_matrix() const {
  return HermitianMatrix::hermitian_part(densify(constant, dim));
}

HermitianMatrix LmiBlock::coeff_matrix(int var) const {
  for (const auto& t : terms) {
    if (t.var == var) return HermitianMatrix::hermitian_part(densify(t.coeff, dim));
  }
  return HermitianMatrix::zeros(dim);
}

HermitianMatrix LmiBlock::evaluate(std::span<const double> x) const {
  Eigen::MatrixXcd m = densify(constant, dim);
  for (const auto& t : terms) {
    if (t.var < 0 || static_cast<std::size_t>(t.var) >= x.size()) {
      throw ContractError("LmiBlock::evaluate: variable index out of range");
    }
    m += x[static_cast<std::size_t>(t.var)] * densify(t.coeff, dim);
  }
  return HermitianMatrix::hermitian_part(m);
}

bool LmiBlock::is_real() const {
  auto real_entry = [](const LmiEntry& e) { return e.value.imag() == 0.0; };
  if (!std::all_of(constant.begin(), constant.end(), real_entry)) return false;
  return std::all_of(terms.begin(), terms.end(), [&](const LmiTerm& t) {
    return std::all_of(t.coeff.begin(), t.coeff.end(), real_entry);
  });
}

void LmiBlock::compress() {
  constant = merged(constant);
  for (auto& t : terms) t.coeff = merged(t.coeff);
  std::erase_if(terms, [](const LmiTerm& t) { return t.coeff.empty(); });
  std::sort(terms.begin(), terms.end(), [](const LmiTerm& a, const LmiTerm& b) { return a.var < b.var; });
}

void LmiProblem::validate() const {
  if (num_vars < 1) throw ContractError("LmiProblem: needs at least one variable");
  if (static_cast<int>(objective.size()) != num_vars) {
    throw ContractError("LmiProblem: objective length does not match num_vars");
  }
  if (blocks.empty()) throw ContractError("LmiProblem: no constraint blocks");
  auto check_entries = [](const LmiBlock& b, const std::vector<LmiEntry>& entries) {
    for (const auto& e : entries) {
      if (e.row < 0 || e.col < 0 || e.row >= b.dim || e.col >= b.dim) {
        throw ContractError("LmiProblem: entry outside block '" + b.label + "'");
      }
      if (e.row == e.col && e.value.imag() != 0.0) {
        throw ContractError("LmiProblem: complex diagonal entry in block '" + b.label + "'");
      }
    }
  };
  for (const auto& b : blocks) {
    if (b.dim < 1) throw ContractError("LmiProblem: empty block '" + b.label + "'");
    check_entries(b, b.constant);
    for (const auto& t : b.terms) {
      if (t.var < 0 || t.var >= num_vars) {
        throw ContractError("LmiProblem: variable index out of range in block '" + b.label + "'");
      }
      check_entries(b, t.coeff);
    }
  }
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::infeasible:
      return "infeasible";
    case SolveStatus::max_iters:
      return "max_iters";
    case SolveStatus::numerical_failure:
      return "numerical_failure";
  }
  return "unknown";
}

void SolverOptions::validate() const {
  if (!(tol_gap > 0) || !(tol_feas > 0) || max_iters < 1 || !(mu_reduction > 0) || !(mu_reduction < 1)) {
    throw ContractError("SolverOptions: tolerances, iteration limit and mu_reduction must be positive");
  }
  if (!(step_fraction > 0.0 && step_fraction < 1.0)) {
    throw ContractError("SolverOptions: step_fraction must lie in (0, 1)");
  }
}

}  // namespace noma
