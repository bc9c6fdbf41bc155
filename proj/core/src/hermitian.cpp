#include "noma/hermitian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "noma/errors.hpp"

namespace noma {

ComplexVector::ComplexVector(Eigen::VectorXcd entries) : entries_(std::move(entries)) {}

ComplexVector::ComplexVector(std::initializer_list<cplx> entries)
    : entries_(static_cast<Eigen::Index>(entries.size())) {
  Eigen::Index i = 0;
  for (const cplx& z : entries) entries_(i++) = z;
}

ComplexVector ComplexVector::zeros(int dim) {
  if (dim < 1) throw ContractError("ComplexVector: dim must be positive");
  return ComplexVector(Eigen::VectorXcd::Zero(dim));
}

ComplexVector ComplexVector::basis(int dim, int index) {
  if (index < 0 || index >= dim) throw ContractError("ComplexVector::basis: index out of range");
  Eigen::VectorXcd e = Eigen::VectorXcd::Zero(dim);
  e(index) = 1.0;
  return ComplexVector(std::move(e));
}

cplx ComplexVector::inner(const ComplexVector& other) const {
  if (dim() != other.dim()) throw ContractError("ComplexVector::inner: dimension mismatch");
  return entries_.dot(other.entries_);  // Eigen's dot conjugates the left operand
}

ComplexVector ComplexVector::operator+(const ComplexVector& other) const {
  if (dim() != other.dim()) throw ContractError("ComplexVector: dimension mismatch");
  return ComplexVector(Eigen::VectorXcd(entries_ + other.entries_));
}

ComplexVector ComplexVector::operator-(const ComplexVector& other) const {
  if (dim() != other.dim()) throw ContractError("ComplexVector: dimension mismatch");
  return ComplexVector(Eigen::VectorXcd(entries_ - other.entries_));
}

ComplexVector ComplexVector::operator*(cplx scale) const {
  return ComplexVector(Eigen::VectorXcd(entries_ * scale));
}

HermitianMatrix::HermitianMatrix(Eigen::MatrixXcd entries, Trusted) : entries_(std::move(entries)) {}

HermitianMatrix::HermitianMatrix(const Eigen::MatrixXcd& entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0) {
    throw ContractError("HermitianMatrix: input must be square and non-empty");
  }
  const double scale = std::max(1.0, entries.cwiseAbs().maxCoeff());
  const double asym = (entries - entries.adjoint()).cwiseAbs().maxCoeff();
  if (!(asym <= kSymmetryTolerance * scale)) {
    throw ContractError("HermitianMatrix: input is not Hermitian (asymmetry " +
                        std::to_string(asym) + ")");
  }
  entries_ = 0.5 * (entries + entries.adjoint());
}

HermitianMatrix HermitianMatrix::hermitian_part(const Eigen::MatrixXcd& entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0) {
    throw ContractError("HermitianMatrix: input must be square and non-empty");
  }
  return HermitianMatrix(Eigen::MatrixXcd(0.5 * (entries + entries.adjoint())), Trusted{});
}

HermitianMatrix HermitianMatrix::zeros(int dim) {
  if (dim < 1) throw ContractError("HermitianMatrix: dim must be positive");
  return HermitianMatrix(Eigen::MatrixXcd::Zero(dim, dim), Trusted{});
}

HermitianMatrix HermitianMatrix::identity(int dim) {
  if (dim < 1) throw ContractError("HermitianMatrix: dim must be positive");
  return HermitianMatrix(Eigen::MatrixXcd::Identity(dim, dim), Trusted{});
}

HermitianMatrix HermitianMatrix::diagonal(std::span<const double> values) {
  if (values.empty()) throw ContractError("HermitianMatrix: dim must be positive");
  const auto n = static_cast<Eigen::Index>(values.size());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = values[static_cast<std::size_t>(i)];
  return HermitianMatrix(std::move(m), Trusted{});
}

double HermitianMatrix::quadratic_form(const ComplexVector& v) const {
  if (v.dim() != dim()) throw ContractError("quadratic_form: dimension mismatch");
  return v.eigen().dot(entries_ * v.eigen()).real();
}

HermitianMatrix HermitianMatrix::operator+(const HermitianMatrix& other) const {
  if (dim() != other.dim()) throw ContractError("HermitianMatrix: dimension mismatch");
  return HermitianMatrix(Eigen::MatrixXcd(entries_ + other.entries_), Trusted{});
}

HermitianMatrix HermitianMatrix::operator-(const HermitianMatrix& other) const {
  if (dim() != other.dim()) throw ContractError("HermitianMatrix: dimension mismatch");
  return HermitianMatrix(Eigen::MatrixXcd(entries_ - other.entries_), Trusted{});
}

HermitianMatrix HermitianMatrix::operator*(double scale) const {
  return HermitianMatrix(Eigen::MatrixXcd(entries_ * scale), Trusted{});
}

int BlockDiagMatrix::total_dim() const {
  int n = 0;
  for (const auto& b : blocks_) n += b.dim();
  return n;
}

double BlockDiagMatrix::min_eigenvalue() const {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks_) lo = std::min(lo, noma::min_eigenvalue(b));
  return lo;
}

bool BlockDiagMatrix::is_psd(double tol) const {
  return std::all_of(blocks_.begin(), blocks_.end(),
                     [tol](const HermitianMatrix& b) { return noma::is_psd(b, tol); });
}

HermitianMatrix outer(const ComplexVector& v) {
  if (v.dim() < 1) throw ContractError("outer: empty vector");
  return HermitianMatrix::hermitian_part(v.eigen() * v.eigen().adjoint());
}

std::vector<double> eigenvalues(const HermitianMatrix& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h.eigen(), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

double min_eigenvalue(const HermitianMatrix& h) {
  if (h.dim() == 1) return h(0, 0).real();
  return eigenvalues(h).front();
}

double max_eigenvalue(const HermitianMatrix& h) {
  if (h.dim() == 1) return h(0, 0).real();
  return eigenvalues(h).back();
}

ComplexVector fix_phase(const ComplexVector& v, double threshold) {
  for (int i = 0; i < v.dim(); ++i) {
    const double mag = std::abs(v[i]);
    if (mag > threshold) return v * (std::conj(v[i]) / mag);
  }
  return v;
}

EigPair principal_eigpair(const HermitianMatrix& h) {
  const int n = h.dim();
  if (h.eigen().cwiseAbs().maxCoeff() == 0.0) {
    return {0.0, ComplexVector::basis(n, 0)};
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h.eigen());
  const Eigen::VectorXcd top = solver.eigenvectors().col(n - 1).normalized();
  return {solver.eigenvalues()(n - 1), fix_phase(ComplexVector(top))};
}

Eigen::MatrixXd real_embedding(const HermitianMatrix& h) {
  const Eigen::Index n = h.dim();
  Eigen::MatrixXd out(2 * n, 2 * n);
  const Eigen::MatrixXd re = h.eigen().real();
  const Eigen::MatrixXd im = h.eigen().imag();
  out.topLeftCorner(n, n) = re;
  out.topRightCorner(n, n) = -im;
  out.bottomLeftCorner(n, n) = im;
  out.bottomRightCorner(n, n) = re;
  return out;
}

bool is_psd(const HermitianMatrix& h, double tol) { return min_eigenvalue(h) >= -tol; }

}  // namespace noma
