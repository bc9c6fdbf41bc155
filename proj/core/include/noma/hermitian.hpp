#pragma once

// Complex vectors and Hermitian matrices used for channels, beamformers and
// the LMI blocks of the robust design.  Values are immutable once built.

#include <complex>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace noma {

using cplx = std::complex<double>;

class ComplexVector {
 public:
  ComplexVector() = default;
  explicit ComplexVector(Eigen::VectorXcd entries);
  ComplexVector(std::initializer_list<cplx> entries);

  static ComplexVector zeros(int dim);
  /// Standard basis vector e_{index} (zero-based index).
  static ComplexVector basis(int dim, int index);

  int dim() const { return static_cast<int>(entries_.size()); }
  cplx operator[](int i) const { return entries_(i); }
  const Eigen::VectorXcd& eigen() const { return entries_; }

  double norm() const { return entries_.norm(); }
  double squared_norm() const { return entries_.squaredNorm(); }

  /// Inner product this^H * other.
  cplx inner(const ComplexVector& other) const;

  ComplexVector operator+(const ComplexVector& other) const;
  ComplexVector operator-(const ComplexVector& other) const;
  ComplexVector operator*(cplx scale) const;

  bool operator==(const ComplexVector& other) const { return entries_ == other.entries_; }

 private:
  Eigen::VectorXcd entries_;
};

class HermitianMatrix {
 public:
  /// Asymmetry beyond this (relative to the largest entry) is rejected;
  /// anything below it is treated as rounding drift and symmetrized away.
  static constexpr double kSymmetryTolerance = 1e-9;

  HermitianMatrix() = default;
  /// Builds from a square matrix, symmetrizing as (A + A^H)/2.  Throws
  /// ContractError if A is not square or is not Hermitian within tolerance.
  explicit HermitianMatrix(const Eigen::MatrixXcd& entries);

  static HermitianMatrix zeros(int dim);
  static HermitianMatrix identity(int dim);
  static HermitianMatrix diagonal(std::span<const double> values);
  /// Skips the symmetry check; the input is still symmetrized.
  static HermitianMatrix hermitian_part(const Eigen::MatrixXcd& entries);

  int dim() const { return static_cast<int>(entries_.rows()); }
  cplx operator()(int row, int col) const { return entries_(row, col); }
  const Eigen::MatrixXcd& eigen() const { return entries_; }

  double trace() const { return entries_.diagonal().real().sum(); }
  /// Real quadratic form v^H H v.
  double quadratic_form(const ComplexVector& v) const;

  HermitianMatrix operator+(const HermitianMatrix& other) const;
  HermitianMatrix operator-(const HermitianMatrix& other) const;
  HermitianMatrix operator*(double scale) const;

 private:
  struct Trusted {};
  HermitianMatrix(Eigen::MatrixXcd entries, Trusted);

  Eigen::MatrixXcd entries_;
};

/// Block-diagonal collection; PSD iff every block is PSD.
class BlockDiagMatrix {
 public:
  BlockDiagMatrix() = default;
  explicit BlockDiagMatrix(std::vector<HermitianMatrix> blocks) : blocks_(std::move(blocks)) {}

  const std::vector<HermitianMatrix>& blocks() const { return blocks_; }
  int total_dim() const;
  double min_eigenvalue() const;
  bool is_psd(double tol) const;

 private:
  std::vector<HermitianMatrix> blocks_;
};

struct EigPair {
  double value = 0.0;
  ComplexVector vector;
};

HermitianMatrix outer(const ComplexVector& v);

/// All eigenvalues in ascending order.
std::vector<double> eigenvalues(const HermitianMatrix& h);

double min_eigenvalue(const HermitianMatrix& h);
double max_eigenvalue(const HermitianMatrix& h);

/// Largest eigenvalue with a unit eigenvector whose first nonzero entry is
/// real and nonnegative.  The zero matrix yields (0, e_1).
EigPair principal_eigpair(const HermitianMatrix& h);

/// Rotates v so its first entry with magnitude above `threshold` is real >= 0.
ComplexVector fix_phase(const ComplexVector& v, double threshold = 1e-12);

/// [[Re H, -Im H], [Im H, Re H]]; spectrum of H with doubled multiplicity.
Eigen::MatrixXd real_embedding(const HermitianMatrix& h);

bool is_psd(const HermitianMatrix& h, double tol);

}  // namespace noma
