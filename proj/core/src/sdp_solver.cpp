// Primal-dual path-following interior-point method with Nesterov-Todd
// scaling and a Mehrotra predictor-corrector.  Complex Hermitian blocks are
// replaced by their real symmetric embedding, so the Newton system is real.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "noma/errors.hpp"
#include "noma/sdp.hpp"

namespace noma {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// A normalized Farkas certificate with residual below this proves that no
// feasible point of norm < 1/kStrongCertificate exists.
constexpr double kStrongCertificate = 1e-9;
constexpr double kWeakCertificate = 1e-5;
constexpr double kUnboundedObjective = 1e12;
constexpr double kRegStart = 1e-12;
constexpr double kRegLimit = 1e-6;
constexpr int kProgressCheck = 25;

struct Triplet {
  int row;
  int col;
  double value;
};

using Triplets = std::vector<Triplet>;

struct RealBlock {
  int n = 0;
  int complex_dim = 0;  // 0 for blocks kept real
  Eigen::MatrixXd constant;
  std::vector<int> vars;
  std::vector<Triplets> coeffs;
  // Per variable: merged upper-triangle entries with off-diagonal weight 2,
  // so <F, P> = sum v P(r, c) for symmetric P, and the distinct columns of F.
  std::vector<Triplets> upper;
  std::vector<std::vector<int>> columns;
};

void expand_entry(const LmiEntry& e, int d, bool complex, Triplets& out) {
  auto push = [&out](int r, int c, double v) {
    if (v != 0.0) out.push_back({r, c, v});
  };
  const double re = e.value.real();
  const double im = e.value.imag();
  const int r = e.row;
  const int c = e.col;
  if (!complex) {
    push(r, c, re);
    if (r != c) push(c, r, re);
    return;
  }
  if (r == c) {
    push(r, r, re);
    push(r + d, r + d, re);
    return;
  }
  push(r, c, re);
  push(r + d, c + d, re);
  push(r, c + d, -im);
  push(r + d, c, im);
  push(c, r, re);
  push(c + d, r + d, re);
  push(c, r + d, im);
  push(c + d, r, -im);
}

Triplets expand(const std::vector<LmiEntry>& entries, int d, bool complex) {
  Triplets out;
  for (const auto& e : entries) expand_entry(e, d, complex, out);
  return out;
}

void add_scaled(Eigen::MatrixXd& m, const Triplets& t, double scale) {
  for (const auto& [r, c, v] : t) m(r, c) += scale * v;
}

void index_block(RealBlock& rb) {
  for (const Triplets& t : rb.coeffs) {
    std::map<std::pair<int, int>, double> merged;
    std::vector<int> cols;
    for (const auto& [r, c, v] : t) {
      if (r <= c) merged[{r, c}] += r == c ? v : 2.0 * v;
      cols.push_back(c);
    }
    Triplets up;
    for (const auto& [rc, v] : merged) {
      if (v != 0.0) up.push_back({rc.first, rc.second, v});
    }
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    rb.upper.push_back(std::move(up));
    rb.columns.push_back(std::move(cols));
  }
}

// <F, M> for symmetric M.
double frob(const Triplets& t, const Eigen::MatrixXd& m) {
  double s = 0.0;
  for (const auto& [r, c, v] : t) s += v * m(c, r);
  return s;
}

double frob(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a.array() * b.array()).sum(); }

Eigen::MatrixXd sym(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

RealBlock embed(const LmiBlock& block) {
  RealBlock rb;
  const bool complex = !block.is_real();
  rb.complex_dim = complex ? block.dim : 0;
  rb.n = complex ? 2 * block.dim : block.dim;
  rb.constant = Eigen::MatrixXd::Zero(rb.n, rb.n);
  add_scaled(rb.constant, expand(block.constant, block.dim, complex), 1.0);
  for (const auto& term : block.terms) {
    Triplets t = expand(term.coeff, block.dim, complex);
    if (t.empty()) continue;
    auto it = std::find(rb.vars.begin(), rb.vars.end(), term.var);
    if (it == rb.vars.end()) {
      rb.vars.push_back(term.var);
      rb.coeffs.push_back(std::move(t));
    } else {
      auto& dst = rb.coeffs[static_cast<std::size_t>(it - rb.vars.begin())];
      dst.insert(dst.end(), t.begin(), t.end());
    }
  }
  index_block(rb);
  return rb;
}

// Largest alpha with X + alpha * dX >= 0, given the Cholesky factor of X.
double max_step(const Eigen::LLT<Eigen::MatrixXd>& chol, const Eigen::MatrixXd& dx) {
  const auto lower = chol.matrixL();
  Eigen::MatrixXd t = lower.solve(dx);
  Eigen::MatrixXd u = lower.solve(t.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(u), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin >= 0.0 ? kInf : -1.0 / lmin;
}

// Maps a real symmetric dual block on the embedding back to the complex
// Hermitian matrix with the same pairing against embedded coefficients.
HermitianMatrix collapse(const Eigen::MatrixXd& y, int complex_dim) {
  if (complex_dim == 0) return HermitianMatrix::hermitian_part(y.cast<cplx>());
  const int d = complex_dim;
  const Eigen::MatrixXd a = y.topLeftCorner(d, d);
  const Eigen::MatrixXd b = y.topRightCorner(d, d);
  const Eigen::MatrixXd c = y.bottomRightCorner(d, d);
  Eigen::MatrixXcd out(d, d);
  out.real() = a + c;
  out.imag() = b.transpose() - b;
  return HermitianMatrix::hermitian_part(out);
}

class InteriorPoint {
 public:
  InteriorPoint(const LmiProblem& problem, const SolverOptions& opts) : problem_(problem), opts_(opts) {
    problem.validate();
    opts.validate();
    nv_ = problem.num_vars;
    c_ = Eigen::Map<const Eigen::VectorXd>(problem.objective.data(), nv_);
    for (const auto& b : problem.blocks) blocks_.push_back(embed(b));
    for (const auto& b : blocks_) total_dim_ += b.n;
    double f0 = 0.0;
    for (const auto& b : blocks_) f0 += b.constant.squaredNorm();
    norm_f0_ = std::sqrt(f0);
    norm_c_ = c_.norm();
  }

  SdpSolution run();

 private:
  struct Scaling {
    Eigen::LLT<Eigen::MatrixXd> chol_s;
    Eigen::LLT<Eigen::MatrixXd> chol_y;
    Eigen::MatrixXd g;      // NT scaling point: G S G = Y
    Eigen::MatrixXd s_inv;
  };

  struct Direction {
    Eigen::VectorXd dx;
    std::vector<Eigen::MatrixXd> ds;
    std::vector<Eigen::MatrixXd> dy;
  };

  void initialize();
  Eigen::MatrixXd evaluate(std::size_t b, const Eigen::VectorXd& x) const;
  Eigen::VectorXd apply_adjoint(const std::vector<Eigen::MatrixXd>& y) const;
  bool compute_scaling();
  void build_schur();
  bool factor_schur();
  Eigen::VectorXd schur_solve(const Eigen::VectorXd& rhs) const;
  Direction solve_direction(const std::vector<Eigen::MatrixXd>& rc) const;
  double step_length(const std::vector<Eigen::MatrixXd>& d, bool primal) const;
  SdpSolution finish(SolveStatus status, int iters);

  const LmiProblem& problem_;
  const SolverOptions& opts_;
  int nv_ = 0;
  int total_dim_ = 0;
  double norm_f0_ = 0.0;
  double norm_c_ = 0.0;
  Eigen::VectorXd c_;
  std::vector<RealBlock> blocks_;

  Eigen::VectorXd x_;
  std::vector<Eigen::MatrixXd> s_;
  std::vector<Eigen::MatrixXd> y_;
  std::vector<Scaling> scaling_;
  std::vector<Eigen::MatrixXd> rp_;  // F(x) - S
  Eigen::VectorXd rd_;               // c - A^*(Y)
  Eigen::MatrixXd schur_;
  Eigen::LLT<Eigen::MatrixXd> schur_chol_;
  Eigen::VectorXd schur_diag_;

  double pobj_ = 0.0;
  double dobj_ = 0.0;
  double gap_ = 0.0;
  double pinf_ = 0.0;
  double dinf_ = 0.0;
  double certificate_residual_ = kInf;
  std::string certificate_;
  double merit_start_ = 0.0;
};

Eigen::MatrixXd InteriorPoint::evaluate(std::size_t b, const Eigen::VectorXd& x) const {
  const RealBlock& rb = blocks_[b];
  Eigen::MatrixXd m = rb.constant;
  for (std::size_t j = 0; j < rb.vars.size(); ++j) add_scaled(m, rb.coeffs[j], x(rb.vars[j]));
  return m;
}

Eigen::VectorXd InteriorPoint::apply_adjoint(const std::vector<Eigen::MatrixXd>& y) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(nv_);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const RealBlock& rb = blocks_[b];
    for (std::size_t j = 0; j < rb.vars.size(); ++j) out(rb.vars[j]) += frob(rb.coeffs[j], y[b]);
  }
  return out;
}

void InteriorPoint::initialize() {
  // Starting point in the style of SDPT3: multiples of the identity sized
  // from the data norms, so neither side starts near its boundary.
  const double sqrt_n = std::sqrt(static_cast<double>(total_dim_));
  double max_coeff = 0.0;
  double ratio = 0.0;
  Eigen::VectorXd coeff_norm = Eigen::VectorXd::Zero(nv_);
  for (const auto& rb : blocks_) {
    for (std::size_t j = 0; j < rb.vars.size(); ++j) {
      double sq = 0.0;
      for (const auto& t : rb.coeffs[j]) sq += t.value * t.value;
      coeff_norm(rb.vars[j]) += sq;
    }
  }
  coeff_norm = coeff_norm.cwiseSqrt();
  for (int i = 0; i < nv_; ++i) {
    max_coeff = std::max(max_coeff, coeff_norm(i));
    ratio = std::max(ratio, (1.0 + std::abs(c_(i))) / (1.0 + coeff_norm(i)));
  }
  const double tau_y = std::max({10.0, sqrt_n, sqrt_n * ratio});
  const double tau_s = std::max({10.0, sqrt_n, max_coeff, norm_f0_});

  x_ = Eigen::VectorXd::Zero(nv_);
  s_.clear();
  y_.clear();
  const bool warm = opts_.warm_start.has_value();
  if (warm) {
    if (static_cast<int>(opts_.warm_start->size()) != nv_) {
      throw ContractError("solve: warm start has the wrong length");
    }
    x_ = Eigen::Map<const Eigen::VectorXd>(opts_.warm_start->data(), nv_);
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const int n = blocks_[b].n;
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n, n) * tau_s;
    if (warm) {
      Eigen::MatrixXd f = evaluate(b, x_);
      if (Eigen::LLT<Eigen::MatrixXd>(f).info() == Eigen::Success) s = f;
    }
    s_.push_back(std::move(s));
    y_.push_back(Eigen::MatrixXd::Identity(n, n) * tau_y);
  }
}

bool InteriorPoint::compute_scaling() {
  scaling_.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    Scaling& sc = scaling_[b];
    sc.chol_s.compute(s_[b]);
    sc.chol_y.compute(y_[b]);
    if (sc.chol_s.info() != Eigen::Success || sc.chol_y.info() != Eigen::Success) return false;
    const int n = blocks_[b].n;
    const Eigen::MatrixXd lower = sc.chol_s.matrixL();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(lower.transpose() * y_[b] * lower));
    if (es.info() != Eigen::Success || es.eigenvalues()(0) <= 0.0) return false;
    // W = L^{-T} U, G = W D^{1/2} W^T.
    const Eigen::MatrixXd w = lower.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors());
    const Eigen::VectorXd root = es.eigenvalues().cwiseSqrt();
    sc.g = sym(w * root.asDiagonal() * w.transpose());
    sc.s_inv = sym(sc.chol_s.solve(Eigen::MatrixXd::Identity(n, n)));
  }
  return true;
}

void InteriorPoint::build_schur() {
  schur_ = Eigen::MatrixXd::Zero(nv_, nv_);
  Eigen::MatrixXd gf;
  Eigen::MatrixXd rows;
  std::vector<Eigen::MatrixXd> p;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const RealBlock& rb = blocks_[b];
    const Eigen::MatrixXd& g = scaling_[b].g;
    const std::size_t nb = rb.vars.size();
    p.resize(nb);
    for (std::size_t j = 0; j < nb; ++j) {
      // G F_j G touches only the columns of F_j: (G F_j)(:, cols) G(cols, :).
      const std::vector<int>& cols = rb.columns[j];
      const auto k = static_cast<Eigen::Index>(cols.size());
      gf = Eigen::MatrixXd::Zero(rb.n, k);
      rows.resize(k, rb.n);
      for (Eigen::Index q = 0; q < k; ++q) rows.row(q) = g.row(cols[static_cast<std::size_t>(q)]);
      for (const auto& [r, c, v] : rb.coeffs[j]) {
        const auto q = std::lower_bound(cols.begin(), cols.end(), c) - cols.begin();
        gf.col(q) += v * g.col(r);
      }
      p[j].noalias() = gf * rows;
    }
    for (std::size_t j = 0; j < nb; ++j) {
      for (std::size_t i = 0; i <= j; ++i) {
        double h = 0.0;
        for (const auto& [r, c, v] : rb.upper[i]) h += v * p[j](r, c);
        schur_(rb.vars[i], rb.vars[j]) += h;
        if (i != j) schur_(rb.vars[j], rb.vars[i]) += h;
      }
    }
  }
}

bool InteriorPoint::factor_schur() {
  // Jacobi scaling first: variables enter on very different scales once
  // some blocks approach their boundary.
  schur_diag_ = schur_.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd scaled = schur_diag_.asDiagonal() * schur_ * schur_diag_.asDiagonal();
  for (double reg = kRegStart; reg <= kRegLimit * 1.0000001; reg *= 10.0) {
    Eigen::MatrixXd h = scaled;
    h.diagonal().array() += reg;
    schur_chol_.compute(h);
    if (schur_chol_.info() == Eigen::Success && schur_chol_.matrixLLT().diagonal().allFinite()) return true;
  }
  return false;
}

Eigen::VectorXd InteriorPoint::schur_solve(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd dx = schur_diag_.cwiseProduct(schur_chol_.solve(schur_diag_.cwiseProduct(rhs)));
  // Refinement against the unregularized matrix recovers accuracy lost to
  // conditioning late in the path.
  for (int r = 0; r < 2; ++r) {
    const Eigen::VectorXd res = rhs - schur_ * dx;
    dx += schur_diag_.cwiseProduct(schur_chol_.solve(schur_diag_.cwiseProduct(res)));
  }
  return dx;
}

InteriorPoint::Direction InteriorPoint::solve_direction(const std::vector<Eigen::MatrixXd>& rc) const {
  // Linearized system:
  //   dS = sum_j dx_j F_j + Rp
  //   <F_i, dY> = rd_i
  //   dY + G dS G = Rc
  // which reduces to  H dx = <F_i, Rc - G Rp G> - rd_i.
  const std::size_t nb = blocks_.size();
  std::vector<Eigen::MatrixXd> t(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const Eigen::MatrixXd& g = scaling_[b].g;
    t[b] = rc[b] - g * rp_[b] * g;
  }
  Eigen::VectorXd rhs = apply_adjoint(t) - rd_;
  Direction d;
  d.dx = schur_solve(rhs);
  d.ds.resize(nb);
  d.dy.resize(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const RealBlock& rb = blocks_[b];
    Eigen::MatrixXd ds = rp_[b];
    for (std::size_t j = 0; j < rb.vars.size(); ++j) add_scaled(ds, rb.coeffs[j], d.dx(rb.vars[j]));
    const Eigen::MatrixXd& g = scaling_[b].g;
    d.dy[b] = sym(rc[b] - g * ds * g);
    d.ds[b] = sym(ds);
  }
  return d;
}

double InteriorPoint::step_length(const std::vector<Eigen::MatrixXd>& d, bool primal) const {
  double alpha = kInf;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& chol = primal ? scaling_[b].chol_s : scaling_[b].chol_y;
    alpha = std::min(alpha, max_step(chol, d[b]));
  }
  return alpha;
}

SdpSolution InteriorPoint::finish(SolveStatus status, int iters) {
  SdpSolution sol;
  sol.x.assign(x_.data(), x_.data() + x_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) sol.dual_blocks.push_back(collapse(y_[b], blocks_[b].complex_dim));
  sol.objective = pobj_;
  sol.dual_objective = dobj_;
  sol.gap = gap_;
  sol.status = status;
  sol.iterations = iters;
  sol.certificate_residual = status == SolveStatus::infeasible ? certificate_residual_ : 0.0;
  sol.certificate = certificate_;
  sol.merit_start = merit_start_;
  sol.merit_end = gap_ + pinf_ + dinf_;
  return sol;
}

SdpSolution InteriorPoint::run() {
  initialize();
  const std::size_t nb = blocks_.size();
  rp_.resize(nb);
  const int detect_after = std::max(20, opts_.max_iters / 2);
  double step_p = 0.0;
  double step_d = 0.0;
  double pinf_prev = kInf;
  double pinf_start = 0.0;
  double dinf_start = 0.0;
  int stalled = 0;

  for (int iter = 0;; ++iter) {
    double rp_sq = 0.0;
    double compl_sum = 0.0;
    double f0y = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
      rp_[b] = evaluate(b, x_) - s_[b];
      rp_sq += rp_[b].squaredNorm();
      compl_sum += frob(s_[b], y_[b]);
      f0y += frob(blocks_[b].constant, y_[b]);
    }
    const Eigen::VectorXd ay = apply_adjoint(y_);
    rd_ = c_ - ay;
    pobj_ = c_.dot(x_);
    dobj_ = -f0y;
    const double mu = compl_sum / total_dim_;
    const double denom = 1.0 + std::abs(pobj_) + std::abs(dobj_);
    gap_ = std::max(std::abs(pobj_ - dobj_), std::max(compl_sum, 0.0)) / denom;
    pinf_ = std::sqrt(rp_sq) / (1.0 + norm_f0_);
    dinf_ = rd_.norm() / (1.0 + norm_c_);
    if (iter == 0) {
      merit_start_ = gap_ + pinf_ + dinf_;
      pinf_start = pinf_;
      dinf_start = dinf_;
    }

    if (opts_.trace) opts_.trace({iter, gap_, pinf_, dinf_, step_p, step_d, mu});

    if (gap_ <= opts_.tol_gap && pinf_ <= opts_.tol_feas && dinf_ <= opts_.tol_feas) {
      return finish(SolveStatus::optimal, iter);
    }

    // Primal infeasibility: Y >= 0 with <F0, Y> < 0 and A^*(Y) ~ 0.
    if (dobj_ > 0.0) {
      certificate_residual_ = ay.norm() / dobj_;
      const bool strong = certificate_residual_ <= kStrongCertificate;
      const bool weak = iter >= detect_after && certificate_residual_ <= kWeakCertificate && stalled >= 3;
      if (strong || weak) {
        certificate_ = std::string(strong ? "strong" : "weak") +
                       " Farkas ray: Y >= 0, <F0,Y> = -1, ||A*(Y)|| = " + std::to_string(certificate_residual_);
        return finish(SolveStatus::infeasible, iter);
      }
    }
    if (opts_.objective_cutoff && dinf_ <= opts_.tol_feas &&
        dobj_ > *opts_.objective_cutoff + opts_.tol_gap * (1.0 + std::abs(dobj_))) {
      certificate_residual_ = dinf_;
      certificate_ = "dual bound " + std::to_string(dobj_) + " above objective cutoff";
      return finish(SolveStatus::infeasible, iter);
    }
    // Dual infeasibility: objective decreasing without bound along a primal ray.
    if (pobj_ < -kUnboundedObjective * (1.0 + norm_f0_) && pinf_ * (1.0 + norm_f0_) < 1e-6 * std::abs(pobj_)) {
      certificate_residual_ = 1.0 / std::abs(pobj_);
      certificate_ = "unbounded objective: improving primal ray";
      return finish(SolveStatus::infeasible, iter);
    }
    if (iter >= opts_.max_iters) return finish(SolveStatus::max_iters, iter);
    if (iter == kProgressCheck && pinf_ > 0.5 * pinf_start && dinf_ > 0.5 * dinf_start) {
      certificate_ = "no reduction of either infeasibility";
      return finish(SolveStatus::numerical_failure, iter);
    }

    if (!compute_scaling()) return finish(SolveStatus::numerical_failure, iter);
    build_schur();
    if (!factor_schur()) return finish(SolveStatus::numerical_failure, iter);

    std::vector<Eigen::MatrixXd> rc(nb);
    double sigma = opts_.mu_reduction;
    Direction dir;
    if (opts_.predictor_corrector) {
      for (std::size_t b = 0; b < nb; ++b) rc[b] = -y_[b];
      const Direction pred = solve_direction(rc);
      const double ap = std::min(1.0, opts_.step_fraction * step_length(pred.ds, true));
      const double ad = std::min(1.0, opts_.step_fraction * step_length(pred.dy, false));
      double compl_aff = 0.0;
      for (std::size_t b = 0; b < nb; ++b) compl_aff += frob(s_[b] + ap * pred.ds[b], y_[b] + ad * pred.dy[b]);
      const double mu_aff = compl_aff / total_dim_;
      const double expon = std::max(1.0, 3.0 * std::min(ap, ad) * std::min(ap, ad));
      sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, expon), 0.0, 1.0);
      if (std::min(ap, ad) < 0.1) sigma = std::max(sigma, opts_.mu_reduction);
      for (std::size_t b = 0; b < nb; ++b) {
        const Eigen::MatrixXd second = pred.dy[b] * pred.ds[b] * scaling_[b].s_inv;
        rc[b] = sym(sigma * mu * scaling_[b].s_inv - y_[b] - second);
      }
      dir = solve_direction(rc);
    } else {
      for (std::size_t b = 0; b < nb; ++b) rc[b] = sym(sigma * mu * scaling_[b].s_inv - y_[b]);
      dir = solve_direction(rc);
    }
    if (!dir.dx.allFinite()) return finish(SolveStatus::numerical_failure, iter);

    // Back off further from the boundary after short steps.
    const double fraction = std::min(opts_.step_fraction, 0.9 + 0.09 * std::min(step_p, step_d));
    step_p = std::min(1.0, fraction * step_length(dir.ds, true));
    step_d = std::min(1.0, fraction * step_length(dir.dy, false));
    x_ += step_p * dir.dx;
    for (std::size_t b = 0; b < nb; ++b) {
      s_[b] = sym(s_[b] + step_p * dir.ds[b]);
      y_[b] = sym(y_[b] + step_d * dir.dy[b]);
    }
    stalled = (pinf_ > 0.5 * pinf_prev || step_p < 0.05) ? stalled + 1 : 0;
    pinf_prev = pinf_;
  }
}

}  // namespace

namespace {

SdpSolution solve_equilibrated(const LmiProblem& problem, const SolverOptions& opts);

bool settled(SolveStatus s) { return s == SolveStatus::optimal || s == SolveStatus::infeasible; }

}  // namespace

SdpSolution solve(const LmiProblem& problem, const SolverOptions& opts) {
  problem.validate();
  opts.validate();
  auto plain = [&] {
    InteriorPoint ip(problem, opts);
    return ip.run();
  };
  SdpSolution first = opts.equilibrate ? solve_equilibrated(problem, opts) : plain();
  if (settled(first.status)) return first;
  // The other scaling sometimes succeeds where this one stalls.
  SdpSolution second = opts.equilibrate ? plain() : solve_equilibrated(problem, opts);
  second.iterations += first.iterations;
  return settled(second.status) ? second : first;
}

namespace {

SdpSolution solve_equilibrated(const LmiProblem& problem, const SolverOptions& opts) {
  // Diagonal congruence D F D per block, D_ii = 1 / sqrt(max |(F_j)_ii|),
  // balances blocks whose rows live on different scales.  PSD-ness is
  // unchanged; the dual maps back as Y = D Y' D.
  LmiProblem scaled = problem;
  std::vector<Eigen::VectorXd> diag_scale;
  for (auto& blk : scaled.blocks) {
    Eigen::VectorXd big = Eigen::VectorXd::Zero(blk.dim);
    auto visit = [&big](const std::vector<LmiEntry>& entries) {
      for (const auto& e : entries) {
        if (e.row == e.col) big(e.row) = std::max(big(e.row), std::abs(e.value));
      }
    };
    visit(blk.constant);
    for (const auto& t : blk.terms) visit(t.coeff);
    Eigen::VectorXd d(blk.dim);
    for (int i = 0; i < blk.dim; ++i) d(i) = big(i) > 0.0 ? 1.0 / std::sqrt(big(i)) : 1.0;
    auto apply = [&d](std::vector<LmiEntry>& entries) {
      for (auto& e : entries) e.value *= d(e.row) * d(e.col);
    };
    apply(blk.constant);
    for (auto& t : blk.terms) apply(t.coeff);
    diag_scale.push_back(std::move(d));
  }
  InteriorPoint ip(scaled, opts);
  SdpSolution sol = ip.run();
  for (std::size_t b = 0; b < sol.dual_blocks.size(); ++b) {
    const Eigen::VectorXcd d = diag_scale[b].cast<cplx>();
    sol.dual_blocks[b] = HermitianMatrix::hermitian_part(d.asDiagonal() * sol.dual_blocks[b].eigen() * d.asDiagonal());
  }
  return sol;
}

}  // namespace

Residuals residuals(const LmiProblem& problem, const SdpSolution& sol) {
  problem.validate();
  Residuals r;
  const std::size_t nb = problem.blocks.size();
  if (sol.dual_blocks.size() != nb || static_cast<int>(sol.x.size()) != problem.num_vars) {
    throw ContractError("residuals: solution does not match the problem");
  }
  double f0_sq = 0.0;
  double f0y = 0.0;
  double min_eig = kInf;
  double dual_neg = 0.0;
  std::vector<double> ay(static_cast<std::size_t>(problem.num_vars), 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    const LmiBlock& blk = problem.blocks[b];
    const HermitianMatrix f0 = blk.constant_matrix();
    const HermitianMatrix& y = sol.dual_blocks[b];
    f0_sq += f0.eigen().squaredNorm();
    f0y += (f0.eigen().cwiseProduct(y.eigen().conjugate())).sum().real();
    min_eig = std::min(min_eig, min_eigenvalue(blk.evaluate(sol.x)));
    dual_neg = std::max(dual_neg, -min_eigenvalue(y));
    for (const auto& t : blk.terms) {
      const HermitianMatrix fi = blk.coeff_matrix(t.var);
      ay[static_cast<std::size_t>(t.var)] += (fi.eigen().cwiseProduct(y.eigen().conjugate())).sum().real();
    }
  }
  double rd_sq = 0.0;
  double c_sq = 0.0;
  double ay_sq = 0.0;
  double pobj = 0.0;
  for (std::size_t i = 0; i < ay.size(); ++i) {
    const double c = problem.objective[i];
    rd_sq += (c - ay[i]) * (c - ay[i]);
    c_sq += c * c;
    ay_sq += ay[i] * ay[i];
    pobj += c * sol.x[i];
  }
  const double dobj = -f0y;
  if (sol.status == SolveStatus::infeasible) {
    r.primal_infeas = dobj > 0.0 ? -std::sqrt(ay_sq) / dobj : -kInf;
  } else {
    r.primal_infeas = std::max(0.0, -min_eig) / (1.0 + std::sqrt(f0_sq));
  }
  r.dual_infeas = std::sqrt(rd_sq) / (1.0 + std::sqrt(c_sq)) + dual_neg;
  r.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  return r;
}

}  // namespace noma
