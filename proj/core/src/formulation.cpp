#include "noma/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "noma/errors.hpp"

namespace noma {

namespace {

// One real coordinate of W_p and the Hermitian basis matrix it multiplies.
struct BasisElement {
  int var;
  std::vector<LmiEntry> upper;
};

std::vector<BasisElement> basis_of(const VarIndex& idx, int p) {
  std::vector<BasisElement> out;
  const int m = idx.antennas();
  for (int i = 0; i < m; ++i) out.push_back({idx.diag(p, i), {{i, i, 1.0}}});
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      out.push_back({idx.re(p, i, j), {{i, j, 1.0}}});
      out.push_back({idx.im(p, i, j), {{i, j, cplx(0.0, 1.0)}}});
    }
  }
  return out;
}

// E h for a Hermitian E given by its upper entries.
Eigen::VectorXcd apply(const std::vector<LmiEntry>& upper, const Eigen::VectorXcd& h) {
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(h.size());
  for (const auto& e : upper) {
    out(e.row) += e.value * h(e.col);
    if (e.row != e.col) out(e.col) += std::conj(e.value) * h(e.row);
  }
  return out;
}

void check_inputs(const Scenario& s, std::span<const ComplexVector> h_hat, std::span<const int> order) {
  s.validate();
  const auto k = static_cast<std::size_t>(s.num_users);
  if (h_hat.size() != k) throw ContractError("build: need one channel estimate per user");
  for (const auto& h : h_hat) {
    if (h.dim() != s.num_antennas) throw ContractError("build: channel dimension differs from M");
  }
  if (order.size() != k) throw ContractError("build: order must be a permutation of the users");
  std::vector<int> sorted(order.begin(), order.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < k; ++i) {
    if (sorted[i] != static_cast<int>(i)) throw ContractError("build: order must be a permutation of the users");
  }
}

SdpProblem build(const Scenario& s, std::span<const ComplexVector> h_hat, std::span<const int> order,
                 bool robust) {
  check_inputs(s, h_hat, order);
  const int m = s.num_antennas;
  const int users = s.num_users;
  auto eps_of = [&](int pos) { return robust ? s.epsilon[static_cast<std::size_t>(order[pos])] : 0.0; };
  std::vector<bool> layer_multiplier;
  for (int p = 0; p < users; ++p) layer_multiplier.push_back(eps_of(p) > 0.0);

  SdpProblem prob;
  prob.index = VarIndex(m, users, layer_multiplier);
  prob.order.assign(order.begin(), order.end());
  const VarIndex& idx = prob.index;
  LmiProblem& lmi = prob.lmi;
  lmi.num_vars = idx.num_vars();
  lmi.objective.assign(static_cast<std::size_t>(lmi.num_vars), 0.0);

  std::vector<std::vector<BasisElement>> basis;
  for (int p = 0; p < users; ++p) {
    basis.push_back(basis_of(idx, p));
    for (int i = 0; i < m; ++i) lmi.objective[static_cast<std::size_t>(idx.diag(p, i))] = 1.0;
    LmiBlock w_block;
    w_block.dim = m;
    w_block.label = "W" + std::to_string(p);
    for (const auto& b : basis.back()) {
      for (const auto& e : b.upper) w_block.add_coeff(b.var, e.row, e.col, e.value);
    }
    w_block.compress();
    lmi.blocks.push_back(std::move(w_block));
  }

  prob.layer_block.assign(static_cast<std::size_t>(users), {});
  std::vector<LmiBlock> multiplier_blocks;
  for (int k = 0; k < users; ++k) {
    const double gamma = s.gamma_min[static_cast<std::size_t>(order[k])];
    for (int l = k; l < users; ++l) {
      const auto user_l = static_cast<std::size_t>(order[l]);
      const Eigen::VectorXcd& h = h_hat[user_l].eigen();
      const double noise = s.noise_var[user_l];
      const double eps = eps_of(l);
      const bool lmi_form = eps > 0.0;

      LmiBlock blk;
      blk.dim = lmi_form ? m + 1 : 1;
      blk.label = "C" + std::to_string(k) + "," + std::to_string(l);
      blk.add_constant(blk.dim - 1, blk.dim - 1, -noise);
      for (int p = 0; p < users; ++p) {
        // Coefficient of W_p in phi_k and in nu_k.
        const double phi_coeff = p == k ? 1.0 / gamma : (p > k ? -1.0 : 0.0);
        const double nu_coeff = p < k ? -1.0 : 0.0;
        for (const auto& b : basis[static_cast<std::size_t>(p)]) {
          const Eigen::VectorXcd eh = apply(b.upper, h);
          const double quad = h.dot(eh).real();
          if (!lmi_form) {
            if (phi_coeff != 0.0) blk.add_coeff(b.var, 0, 0, phi_coeff * quad);
            continue;
          }
          for (const auto& e : b.upper) blk.add_coeff(b.var, e.row, e.col, (phi_coeff + nu_coeff) * e.value);
          if (phi_coeff != 0.0) {
            for (int r = 0; r < m; ++r) {
              if (eh(r) != cplx{}) blk.add_coeff(b.var, r, m, phi_coeff * eh(r));
            }
            blk.add_coeff(b.var, m, m, phi_coeff * quad);
          }
        }
      }
      if (lmi_form) {
        const int lam = idx.lambda(k, l);
        for (int i = 0; i < m; ++i) blk.add_coeff(lam, i, i, 1.0);
        blk.add_coeff(lam, m, m, -eps * eps);
        LmiBlock nonneg;
        nonneg.dim = 1;
        nonneg.label = "lambda" + std::to_string(k) + "," + std::to_string(l);
        nonneg.add_coeff(lam, 0, 0, 1.0);
        multiplier_blocks.push_back(std::move(nonneg));
      }
      blk.compress();
      prob.layer_block[static_cast<std::size_t>(k)].push_back(static_cast<int>(lmi.blocks.size()));
      lmi.blocks.push_back(std::move(blk));
    }
  }
  for (auto& b : multiplier_blocks) lmi.blocks.push_back(std::move(b));
  lmi.validate();
  // Each own-receiver constraint alone needs ||w_k||^2 >= gamma s / (|h| - eps)^2.
  double bound = 0.0;
  for (int p = 0; p < users; ++p) {
    const auto u = static_cast<std::size_t>(order[static_cast<std::size_t>(p)]);
    const double margin = h_hat[u].norm() - eps_of(p);
    if (!(margin > 0.0)) {
      bound = 0.0;
      break;
    }
    bound += s.gamma_min[u] * s.noise_var[u] / (margin * margin);
  }
  if (bound > 0.0 && std::isfinite(bound)) prob.power_hint = bound;
  return prob;
}

std::vector<double> multipliers_of(const SdpProblem& prob, std::span<const double> x, int k) {
  std::vector<double> out;
  for (int l = k; l < prob.index.users(); ++l) {
    out.push_back(prob.index.has_multiplier(k, l) ? x[static_cast<std::size_t>(prob.index.lambda(k, l))] : 0.0);
  }
  return out;
}

}  // namespace

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::robust:
      return "robust";
    case Scheme::nonrobust:
      return "nonrobust";
    case Scheme::oma:
      return "oma";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "robust") return Scheme::robust;
  if (name == "nonrobust" || name == "non-robust") return Scheme::nonrobust;
  if (name == "oma") return Scheme::oma;
  throw ContractError("unknown scheme '" + name + "'");
}

VarIndex::VarIndex(int antennas, int users, bool with_multipliers)
    : VarIndex(antennas, users, std::vector<bool>(static_cast<std::size_t>(std::max(users, 0)), with_multipliers)) {}

VarIndex::VarIndex(int antennas, int users, std::vector<bool> layer_multiplier)
    : antennas_(antennas), users_(users), layer_multiplier_(std::move(layer_multiplier)) {
  if (antennas < 1 || users < 1) throw ContractError("VarIndex: M and K must be positive");
  if (static_cast<int>(layer_multiplier_.size()) != users) throw ContractError("VarIndex: need one flag per position");
  lambda_slot_.assign(static_cast<std::size_t>(users * users), -1);
  const int base = users * antennas * antennas;
  for (int k = 0; k < users; ++k) {
    for (int l = k; l < users; ++l) {
      if (layer_multiplier_[static_cast<std::size_t>(l)]) {
        lambda_slot_[static_cast<std::size_t>(k * users + l)] = base + num_multipliers_++;
      }
    }
  }
  num_vars_ = base + num_multipliers_;
}

int VarIndex::offdiag_slot(int i, int j) const {
  if (!(0 <= i && i < j && j < antennas_)) throw ContractError("VarIndex: need 0 <= i < j < M");
  // Position of (i, j) among strictly upper entries in row-major order.
  return i * antennas_ - i * (i + 1) / 2 + (j - i - 1);
}

int VarIndex::diag(int p, int i) const {
  if (p < 0 || p >= users_ || i < 0 || i >= antennas_) throw ContractError("VarIndex: index out of range");
  return p * antennas_ * antennas_ + i;
}

int VarIndex::re(int p, int i, int j) const {
  if (p < 0 || p >= users_) throw ContractError("VarIndex: index out of range");
  return p * antennas_ * antennas_ + antennas_ + 2 * offdiag_slot(i, j);
}

int VarIndex::im(int p, int i, int j) const { return re(p, i, j) + 1; }

bool VarIndex::has_multiplier(int k, int l) const {
  if (!(0 <= k && k <= l && l < users_)) throw ContractError("VarIndex: need 0 <= k <= l < K");
  return lambda_slot_[static_cast<std::size_t>(k * users_ + l)] >= 0;
}

int VarIndex::lambda(int k, int l) const {
  if (!has_multiplier(k, l)) throw ContractError("VarIndex: layer has no multiplier");
  return lambda_slot_[static_cast<std::size_t>(k * users_ + l)];
}

HermitianMatrix VarIndex::unpack(std::span<const double> x, int p) const {
  if (static_cast<int>(x.size()) != num_vars_) throw ContractError("VarIndex::unpack: wrong vector length");
  Eigen::MatrixXcd w(antennas_, antennas_);
  for (int i = 0; i < antennas_; ++i) {
    w(i, i) = x[static_cast<std::size_t>(diag(p, i))];
    for (int j = i + 1; j < antennas_; ++j) {
      const cplx z(x[static_cast<std::size_t>(re(p, i, j))], x[static_cast<std::size_t>(im(p, i, j))]);
      w(i, j) = z;
      w(j, i) = std::conj(z);
    }
  }
  return HermitianMatrix::hermitian_part(w);
}

SdpProblem build_robust_sdp(const Scenario& s, std::span<const ComplexVector> h_hat, std::span<const int> order) {
  return build(s, h_hat, order, true);
}

SdpProblem build_nonrobust_sdp(const Scenario& s, std::span<const ComplexVector> h_hat,
                               std::span<const int> order) {
  return build(s, h_hat, order, false);
}

double oma_target(double gamma_min, int users) { return std::pow(1.0 + gamma_min, users) - 1.0; }

namespace {

Scenario single_user(const Scenario& s, int user) {
  Scenario one = s;
  const auto u = static_cast<std::size_t>(user);
  one.num_users = 1;
  one.epsilon = {s.epsilon[u]};
  one.gamma_min = {oma_target(s.gamma_min[u], s.num_users)};
  one.noise_var = {s.noise_var[u]};
  return one;
}

}  // namespace

std::vector<SdpProblem> build_oma_design(const Scenario& s, std::span<const ComplexVector> h_hat) {
  s.validate();
  if (static_cast<int>(h_hat.size()) != s.num_users) throw ContractError("build_oma_design: need K channels");
  std::vector<SdpProblem> out;
  const std::vector<int> solo{0};
  for (int u = 0; u < s.num_users; ++u) {
    out.push_back(build_robust_sdp(single_user(s, u), h_hat.subspan(static_cast<std::size_t>(u), 1), solo));
  }
  return out;
}

namespace {

constexpr double kRescaleProbe = 1e-8;
constexpr double kInfeasibleBand = 10.0;
constexpr int kMaxRescale = 3;

}  // namespace

SdpSolution solve_min_power(const SdpProblem& prob, const SolverOptions& opts) {
  const LmiProblem& src = prob.lmi;
  const int n = src.num_vars;
  const int pivot = prob.pivot_var();
  const double cp = src.objective[static_cast<std::size_t>(pivot)];
  if (cp == 0.0) throw ContractError("solve_min_power: pivot coordinate has no cost");
  auto to_new = [&](int i) { return i < pivot ? i : i - 1; };
  const int s_var = n - 1;

  LmiProblem norm;
  norm.num_vars = n;
  norm.objective.assign(static_cast<std::size_t>(n), 0.0);
  norm.objective[static_cast<std::size_t>(s_var)] = -1.0;
  for (const LmiBlock& blk : src.blocks) {
    LmiBlock out;
    out.dim = blk.dim;
    out.label = blk.label;
    for (const auto& e : blk.constant) out.add_coeff(s_var, e.row, e.col, e.value);
    for (const auto& t : blk.terms) {
      if (t.var == pivot) {
        // x_p = (1 - sum_{i != p} c_i x_i) / c_p
        for (const auto& e : t.coeff) out.add_constant(e.row, e.col, e.value / cp);
        for (int i = 0; i < n; ++i) {
          const double ci = src.objective[static_cast<std::size_t>(i)];
          if (i == pivot || ci == 0.0) continue;
          for (const auto& e : t.coeff) out.add_coeff(to_new(i), e.row, e.col, -e.value * ci / cp);
        }
      } else {
        for (const auto& e : t.coeff) out.add_coeff(to_new(t.var), e.row, e.col, e.value);
      }
    }
    out.compress();
    norm.blocks.push_back(std::move(out));
  }
  norm.validate();

  SolverOptions o = opts;
  o.warm_start.reset();
  // s* <= 0 means no design meets the constraints; stop once that is proven.
  o.objective_cutoff = 0.0;

  // The gap is absolute for small s, so 1 / s can miss the requested
  // relative accuracy once P* is large, and a tiny positive s* can come back
  // as s <= 0.  Such results are re-solved with s = a s'.
  double a = 1.0;
  double next_a = 1.0 / prob.power_hint;
  int iterations = 0;
  bool refine_failed = false;
  SdpSolution hs;
  for (int round = 0;; ++round) {
    LmiProblem scaled = norm;
    for (auto& blk : scaled.blocks) {
      for (auto& t : blk.terms) {
        if (t.var != s_var) continue;
        for (auto& e : t.coeff) e.value *= next_a;
      }
    }
    SdpSolution trial = solve(scaled, o);
    iterations += trial.iterations;
    if (round == 0 && next_a != 1.0 && trial.status != SolveStatus::optimal &&
        trial.status != SolveStatus::infeasible) {
      // The hint can be badly off when a margin |h| - eps is tiny.
      next_a = 1.0;
      --round;
      continue;
    }
    // A failed refinement keeps the previous, less accurate optimum.
    if (round > 0 && trial.status != SolveStatus::optimal) {
      refine_failed = true;
      break;
    }
    hs = std::move(trial);
    a = next_a;
    if (hs.status != SolveStatus::optimal || round == kMaxRescale) break;
    const double sv = hs.x[static_cast<std::size_t>(s_var)];
    const double zv = -hs.dual_objective;
    if (sv <= -kInfeasibleBand * o.tol_gap) break;
    const double mapped_gap = sv > 0.0 && zv > 0.0 ? std::abs(sv - zv) / (sv + zv + sv * zv) : 1.0;
    if (mapped_gap <= o.tol_gap) break;
    next_a = a * (sv > 0.0 ? sv : kRescaleProbe);
  }
  SdpSolution out = hs;
  out.iterations = iterations;
  out.x.assign(static_cast<std::size_t>(n), 0.0);
  const double sval = hs.x.empty() ? 0.0 : a * hs.x[static_cast<std::size_t>(s_var)];
  if (hs.status == SolveStatus::optimal && !(sval > 0.0)) {
    out.status = SolveStatus::infeasible;
    out.certificate = "normalized optimum " + std::to_string(sval) + " is not positive";
    // Rescaling failed: s* is within tolerance of zero, so P* is either
    // infinite or beyond 1 / tol_gap times the hint.
    if (refine_failed) out.certificate += " (power beyond the solver's resolution)";
  }
  if (out.status != SolveStatus::optimal) return out;
  double rest = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i == pivot) continue;
    const double xi = hs.x[static_cast<std::size_t>(to_new(i))];
    out.x[static_cast<std::size_t>(i)] = xi / sval;
    rest += src.objective[static_cast<std::size_t>(i)] * xi;
  }
  out.x[static_cast<std::size_t>(pivot)] = (1.0 - rest) / cp / sval;
  out.objective = 1.0 / sval;
  // The normalized dual satisfies <F_i, Y> = c_i z and <F0, Y> = -1 / a with
  // z = -dual objective, so Y / z is dual feasible for the power problem
  // with value 1 / (a z).
  const double z = -hs.dual_objective;
  out.dual_objective = 1.0 / (a * z);
  for (auto& y : out.dual_blocks) y = y * (1.0 / z);
  out.gap = std::abs(out.objective - out.dual_objective) / (1.0 + std::abs(out.objective) + std::abs(out.dual_objective));
  return out;
}

RankOneViolation::RankOneViolation(int position, double ratio)
    : std::runtime_error("rank-one violation at position " + std::to_string(position) +
                         ": eigenvalue ratio " + std::to_string(ratio)),
      position_(position),
      ratio_(ratio) {}

Extraction extract_beamformers(std::span<const HermitianMatrix> w_mats) {
  Extraction ex;
  for (const auto& w : w_mats) {
    const std::vector<double> ev = eigenvalues(w);
    const double top = ev.back();
    const double second = ev.size() > 1 ? ev[ev.size() - 2] : 0.0;
    const EigPair pair = principal_eigpair(w);
    const double scale = std::sqrt(std::max(pair.value, 0.0));
    ex.w.push_back(pair.vector * cplx(scale, 0.0));
    ex.rank_ratio.push_back(top > 0.0 ? std::max(second, 0.0) / top : 0.0);
  }
  return ex;
}

Extraction extract_beamformers(std::span<const HermitianMatrix> w_mats, double tol_rank) {
  Extraction ex = extract_beamformers(w_mats);
  for (std::size_t k = 0; k < ex.rank_ratio.size(); ++k) {
    if (ex.rank_ratio[k] > tol_rank) throw RankOneViolation(static_cast<int>(k), ex.rank_ratio[k]);
  }
  return ex;
}

double BeamDesign::max_rank_ratio() const {
  return rank_ratio.empty() ? 0.0 : *std::max_element(rank_ratio.begin(), rank_ratio.end());
}

// Necessary condition for the robust problem.  Averaging the (k, l)
// constraint over Delta = e * exp(i t) * v for unit v gives
//   a_kl + e^2 v^H (phi_k + nu_k) v >= 0,   a_kl = h^H phi_k h - s_l >= 0.
// An optimal rank-one design exists whenever the relaxation is feasible, so
// summing over an orthonormal basis of span{w_1..w_K} (dimension at most
// r = min(K, M)) yields
//   P_k (r |h_l|^2 + e^2) / gamma_k >= e^2 sum_{m != k} P_m + r s_l,
// i.e. P_k (1 + A_k) >= P + c_k with A_k = (r |h_l|^2 + e^2) / (gamma_k e^2).
// Summing P_k over k shows sum_k 1 / (1 + A_k) < 1 is necessary.  The ball
// must also exclude the zero channel: |h_l| > e_l.
bool robust_may_be_feasible(const Scenario& s, std::span<const ComplexVector> h_hat, std::span<const int> order) {
  check_inputs(s, h_hat, order);
  const int users = s.num_users;
  const double r = std::min(users, s.num_antennas);
  double sum = 0.0;
  for (int k = 0; k < users; ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (int l = k; l < users; ++l) {
      const auto u = static_cast<std::size_t>(order[static_cast<std::size_t>(l)]);
      const double eps = s.epsilon[u];
      const double norm = h_hat[u].norm();
      if (eps <= 0.0) continue;
      if (norm <= eps) return false;
      const double gamma = s.gamma_min[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
      best = std::min(best, (r * norm * norm + eps * eps) / (gamma * eps * eps));
    }
    if (std::isfinite(best)) sum += 1.0 / (1.0 + best);
  }
  return sum < 1.0;
}

BeamDesign design_noma(const Scenario& s, std::span<const ComplexVector> h_hat, std::span<const int> order,
                       Scheme scheme, const DesignOptions& opts) {
  if (scheme == Scheme::oma) throw ContractError("design_noma: use design_oma for the OMA baseline");
  const bool robust = scheme == Scheme::robust;
  BeamDesign d;
  d.scheme = scheme;
  d.order.assign(order.begin(), order.end());
  if (robust && opts.prescreen && !robust_may_be_feasible(s, h_hat, order)) {
    d.status = SolveStatus::infeasible;
    return d;
  }
  const SdpProblem prob = robust ? build_robust_sdp(s, h_hat, order) : build_nonrobust_sdp(s, h_hat, order);
  const SdpSolution sol = solve_min_power(prob, opts.solver);
  d.status = sol.status;
  d.iterations = sol.iterations;
  if (sol.status != SolveStatus::optimal) return d;
  d.sdp_objective = sol.objective;
  for (int p = 0; p < s.num_users; ++p) {
    d.W.push_back(prob.index.unpack(sol.x, p));
    d.lambda.push_back(multipliers_of(prob, sol.x, p));
  }
  Extraction ex = extract_beamformers(d.W);
  d.w = std::move(ex.w);
  d.rank_ratio = std::move(ex.rank_ratio);
  d.rank_violation = d.max_rank_ratio() > opts.tol_rank;
  for (const auto& w : d.w) d.total_power += w.squared_norm();
  return d;
}

BeamDesign design_oma(const Scenario& s, std::span<const ComplexVector> h_hat, const DesignOptions& opts) {
  BeamDesign d;
  d.scheme = Scheme::oma;
  d.status = SolveStatus::optimal;
  d.order.resize(static_cast<std::size_t>(s.num_users));
  std::iota(d.order.begin(), d.order.end(), 0);
  const std::vector<SdpProblem> problems = build_oma_design(s, h_hat);
  const double share = 1.0 / s.num_users;
  for (int u = 0; u < s.num_users; ++u) {
    const SdpProblem& prob = problems[static_cast<std::size_t>(u)];
    const Scenario one = single_user(s, u);
    if (opts.prescreen && !robust_may_be_feasible(one, h_hat.subspan(static_cast<std::size_t>(u), 1), prob.order)) {
      d.status = SolveStatus::infeasible;
      return d;
    }
    const SdpSolution sol = solve_min_power(prob, opts.solver);
    d.iterations += sol.iterations;
    if (sol.status != SolveStatus::optimal) {
      d.status = sol.status;
      return d;
    }
    d.sdp_objective += share * sol.objective;
    d.W.push_back(prob.index.unpack(sol.x, 0));
    d.lambda.push_back(multipliers_of(prob, sol.x, 0));
  }
  Extraction ex = extract_beamformers(d.W);
  d.w = std::move(ex.w);
  d.rank_ratio = std::move(ex.rank_ratio);
  d.rank_violation = d.max_rank_ratio() > opts.tol_rank;
  for (const auto& w : d.w) d.total_power += share * w.squared_norm();
  return d;
}

BeamDesign design(const Scenario& s, const ChannelSet& cs, Scheme scheme, const DesignOptions& opts) {
  if (scheme == Scheme::oma) return design_oma(s, cs.h_hat, opts);
  return design_noma(s, cs.h_hat, cs.order, scheme, opts);
}

}  // namespace noma
