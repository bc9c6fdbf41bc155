// noma-robust: power sweeps, min-SINR distributions, single designs and
// standalone certification.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "noma/certify.hpp"
#include "noma/errors.hpp"
#include "noma/harness.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out = ".";
  bool no_timestamp = false;
  bool until_feasible = false;
  bool sphere = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "key = value experiment file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--trials", f.trials, "override the trial count")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "override the scenario seed");
  cmd->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--no-timestamp", f.no_timestamp, "omit the timestamp line and solve_ms values");
  cmd->add_flag("--sphere", f.sphere, "draw channel errors on the sphere instead of the ball");
}

noma::ExperimentConfig make_config(const RunFlags& f) {
  noma::ExperimentConfig cfg = noma::load_config(f.config);
  if (f.trials) cfg.trials = *f.trials;
  if (f.seed) cfg.scenario.seed = *f.seed;
  cfg.workers = f.workers;
  cfg.out_dir = f.out;
  cfg.timestamp = !f.no_timestamp;
  cfg.count_feasible = f.until_feasible;
  cfg.errors_on_sphere = f.sphere;
  cfg.validate();
  return cfg;
}

void print_cells(const noma::SummaryStats& stats) {
  std::printf("%-10s %8s %8s %7s %7s %7s %6s %14s %10s\n", "scheme", "epsilon", "gamma_dB", "trials", "optimal",
              "infeas", "rank!", "mean_power", "viol_frac");
  for (const auto& c : stats.cells) {
    std::printf("%-10s %8.4g %8.4g %7d %7d %7d %6d %14.6g %10.4f\n", noma::to_string(c.scheme).c_str(), c.epsilon,
                c.gamma_db, c.trials, c.optimal, c.infeasible, c.rank_violations,
                c.optimal > 0 ? c.mean_power_linear : 0.0, c.violation_fraction);
  }
}

int run_certify(const std::string& path, double epsilon) {
  std::ifstream in(path);
  if (!in) throw noma::IoError("cannot read design '" + path + "'");
  const noma::DesignFile f = noma::read_design_csv(in);
  const int users = static_cast<int>(f.h_hat.size());
  noma::Scenario s = noma::Scenario::uniform(f.h_hat.front().dim(), users, epsilon, 0.0, 1.0);
  s.noise_var = f.noise_var;
  const noma::SinrReport rep = noma::certify_design(f.design, s, f.h_hat);
  std::cout << "k,l,nominal_sinr_db,worst_case_sinr_db,lambda\n";
  for (const auto& e : rep.entries) {
    std::cout << e.k << ',' << e.l << ',' << noma::format_number(noma::linear_to_db(e.nominal)) << ','
              << noma::format_number(noma::linear_to_db(e.worst_case)) << ',' << noma::format_number(e.lambda_star)
              << '\n';
  }
  std::cerr << "min worst-case SINR " << noma::linear_to_db(rep.min_worst_case()) << " dB over " << rep.entries.size()
            << " layers\n";
  return 0;
}

int run_design(const std::string& config, std::uint64_t trial, const std::string& scheme, std::optional<double> eps,
               std::optional<double> gamma_db, const std::string& out) {
  const noma::ExperimentConfig cfg = noma::load_config(config);
  noma::Scenario s = cfg.scenario.with_epsilon(eps.value_or(cfg.epsilon_list.front()))
                         .with_gamma_db(gamma_db.value_or(cfg.gamma_sweep_db.front()));
  const noma::ChannelSet cs = noma::generate_channels(s, trial);
  const noma::BeamDesign d = noma::design(s, cs, noma::scheme_from_string(scheme), cfg.design);
  std::cerr << "status " << noma::to_string(d.status);
  if (!d.solved()) {
    std::cerr << '\n';
    return 2;
  }
  std::cerr << ", power " << d.total_power << ", max rank ratio " << d.max_rank_ratio()
            << (d.rank_violation ? " (rank violation)" : "") << '\n';
  noma::DesignFile f{d, cs.h_hat, s.noise_var};
  if (out == "-") {
    noma::write_design_csv(std::cout, f);
  } else {
    std::ofstream o(out, std::ios::binary);
    if (!o) throw noma::IoError("cannot write '" + out + "'");
    noma::write_design_csv(o, f);
  }
  return d.rank_violation ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust downlink NOMA beamforming experiments"};
  app.require_subcommand(1);

  RunFlags sweep_flags;
  CLI::App* sweep = app.add_subcommand("sweep", "total power versus SINR threshold");
  add_run_flags(sweep, sweep_flags);
  sweep->add_flag("--until-feasible", sweep_flags.until_feasible,
                  "keep only draws where the robust design at the largest epsilon and gamma is optimal");

  RunFlags dist_flags;
  CLI::App* dist = app.add_subcommand("sinr-dist", "distribution of the minimum achieved SINR");
  add_run_flags(dist, dist_flags);
  dist->add_flag("--until-feasible", dist_flags.until_feasible,
                 "count --trials as optimal robust designs rather than draws");

  std::string design_path;
  double cert_eps = 0.0;
  CLI::App* cert = app.add_subcommand("certify", "worst-case SINR of a stored design over the error ball");
  cert->add_option("--design", design_path, "design CSV")->required()->check(CLI::ExistingFile);
  cert->add_option("--epsilon", cert_eps, "error radius")->required()->check(CLI::NonNegativeNumber);

  std::string d_config;
  std::uint64_t d_trial = 0;
  std::string d_scheme = "robust";
  std::optional<double> d_eps;
  std::optional<double> d_gamma;
  std::string d_out = "-";
  CLI::App* des = app.add_subcommand("design", "solve one trial and write its design CSV");
  des->add_option("--config", d_config, "key = value experiment file")->required()->check(CLI::ExistingFile);
  des->add_option("--trial", d_trial, "trial index");
  des->add_option("--scheme", d_scheme, "robust, nonrobust or oma");
  des->add_option("--epsilon", d_eps, "error radius (default: first epsilon_list entry)");
  des->add_option("--gamma-db", d_gamma, "SINR threshold in dB (default: first gamma_sweep_db entry)");
  des->add_option("--out", d_out, "output file, - for stdout");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sweep) {
      const auto stats = noma::run_power_sweep(make_config(sweep_flags));
      print_cells(stats);
    } else if (*dist) {
      const auto stats = noma::run_sinr_distribution(make_config(dist_flags));
      print_cells(stats);
    } else if (*cert) {
      return run_certify(design_path, cert_eps);
    } else if (*des) {
      return run_design(d_config, d_trial, d_scheme, d_eps, d_gamma, d_out);
    }
  } catch (const noma::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 74;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
