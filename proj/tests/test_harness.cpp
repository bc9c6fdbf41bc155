#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <unistd.h>

#include "noma/errors.hpp"
#include "noma/harness.hpp"

using namespace noma;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("noma_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> rows(const std::string& text) {
  std::vector<std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string c;
    std::istringstream ls(line);
    while (std::getline(ls, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    out.push_back(cells);
  }
  return out;
}

ExperimentConfig small_config(const fs::path& out) {
  std::istringstream in(
      "M = 2\nK = 2\nseed = 7\ntrials = 6\nepsilon_list = 0.02\ngamma_sweep_db = 0, 4\n"
      "schemes = robust, nonrobust, oma\n");
  ExperimentConfig cfg = parse_config(in);
  cfg.out_dir = out;
  cfg.timestamp = false;
  return cfg;
}

}  // namespace

TEST(Config, ParsesKeysAndDefaults) {
  std::istringstream in(
      "# comment line\nM = 4\nK = 2   # trailing\nepsilon = 0.1\ngamma_min_db = 3\nnoise_var = 0.02, 0.03\n"
      "seed = 99\ntrials = 12\nschemes = robust, oma\ngamma_sweep_db = 0, 2.5\n");
  const ExperimentConfig c = parse_config(in);
  EXPECT_EQ(c.scenario.num_antennas, 4);
  EXPECT_EQ(c.scenario.num_users, 2);
  EXPECT_EQ(c.scenario.epsilon, (std::vector<double>{0.1, 0.1}));
  EXPECT_NEAR(c.scenario.gamma_min[1], db_to_linear(3.0), 1e-15);
  EXPECT_EQ(c.scenario.noise_var, (std::vector<double>{0.02, 0.03}));
  EXPECT_EQ(c.scenario.seed, 99u);
  EXPECT_EQ(c.trials, 12);
  EXPECT_EQ(c.schemes, (std::vector<Scheme>{Scheme::robust, Scheme::oma}));
  EXPECT_EQ(c.gamma_sweep_db, (std::vector<double>{0.0, 2.5}));
  EXPECT_EQ(c.epsilon_list, (std::vector<double>{0.1}));
}

TEST(Config, RejectsMalformedInput) {
  for (const char* text : {"M = 4\nbogus = 1\n", "M = 4\nM = 5\n", "M = four\n", "K = 2\nnoise_var = 1, 2, 3\n",
                           "trials = 0\n", "schemes = robust, mmse\n", "M = 4\nK\n", "epsilon = -0.1\n",
                           "gamma_sweep_db = \n", "seed = 1.5\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(parse_config(in), ParseError) << text;
  }
  EXPECT_THROW(load_config("/nonexistent/noma.conf"), IoError);
}

TEST(Cdf, HandWorkedExample) {
  const auto cdf = empirical_cdf({3.0, 1.0, 2.0, 2.0});
  ASSERT_EQ(cdf.size(), 3u);
  EXPECT_EQ(cdf[0].value, 1.0);
  EXPECT_EQ(cdf[0].probability, 0.25);
  EXPECT_EQ(cdf[1].probability, 0.75);
  EXPECT_EQ(cdf[2].probability, 1.0);
  EXPECT_EQ(cdf_at(cdf, 0.5), 0.0);
  EXPECT_EQ(cdf_at(cdf, 2.0), 0.75);
  EXPECT_EQ(cdf_at(cdf, 2.5), 0.75);
  EXPECT_EQ(cdf_at(cdf, 9.0), 1.0);
  EXPECT_THROW(empirical_cdf({}), ContractError);
}

TEST(Cdf, UniformSampleWithinKolmogorovBand) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(10000);
  for (double& x : v) x = u(rng);
  const auto cdf = empirical_cdf(v);
  double dev = 0.0;
  double prev = 0.0;
  for (const auto& p : cdf) {
    dev = std::max({dev, std::abs(p.probability - p.value), std::abs(prev - p.value)});
    prev = p.probability;
  }
  EXPECT_LE(dev, 0.02);
  EXPECT_EQ(cdf.back().probability, 1.0);
}

TEST(Histogram, MassSumsToOne) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(10.0, 2.0);
  for (int n : {1, 5, 50, 5000}) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (double& x : v) x = g(rng);
    const auto h = histogram(v);
    EXPECT_GE(h.size(), 20u);
    double mass = 0.0;
    int count = 0;
    for (const auto& b : h) {
      mass += b.mass;
      count += b.count;
      EXPECT_NEAR(b.density * (b.hi - b.lo), b.mass, 1e-12);
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
    EXPECT_EQ(count, n);
    EXPECT_LE(h.front().lo, *std::min_element(v.begin(), v.end()));
    EXPECT_GE(h.back().hi, *std::max_element(v.begin(), v.end()));
  }
  const auto flat = histogram({4.0, 4.0, 4.0});
  EXPECT_NEAR(flat.back().hi - flat.front().lo, 1.0, 1e-12);
}

TEST(Quantile, Interpolates) {
  const std::vector<double> v{1.0, 2.0, 4.0};
  EXPECT_EQ(quantile_sorted(v, 0.0), 1.0);
  EXPECT_EQ(quantile_sorted(v, 0.5), 2.0);
  EXPECT_EQ(quantile_sorted(v, 0.75), 3.0);
  EXPECT_EQ(quantile_sorted(v, 1.0), 4.0);
}

TEST(Csv, NumberFormat) {
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(10.0), "10");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(format_number(-1234567.891234567), "-1234567.89123");
  EXPECT_EQ(format_number(2.5e-9), "2.5e-09");
}

TEST(Csv, RecordsBlankWhenNotOptimal) {
  TrialRecord a;
  a.trial_index = 3;
  a.status = SolveStatus::infeasible;
  a.solve_ms = 12.5;
  TrialRecord b = a;
  b.trial_index = 4;
  b.status = SolveStatus::optimal;
  b.total_power_linear = 2.0;
  b.total_power_db = linear_to_db(2.0);
  b.min_achieved_sinr_db = 10.5;
  b.rank_ratio_max = 0.25;
  b.rank_violation = true;
  std::ostringstream out;
  write_records_csv(out, {a, b}, false);
  const std::string text = out.str();
  EXPECT_EQ(text.find('\r'), std::string::npos);
  const auto r = rows(text);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].size(), 12u);
  EXPECT_EQ(r[1], (std::vector<std::string>{"3", "robust", "0", "0", "infeasible", "", "", "", "", "0", "0", ""}));
  EXPECT_EQ(r[2][5], "2");
  EXPECT_EQ(r[2][6], "3.01029995664");
  EXPECT_EQ(r[2][9], "1");
  std::ostringstream stamped;
  write_records_csv(stamped, {a}, true);
  EXPECT_EQ(stamped.str().rfind("# generated ", 0), 0u);
  EXPECT_NE(stamped.str().find(",12.5\n"), std::string::npos);
}

TEST(Harness, UnwritableOutputDirectory) {
  const fs::path blocker = fresh_dir("blocker");
  std::ofstream(blocker) << "x";
  ExperimentConfig cfg = small_config(blocker / "sub");
  EXPECT_THROW(run_power_sweep(cfg), IoError);
  EXPECT_THROW(run_sinr_distribution(cfg), IoError);
  fs::remove(blocker);
}

TEST(Harness, SweepIsIndependentOfWorkerCount) {
  const fs::path a = fresh_dir("w1");
  const fs::path b = fresh_dir("w8");
  ExperimentConfig cfg = small_config(a);
  const SummaryStats s1 = run_power_sweep(cfg);
  cfg.out_dir = b;
  cfg.workers = 8;
  run_power_sweep(cfg);
  for (const char* f : {"power_sweep.csv", "power_summary.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_EQ(s1.records.size(), 6u * 3u * 2u);
  EXPECT_TRUE(std::is_sorted(s1.records.begin(), s1.records.end(), record_less));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Harness, RecordInvariants) {
  const fs::path dir = fresh_dir("inv");
  const SummaryStats s = run_power_sweep(small_config(dir));
  for (const auto& r : s.records) {
    EXPECT_EQ(r.optimal(), r.total_power_linear.has_value());
    EXPECT_EQ(r.optimal(), r.min_achieved_sinr_db.has_value());
    if (r.optimal()) {
      EXPECT_EQ(r.rank_violation, *r.rank_ratio_max > 1e-4);
      EXPECT_NEAR(*r.total_power_db, linear_to_db(*r.total_power_linear), 1e-12);
    } else {
      EXPECT_FALSE(r.rank_violation);
    }
  }
  for (const auto& c : s.cells) {
    EXPECT_EQ(c.trials, 6);
    EXPECT_EQ(c.optimal + c.infeasible + c.failed, c.trials);
  }
  const auto text = rows(slurp(dir / "power_sweep.csv"));
  EXPECT_EQ(text.size(), s.records.size() + 1);
  fs::remove_all(dir);
}

// With one user OMA and robust NOMA solve the same problem, so equal powers
// show that every scheme sees the same channel draw.
TEST(Harness, SchemesShareChannelDraws) {
  const fs::path dir = fresh_dir("pair");
  std::istringstream in("M = 3\nK = 1\nseed = 5\ntrials = 8\nepsilon_list = 0.05\ngamma_sweep_db = 0\n");
  ExperimentConfig cfg = parse_config(in);
  cfg.out_dir = dir;
  cfg.timestamp = false;
  const SummaryStats s = run_power_sweep(cfg);
  std::map<std::uint64_t, std::map<Scheme, double>> power;
  for (const auto& r : s.records) {
    if (r.optimal()) power[r.trial_index][r.scheme] = *r.total_power_linear;
  }
  int compared = 0;
  for (const auto& [t, m] : power) {
    if (!m.count(Scheme::robust) || !m.count(Scheme::oma)) continue;
    EXPECT_NEAR(m.at(Scheme::robust), m.at(Scheme::oma), 1e-5 * m.at(Scheme::robust)) << "trial " << t;
    if (m.count(Scheme::nonrobust)) {
      EXPECT_LE(m.at(Scheme::nonrobust), m.at(Scheme::robust) * (1 + 1e-6));
    }
    ++compared;
  }
  EXPECT_GT(compared, 0);
  fs::remove_all(dir);
}

TEST(Harness, DistributionCountsFeasibleDraws) {
  const fs::path dir = fresh_dir("dist");
  std::istringstream in("M = 2\nK = 2\nseed = 3\ntrials = 5\nepsilon = 0.05\ngamma_min_db = 0\nschemes = robust, nonrobust\n");
  ExperimentConfig cfg = parse_config(in);
  cfg.out_dir = dir;
  cfg.timestamp = false;
  cfg.count_feasible = true;
  const SummaryStats s = run_sinr_distribution(cfg);
  const CellSummary* robust = s.find(Scheme::robust, 0.05, 0.0);
  const CellSummary* nonrobust = s.find(Scheme::nonrobust, 0.05, 0.0);
  ASSERT_NE(robust, nullptr);
  ASSERT_NE(nonrobust, nullptr);
  EXPECT_EQ(robust->optimal, 5);
  EXPECT_EQ(nonrobust->trials, 5);
  EXPECT_EQ(robust->cdf.back().probability, 1.0);
  double mass = 0.0;
  for (const auto& b : robust->pdf) mass += b.mass;
  EXPECT_NEAR(mass, 1.0, 1e-12);
  for (const char* f : {"sinr_trials.csv", "sinr_cdf.csv", "sinr_pdf.csv"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  fs::remove_all(dir);
}

TEST(DesignCsv, RoundTrip) {
  DesignFile f;
  f.design.scheme = Scheme::nonrobust;
  f.design.status = SolveStatus::optimal;
  f.design.order = {1, 0};
  f.design.w = {ComplexVector{cplx(0.5, -0.25), 1.0}, ComplexVector{0.0, cplx(0.0, 2.0)}};
  f.h_hat = {ComplexVector{1.0, 2.0}, ComplexVector{cplx(0.1, 0.2), -0.3}};
  f.noise_var = {0.01, 0.02};
  std::stringstream s;
  write_design_csv(s, f);
  const DesignFile g = read_design_csv(s);
  EXPECT_EQ(g.design.scheme, Scheme::nonrobust);
  EXPECT_EQ(g.design.order, f.design.order);
  EXPECT_EQ(g.noise_var, f.noise_var);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(g.h_hat[i].eigen(), f.h_hat[i].eigen());
    EXPECT_EQ(g.design.w[i].eigen(), f.design.w[i].eigen());
  }
  EXPECT_NEAR(g.design.total_power, 0.3125 + 1.0 + 4.0, 1e-12);
}

TEST(DesignCsv, RejectsMalformed) {
  for (const char* text : {"scheme,0,robust\n", "scheme,0,robust\norder,0,0\nnoise,0,0.1\nh,0,1\nw,0,1,0\n",
                           "scheme,0,robust\norder,0,1\nnoise,0,0.1\nh,0,1,0\nw,0,1,0\n",
                           "scheme,0,zf\norder,0,0\nnoise,0,0.1\nh,0,1,0\nw,0,1,0\n",
                           "scheme,0,robust\norder,0,0\nnoise,0,0.1\nh,0,1,0\nw,0,1,0\nz,0,1\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_design_csv(in), ParseError) << text;
  }
}
