#include "noma/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "noma/certify.hpp"
#include "noma/errors.hpp"

namespace noma {

namespace {

constexpr std::size_t kBatch = 256;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError("config: '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& text) {
  Int v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("config: '" + key + "' expects an integer, got '" + text + "'");
  }
  return v;
}

std::vector<double> parse_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_double(key, item));
  if (out.empty()) throw ParseError("config: '" + key + "' is empty");
  return out;
}

std::vector<double> per_user(const std::string& key, std::vector<double> v, int users) {
  if (v.size() == 1) v.assign(static_cast<std::size_t>(users), v.front());
  if (static_cast<int>(v.size()) != users) {
    throw ParseError("config: '" + key + "' needs one value or K values");
  }
  return v;
}

std::string timestamp_line() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "# generated %Y-%m-%dT%H:%M:%SZ\n", &tm);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

// Runs fn(0..n-1) on a bounded pool; results land at their own index so the
// output never depends on scheduling.
std::vector<TrialRecord> run_parallel(std::size_t n, int workers,
                                      const std::function<TrialRecord(std::size_t)>& fn) {
  std::vector<TrialRecord> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  const auto count = static_cast<std::size_t>(std::max(1, workers));
  if (count == 1 || n <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(count, n); ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

void prepare_out_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  const auto probe = dir / ".noma_write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw IoError("output directory '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  body(f);
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

Scheme reference_scheme(const std::vector<Scheme>& schemes) {
  return std::find(schemes.begin(), schemes.end(), Scheme::robust) != schemes.end() ? Scheme::robust
                                                                                    : schemes.front();
}

}  // namespace

void ExperimentConfig::validate() const {
  scenario.validate();
  if (schemes.empty()) throw ContractError("ExperimentConfig: schemes is empty");
  if (std::set<Scheme>(schemes.begin(), schemes.end()).size() != schemes.size()) {
    throw ContractError("ExperimentConfig: schemes repeat");
  }
  if (gamma_sweep_db.empty() || epsilon_list.empty()) throw ContractError("ExperimentConfig: sweep lists are empty");
  for (double e : epsilon_list) {
    if (!(e >= 0.0)) throw ContractError("ExperimentConfig: epsilon_list entries must be nonnegative");
  }
  for (double g : gamma_sweep_db) {
    if (!std::isfinite(g)) throw ContractError("ExperimentConfig: gamma_sweep_db entries must be finite");
  }
  if (trials < 1) throw ContractError("ExperimentConfig: trials must be at least 1");
  if (workers < 1) throw ContractError("ExperimentConfig: workers must be at least 1");
  if (count_feasible && max_draws < trials) throw ContractError("ExperimentConfig: max_draws below trials");
  design.solver.validate();
}

ExperimentConfig parse_config(std::istream& in) {
  static const std::set<std::string> keys{"M",          "K",           "epsilon",       "gamma_min_db",
                                          "noise_var",  "cell_radius_m", "min_dist_m",  "shadow_std_db",
                                          "pathloss_exp", "seed",      "trials",        "schemes",
                                          "gamma_sweep_db", "epsilon_list", "distance_law"};
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!keys.count(key)) throw ParseError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (value.empty()) throw ParseError("config line " + std::to_string(line_no) + ": empty value for '" + key + "'");
    if (!kv.emplace(key, value).second) {
      throw ParseError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  auto has = [&](const char* k) { return kv.count(k) > 0; };

  ExperimentConfig cfg;
  Scenario& s = cfg.scenario;
  if (has("M")) s.num_antennas = parse_int<int>("M", kv["M"]);
  if (has("K")) s.num_users = parse_int<int>("K", kv["K"]);
  if (s.num_antennas < 1 || s.num_users < 1) throw ParseError("config: M and K must be positive");
  const int k = s.num_users;
  const std::vector<double> eps = per_user("epsilon", has("epsilon") ? parse_doubles("epsilon", kv["epsilon"])
                                                                     : std::vector<double>{0.06}, k);
  const std::vector<double> gamma_db =
      per_user("gamma_min_db", has("gamma_min_db") ? parse_doubles("gamma_min_db", kv["gamma_min_db"])
                                                   : std::vector<double>{10.0}, k);
  s.epsilon = eps;
  s.gamma_min.clear();
  for (double g : gamma_db) s.gamma_min.push_back(db_to_linear(g));
  s.noise_var = per_user("noise_var", has("noise_var") ? parse_doubles("noise_var", kv["noise_var"])
                                                       : std::vector<double>{0.01}, k);
  if (has("cell_radius_m")) s.cell_radius_m = parse_double("cell_radius_m", kv["cell_radius_m"]);
  if (has("min_dist_m")) s.min_dist_m = parse_double("min_dist_m", kv["min_dist_m"]);
  if (has("shadow_std_db")) s.shadow_std_db = parse_double("shadow_std_db", kv["shadow_std_db"]);
  if (has("pathloss_exp")) s.pathloss_exp = parse_double("pathloss_exp", kv["pathloss_exp"]);
  if (has("seed")) s.seed = parse_int<std::uint64_t>("seed", kv["seed"]);
  if (has("distance_law")) {
    const std::string& law = kv["distance_law"];
    if (law == "uniform_distance") {
      s.distance_law = DistanceLaw::uniform_distance;
    } else if (law == "uniform_area") {
      s.distance_law = DistanceLaw::uniform_area;
    } else {
      throw ParseError("config: distance_law must be uniform_distance or uniform_area");
    }
  }
  if (has("trials")) cfg.trials = parse_int<int>("trials", kv["trials"]);
  if (has("schemes")) {
    cfg.schemes.clear();
    for (const auto& name : split_list(kv["schemes"])) {
      try {
        cfg.schemes.push_back(scheme_from_string(name));
      } catch (const ContractError& e) {
        throw ParseError(std::string("config: ") + e.what());
      }
    }
  }
  cfg.gamma_sweep_db = has("gamma_sweep_db") ? parse_doubles("gamma_sweep_db", kv["gamma_sweep_db"])
                                             : std::vector<double>{gamma_db.front()};
  cfg.epsilon_list = has("epsilon_list") ? parse_doubles("epsilon_list", kv["epsilon_list"])
                                         : std::vector<double>{eps.front()};
  try {
    cfg.validate();
  } catch (const ContractError& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read config '" + path.string() + "'");
  return parse_config(f);
}

bool record_less(const TrialRecord& a, const TrialRecord& b) {
  if (a.trial_index != b.trial_index) return a.trial_index < b.trial_index;
  if (a.scheme != b.scheme) return a.scheme < b.scheme;
  if (a.epsilon != b.epsilon) return a.epsilon < b.epsilon;
  return a.gamma_db < b.gamma_db;
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> values) {
  if (values.empty()) throw ContractError("empirical_cdf: no values");
  std::sort(values.begin(), values.end());
  std::vector<CdfPoint> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.push_back({values[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

double cdf_at(const std::vector<CdfPoint>& cdf, double x) {
  double p = 0.0;
  for (const auto& pt : cdf) {
    if (pt.value > x) break;
    p = pt.probability;
  }
  return p;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ContractError("quantile_sorted: no values");
  if (!(q >= 0.0 && q <= 1.0)) throw ContractError("quantile_sorted: q outside [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<HistogramBin> histogram(const std::vector<double>& values, int min_bins, int max_bins) {
  if (values.empty()) throw ContractError("histogram: no values");
  if (min_bins < 1 || max_bins < min_bins) throw ContractError("histogram: bad bin limits");
  std::vector<double> v = values;
  for (double x : v) {
    if (!std::isfinite(x)) throw ContractError("histogram: values must be finite");
  }
  std::sort(v.begin(), v.end());
  double lo = v.front();
  double hi = v.back();
  if (hi - lo <= 0.0) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
  const double width = 2.0 * iqr / std::cbrt(static_cast<double>(v.size()));
  int bins = min_bins;
  if (width > 0.0) {
    const double want = std::ceil((hi - lo) / width);
    bins = static_cast<int>(std::clamp(want, static_cast<double>(min_bins), static_cast<double>(max_bins)));
  }
  const double step = (hi - lo) / bins;
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    out[static_cast<std::size_t>(b)].lo = lo + b * step;
    out[static_cast<std::size_t>(b)].hi = b + 1 == bins ? hi : lo + (b + 1) * step;
  }
  for (double x : v) {
    auto b = static_cast<int>(std::floor((x - lo) / step));
    b = std::clamp(b, 0, bins - 1);
    ++out[static_cast<std::size_t>(b)].count;
  }
  const double n = static_cast<double>(v.size());
  for (auto& bin : out) {
    bin.mass = bin.count / n;
    bin.density = bin.mass / step;
  }
  return out;
}

const CellSummary* SummaryStats::find(Scheme scheme, double epsilon, double gamma_db) const {
  for (const auto& c : cells) {
    if (c.scheme == scheme && c.epsilon == epsilon && c.gamma_db == gamma_db) return &c;
  }
  return nullptr;
}

std::vector<CellSummary> summarize(const std::vector<TrialRecord>& records, bool with_distribution) {
  std::map<std::tuple<Scheme, double, double>, std::vector<const TrialRecord*>> groups;
  for (const auto& r : records) groups[{r.scheme, r.epsilon, r.gamma_db}].push_back(&r);
  std::vector<CellSummary> out;
  for (const auto& [key, rows] : groups) {
    CellSummary c;
    std::tie(c.scheme, c.epsilon, c.gamma_db) = key;
    c.trials = static_cast<int>(rows.size());
    std::vector<double> power;
    std::vector<double> sinr;
    int violations = 0;
    for (const TrialRecord* r : rows) {
      if (r->status == SolveStatus::infeasible) ++c.infeasible;
      if (!r->optimal()) {
        if (r->status != SolveStatus::infeasible) ++c.failed;
        continue;
      }
      ++c.optimal;
      if (r->rank_violation) ++c.rank_violations;
      power.push_back(*r->total_power_linear);
      sinr.push_back(*r->min_achieved_sinr_db);
      if (*r->min_achieved_sinr_db < c.gamma_db - kViolationMarginDb) ++violations;
    }
    if (!power.empty()) {
      double sum = 0.0;
      for (double p : power) sum += p;
      c.mean_power_linear = sum / static_cast<double>(power.size());
      std::sort(power.begin(), power.end());
      c.median_power_linear = quantile_sorted(power, 0.5);
      c.violation_fraction = static_cast<double>(violations) / static_cast<double>(power.size());
      if (with_distribution) {
        c.cdf = empirical_cdf(sinr);
        std::vector<double> finite;
        for (double x : sinr) {
          if (std::isfinite(x)) finite.push_back(x);
        }
        if (!finite.empty()) c.pdf = histogram(finite);
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

TrialRecord run_trial(const ExperimentConfig& cfg, Scheme scheme, double epsilon, double gamma_db,
                      std::uint64_t trial_index) {
  const Scenario s = cfg.scenario.with_epsilon(epsilon).with_gamma_db(gamma_db);
  const ChannelSet cs = generate_channels(s, trial_index, cfg.errors_on_sphere);
  TrialRecord r;
  r.trial_index = trial_index;
  r.scheme = scheme;
  r.epsilon = epsilon;
  r.gamma_db = gamma_db;
  const auto t0 = std::chrono::steady_clock::now();
  const BeamDesign d = design(s, cs, scheme, cfg.design);
  r.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  r.status = d.status;
  r.solve_iters = d.iterations;
  if (d.solved()) {
    r.total_power_linear = d.total_power;
    r.total_power_db = linear_to_db(d.total_power);
    r.min_achieved_sinr_db = linear_to_db(min_achieved_sinr(d, cs, s));
    r.rank_ratio_max = d.max_rank_ratio();
    r.rank_violation = d.rank_violation;
  }
  return r;
}

namespace {

// Reference-scheme rows for draws 0, 1, ... in order until `cfg.trials` of
// them are optimal.  Batches keep the cut point independent of `workers`.
std::vector<TrialRecord> screen_draws(const ExperimentConfig& cfg, Scheme ref, double eps, double gamma) {
  std::vector<TrialRecord> rows;
  int found = 0;
  std::uint64_t next = 0;
  const auto limit = static_cast<std::uint64_t>(cfg.max_draws);
  while (found < cfg.trials && next < limit) {
    const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(kBatch, limit - next));
    const std::uint64_t base = next;
    auto batch = run_parallel(n, cfg.workers, [&](std::size_t i) { return run_trial(cfg, ref, eps, gamma, base + i); });
    for (auto& r : batch) {
      if (found >= cfg.trials) break;
      if (r.optimal()) ++found;
      rows.push_back(std::move(r));
    }
    next += n;
  }
  return rows;
}

}  // namespace

SummaryStats run_power_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  prepare_out_dir(cfg.out_dir);
  std::vector<std::uint64_t> draws;
  if (cfg.count_feasible) {
    const double eps = *std::max_element(cfg.epsilon_list.begin(), cfg.epsilon_list.end());
    const double gamma = *std::max_element(cfg.gamma_sweep_db.begin(), cfg.gamma_sweep_db.end());
    for (const auto& r : screen_draws(cfg, reference_scheme(cfg.schemes), eps, gamma)) {
      if (r.optimal()) draws.push_back(r.trial_index);
    }
  } else {
    for (int t = 0; t < cfg.trials; ++t) draws.push_back(static_cast<std::uint64_t>(t));
  }
  struct Task {
    std::uint64_t trial;
    Scheme scheme;
    double eps;
    double gamma;
  };
  std::vector<Task> tasks;
  for (std::uint64_t t : draws) {
    for (Scheme sc : cfg.schemes) {
      for (double e : cfg.epsilon_list) {
        for (double g : cfg.gamma_sweep_db) tasks.push_back({t, sc, e, g});
      }
    }
  }
  SummaryStats stats;
  stats.records = run_parallel(tasks.size(), cfg.workers, [&](std::size_t i) {
    return run_trial(cfg, tasks[i].scheme, tasks[i].eps, tasks[i].gamma, tasks[i].trial);
  });
  std::sort(stats.records.begin(), stats.records.end(), record_less);
  stats.cells = summarize(stats.records, false);
  write_file(cfg.out_dir / "power_sweep.csv",
             [&](std::ostream& o) { write_records_csv(o, stats.records, cfg.timestamp); });
  write_file(cfg.out_dir / "power_summary.csv",
             [&](std::ostream& o) { write_summary_csv(o, stats.cells, cfg.timestamp); });
  return stats;
}

SummaryStats run_sinr_distribution(const ExperimentConfig& cfg) {
  cfg.validate();
  prepare_out_dir(cfg.out_dir);
  SummaryStats stats;
  const Scheme ref = reference_scheme(cfg.schemes);
  for (double e : cfg.epsilon_list) {
    for (double g : cfg.gamma_sweep_db) {
      std::vector<TrialRecord> ref_rows =
          cfg.count_feasible ? screen_draws(cfg, ref, e, g)
                             : run_parallel(static_cast<std::size_t>(cfg.trials), cfg.workers,
                                            [&](std::size_t i) { return run_trial(cfg, ref, e, g, i); });
      std::vector<std::uint64_t> others;
      for (const auto& r : ref_rows) {
        if (!cfg.count_feasible || r.optimal()) others.push_back(r.trial_index);
      }
      for (Scheme sc : cfg.schemes) {
        if (sc == ref) continue;
        auto rows = run_parallel(others.size(), cfg.workers,
                                 [&](std::size_t i) { return run_trial(cfg, sc, e, g, others[i]); });
        for (auto& r : rows) stats.records.push_back(std::move(r));
      }
      for (auto& r : ref_rows) stats.records.push_back(std::move(r));
    }
  }
  std::sort(stats.records.begin(), stats.records.end(), record_less);
  stats.cells = summarize(stats.records, true);
  write_file(cfg.out_dir / "sinr_trials.csv",
             [&](std::ostream& o) { write_records_csv(o, stats.records, cfg.timestamp); });
  write_file(cfg.out_dir / "sinr_cdf.csv", [&](std::ostream& o) { write_cdf_csv(o, stats.cells, cfg.timestamp); });
  write_file(cfg.out_dir / "sinr_pdf.csv", [&](std::ostream& o) { write_pdf_csv(o, stats.cells, cfg.timestamp); });
  return stats;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records, bool timestamp) {
  if (timestamp) out << timestamp_line();
  out << "trial_index,scheme,epsilon,gamma_db,status,total_power_linear,total_power_db,min_achieved_sinr_db,"
         "rank_ratio_max,rank_violation,solve_iters,solve_ms\n";
  for (const auto& r : records) {
    out << r.trial_index << ',' << to_string(r.scheme) << ',' << format_number(r.epsilon) << ','
        << format_number(r.gamma_db) << ',' << to_string(r.status) << ',' << opt(r.total_power_linear) << ','
        << opt(r.total_power_db) << ',' << opt(r.min_achieved_sinr_db) << ',' << opt(r.rank_ratio_max) << ','
        << (r.rank_violation ? 1 : 0) << ',' << r.solve_iters << ','
        << (timestamp ? format_number(r.solve_ms) : std::string()) << '\n';
  }
}

void write_summary_csv(std::ostream& out, const std::vector<CellSummary>& cells, bool timestamp) {
  if (timestamp) out << timestamp_line();
  out << "scheme,epsilon,gamma_db,trials,optimal,infeasible,failed,rank_violations,mean_power_linear,"
         "mean_power_db,median_power_linear,violation_fraction\n";
  for (const auto& c : cells) {
    const bool any = c.optimal > 0;
    out << to_string(c.scheme) << ',' << format_number(c.epsilon) << ',' << format_number(c.gamma_db) << ','
        << c.trials << ',' << c.optimal << ',' << c.infeasible << ',' << c.failed << ',' << c.rank_violations << ','
        << (any ? format_number(c.mean_power_linear) : "") << ','
        << (any ? format_number(linear_to_db(c.mean_power_linear)) : "") << ','
        << (any ? format_number(c.median_power_linear) : "") << ','
        << (any ? format_number(c.violation_fraction) : "") << '\n';
  }
}

void write_cdf_csv(std::ostream& out, const std::vector<CellSummary>& cells, bool timestamp) {
  if (timestamp) out << timestamp_line();
  out << "scheme,epsilon,gamma_db,min_sinr_db,cdf\n";
  for (const auto& c : cells) {
    for (const auto& p : c.cdf) {
      out << to_string(c.scheme) << ',' << format_number(c.epsilon) << ',' << format_number(c.gamma_db) << ','
          << format_number(p.value) << ',' << format_number(p.probability) << '\n';
    }
  }
}

void write_pdf_csv(std::ostream& out, const std::vector<CellSummary>& cells, bool timestamp) {
  if (timestamp) out << timestamp_line();
  out << "scheme,epsilon,gamma_db,bin_lo_db,bin_hi_db,count,mass,density\n";
  for (const auto& c : cells) {
    for (const auto& b : c.pdf) {
      out << to_string(c.scheme) << ',' << format_number(c.epsilon) << ',' << format_number(c.gamma_db) << ','
          << format_number(b.lo) << ',' << format_number(b.hi) << ',' << b.count << ',' << format_number(b.mass)
          << ',' << format_number(b.density) << '\n';
    }
  }
}

}  // namespace noma

namespace noma {

namespace {

void write_vector_row(std::ostream& out, const char* field, int index, const ComplexVector& v) {
  out << field << ',' << index;
  for (int i = 0; i < v.dim(); ++i) {
    out << ',' << format_number(v.eigen()(i).real()) << ',' << format_number(v.eigen()(i).imag());
  }
  out << '\n';
}

}  // namespace

void write_design_csv(std::ostream& out, const DesignFile& file) {
  const BeamDesign& d = file.design;
  out << "field,index,values\n";
  out << "scheme,0," << to_string(d.scheme) << '\n';
  out << "order,0";
  for (int u : d.order) out << ',' << u;
  out << '\n';
  for (std::size_t u = 0; u < file.noise_var.size(); ++u) {
    out << "noise," << u << ',' << format_number(file.noise_var[u]) << '\n';
  }
  for (std::size_t u = 0; u < file.h_hat.size(); ++u) write_vector_row(out, "h", static_cast<int>(u), file.h_hat[u]);
  for (std::size_t p = 0; p < d.w.size(); ++p) write_vector_row(out, "w", static_cast<int>(p), d.w[p]);
}

DesignFile read_design_csv(std::istream& in) {
  std::map<int, std::vector<double>> h_rows;
  std::map<int, std::vector<double>> w_rows;
  std::map<int, double> noise;
  std::optional<Scheme> scheme;
  std::vector<int> order;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
    const std::string where = "design line " + std::to_string(line_no);
    if (cells.size() < 2) throw ParseError(where + ": too few fields");
    const std::string& field = cells[0];
    if (field == "field") continue;
    const int index = parse_int<int>(where, cells[1]);
    if (index < 0) throw ParseError(where + ": negative index");
    if (field == "scheme") {
      if (cells.size() != 3) throw ParseError(where + ": scheme row needs one value");
      try {
        scheme = scheme_from_string(cells[2]);
      } catch (const ContractError& e) {
        throw ParseError(where + ": " + e.what());
      }
    } else if (field == "order") {
      order.clear();
      for (std::size_t i = 2; i < cells.size(); ++i) order.push_back(parse_int<int>(where, cells[i]));
    } else if (field == "noise") {
      if (cells.size() != 3) throw ParseError(where + ": noise row needs one value");
      noise[index] = parse_double(where, cells[2]);
    } else if (field == "h" || field == "w") {
      std::vector<double> vals;
      for (std::size_t i = 2; i < cells.size(); ++i) vals.push_back(parse_double(where, cells[i]));
      if (vals.empty() || vals.size() % 2 != 0) throw ParseError(where + ": need re/im pairs");
      auto& target = field == "h" ? h_rows : w_rows;
      if (!target.emplace(index, std::move(vals)).second) throw ParseError(where + ": duplicate row");
    } else {
      throw ParseError(where + ": unknown field '" + field + "'");
    }
  }
  if (!scheme) throw ParseError("design: missing scheme row");
  const auto users = h_rows.size();
  if (users == 0) throw ParseError("design: no channel rows");
  if (w_rows.size() != users || noise.size() != users || order.size() != users) {
    throw ParseError("design: need one h, w and noise row and one order entry per user");
  }
  auto to_vector = [](const std::vector<double>& vals) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(vals.size() / 2));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      v(i) = cplx(vals[static_cast<std::size_t>(2 * i)], vals[static_cast<std::size_t>(2 * i + 1)]);
    }
    return ComplexVector(std::move(v));
  };
  DesignFile f;
  f.design.scheme = *scheme;
  f.design.status = SolveStatus::optimal;
  f.design.order = order;
  std::vector<int> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < users; ++i) {
    if (sorted[i] != static_cast<int>(i)) throw ParseError("design: order is not a permutation");
    if (!h_rows.count(static_cast<int>(i)) || !w_rows.count(static_cast<int>(i)) || !noise.count(static_cast<int>(i))) {
      throw ParseError("design: rows must be indexed 0..K-1");
    }
    f.h_hat.push_back(to_vector(h_rows[static_cast<int>(i)]));
    f.design.w.push_back(to_vector(w_rows[static_cast<int>(i)]));
    f.noise_var.push_back(noise[static_cast<int>(i)]);
    if (f.h_hat.back().dim() != f.h_hat.front().dim() || f.design.w.back().dim() != f.h_hat.front().dim()) {
      throw ParseError("design: vector lengths differ");
    }
  }
  for (const auto& w : f.design.w) f.design.total_power += w.squared_norm();
  if (f.design.scheme == Scheme::oma) f.design.total_power /= static_cast<double>(users);
  return f;
}

}  // namespace noma
