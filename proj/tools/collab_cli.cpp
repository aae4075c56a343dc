// Batch front-end: alpha solves, figure data, and the simulation experiments.
//
// Exit codes: 0 all assertions passed, 1 bad flags or parameters, 2 no sign
// change in the alpha bracket, 3 figure regression, 4 statistical failure,
// 5 analytic failure.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "collab/collab.hpp"

using namespace collab;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kBadInput = 1, kNoSignChange = 2, kFigure = 3, kStatistical = 4, kAnalytic = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Flag parsing helpers

double parse_real(const std::string& text, const char* flag) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw UsageError(std::string(flag) + ": not a number: " + text);
  return v;
}

// "a/b" or a plain decimal
double parse_rational(const std::string& text, const char* flag) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return parse_real(text, flag);
  const double num = parse_real(text.substr(0, slash), flag);
  const double den = parse_real(text.substr(slash + 1), flag);
  if (den == 0.0) throw UsageError(std::string(flag) + ": zero denominator");
  return num / den;
}

std::pair<int, int> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw UsageError("--m-range expects lo:hi");
  int lo = 0;
  int hi = 0;
  const std::string a = text.substr(0, colon);
  const std::string b = text.substr(colon + 1);
  auto r1 = std::from_chars(a.data(), a.data() + a.size(), lo);
  auto r2 = std::from_chars(b.data(), b.data() + b.size(), hi);
  if (r1.ec != std::errc() || r1.ptr != a.data() + a.size() || r2.ec != std::errc() ||
      r2.ptr != b.data() + b.size() || lo > hi)
    throw UsageError("--m-range expects lo:hi with integers lo <= hi");
  return {lo, hi};
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(item, flag));
  if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
  return out;
}

MechanismKind parse_mechanism(const std::string& s) {
  if (s == "pool") return MechanismKind::Pool;
  if (s == "size-check") return MechanismKind::SizeCheck;
  if (s == "corrupt-deploy") return MechanismKind::CorruptDeploy;
  if (s == "cross-check") return MechanismKind::CrossCheck;
  throw UsageError("--mechanism must be pool, size-check, corrupt-deploy or cross-check");
}

// ---------------------------------------------------------------------------
// Report model

using Cell = std::variant<std::string, double, long, bool>;

struct Check {
  std::string name;
  bool passed = true;
  int code = kOk;  // exit code when failed
};

struct Report {
  std::string command;
  json context = json::object();
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
  std::vector<Check> checks;

  void check(std::string name, bool passed, int code) { checks.push_back({std::move(name), passed, code}); }
  int exit_code() const {
    for (const auto& c : checks)
      if (!c.passed) return c.code;
    return kOk;
  }
};

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const Cell& c) {
  std::string s = std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::string>) return v;
        else if constexpr (std::is_same_v<T, double>) return format_double(v);
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else return std::to_string(v);
      },
      c);
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + '"';
}

json json_value(const Cell& c) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
          if (std::isfinite(v)) return v;
          return format_double(v);  // JSON has no inf/nan literal
        } else {
          return v;
        }
      },
      c);
}

void emit_csv(const Report& r, std::ostream& out) {
  for (std::size_t i = 0; i < r.header.size(); ++i) out << (i ? "," : "") << csv_field(r.header[i]);
  out << "\r\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_field(row[i]);
    out << "\r\n";
  }
}

void emit_json(const Report& r, std::ostream& out) {
  json j;
  j["command"] = r.command;
  for (auto& [k, v] : r.context.items()) j[k] = v;
  json rows = json::array();
  for (const auto& row : r.rows) {
    json o = json::object();
    for (std::size_t i = 0; i < row.size(); ++i) o[r.header[i]] = json_value(row[i]);
    rows.push_back(std::move(o));
  }
  j["rows"] = std::move(rows);
  json checks = json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}});
  j["checks"] = std::move(checks);
  j["passed"] = r.exit_code() == kOk;
  // doubles come out in their shortest round-trip form
  out << j.dump(2) << '\n';
}

json params_json(const ProblemParams& p) {
  return {{"sigma", p.sigma}, {"cost", p.cost}, {"agents", p.agents}, {"dim", p.dim}, {"n_star", p.n_star}};
}

// ---------------------------------------------------------------------------
// Options shared by every command

struct Options {
  double sigma = 1.0;
  std::string cost = "1/900";
  int agents = 9;
  int dim = 1;
  double epsilon = 0.5;
  std::optional<std::string> m_range;
  long replications = 100000;
  std::uint64_t seed = 1;
  std::optional<std::string> mu_grid;
  std::string mechanism = "cross-check";
  std::string distribution = "gaussian";
  bool unrestricted = false;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::string> format;
  std::optional<std::string> out;
  bool cost_given = false;
  bool dim_given = false;
};

ProblemParams params_from(const Options& o) {
  return make_params(o.sigma, parse_rational(o.cost, "--cost"), o.agents, o.dim);
}

std::pair<int, int> figure_range(const Options& o, std::pair<int, int> fallback) {
  const auto r = o.m_range ? parse_range(*o.m_range) : fallback;
  if (r.first < 5 || r.second > 500) throw UsageError("--m-range must lie within 5:500");
  return r;
}

DistributionSpec distribution_from(const Options& o, const ProblemParams& p) {
  const Vec zero(static_cast<std::size_t>(p.dim), 0.0);
  if (o.distribution == "gaussian") return gaussian(zero, p.sigma);
  if (o.distribution == "uniform") return uniform_box(zero, std::sqrt(3.0) * p.sigma, p.sigma);
  if (o.distribution == "rademacher") return scaled_rademacher(zero, p.sigma, p.sigma);
  throw UsageError("--distribution must be gaussian, uniform or rademacher");
}

Scenario scenario_from(const Options& o, const ProblemParams& p, bool want_grid) {
  const Mechanism mech{parse_mechanism(o.mechanism), o.epsilon};
  std::vector<Vec> grid;
  if (o.mu_grid) {
    for (double v : parse_list(*o.mu_grid, "--mu-grid")) grid.emplace_back(static_cast<std::size_t>(p.dim), v);
  } else if (want_grid) {
    grid = default_mu_grid(p);
  }
  if (o.replications < 2) throw UsageError("--replications must be at least 2");
  Scenario sc = make_scenario(p, mech, distribution_from(o, p), o.replications, o.seed, grid);
  sc.threads = o.threads;
  return sc;
}

void describe_scenario(Report& r, const Scenario& sc) {
  r.context["params"] = params_json(sc.params);
  r.context["mechanism"] = to_string(sc.mechanism.kind);
  if (sc.mechanism.kind == MechanismKind::CorruptDeploy) r.context["epsilon"] = sc.mechanism.epsilon;
  if (sc.alpha > 0.0) {
    const auto s = solve_alpha(sc.params);
    r.context["alpha"] = s.alpha;
    r.context["solver_residual"] = s.residual;
  }
  r.context["replications"] = sc.replications;
  r.context["seed"] = sc.master_seed;
}

// ---------------------------------------------------------------------------
// Commands

Report cmd_solve_alpha(const Options& o) {
  const ProblemParams p = params_from(o);
  if (p.agents <= 4) throw UsageError("m \xe2\x89\xa4 4 uses no corruption; there is no alpha to solve for");
  const AlphaSolution s = solve_alpha(p);
  Report r;
  r.command = "solve-alpha";
  r.context["params"] = params_json(p);
  std::string warnings;
  for (const auto& w : s.warnings) warnings += (warnings.empty() ? "" : "; ") + w;
  r.header = {"sigma", "cost", "agents", "dim", "n_star", "alpha", "a_m", "bracket_lo", "bracket_hi", "residual",
              "iterations", "warnings"};
  r.rows.push_back({p.sigma, p.cost, static_cast<long>(p.agents), static_cast<long>(p.dim), p.n_star, s.alpha, s.a_m,
                    s.bracket_lo, s.bracket_hi, s.residual, static_cast<long>(s.iterations), warnings});
  r.check("|G(alpha)| < 1e-9", std::abs(s.residual) < 1e-9, kAnalytic);
  return r;
}

Report cmd_g_check(const Options& o) {
  const auto [lo, hi] = figure_range(o, {5, 500});
  Report r;
  r.command = "figures g-check";
  r.context["note"] = "C_m drops from 20 to 5 after m = 20, which produces the jump between m = 20 and m = 21";
  r.header = {"m", "g_at_bracket_top", "c_m"};
  bool all_positive = true;
  for (int m = lo; m <= hi; ++m) {
    const auto p = unit_market(m);
    const int cm = bracket_constant(m);
    const double g = g_of_alpha((1.0 + static_cast<double>(cm) / m) * std::sqrt(static_cast<double>(p.n_star)), p);
    all_positive = all_positive && g > 0.0;
    r.rows.push_back({static_cast<long>(m), g, static_cast<long>(cm)});
  }
  r.check("G > 0 at the top of the bracket for every m", all_positive, kFigure);
  return r;
}

Report cmd_em_check(const Options& o) {
  const auto [lo, hi] = figure_range(o, {5, 500});
  Report r;
  r.command = "figures em-check";
  r.header = {"m", "e_m", "five_over_m"};
  bool all_below = true;
  for (int m = lo; m <= hi; ++m) {
    const double e = e_of_m(m, solve_alpha(unit_market(m)).a_m);
    all_below = all_below && e < 5.0 / m;
    r.rows.push_back({static_cast<long>(m), e, 5.0 / m});
  }
  r.check("E(m) < 5/m for every m", all_below, kFigure);
  return r;
}

Report cmd_pos_table(const Options& o) {
  const auto [lo, hi] = o.m_range ? parse_range(*o.m_range) : std::pair{5, 100};
  if (lo < 5) throw UsageError("pos-table needs m >= 5");
  Report r;
  r.command = "experiment pos-table";
  r.context["note"] = "cost is set to sigma^2/(100 m) for each m so that n* = 10; the ratio does not depend on it";
  r.header = {"m", "alpha", "pos", "pos_from_penalty"};
  bool in_range = true;
  double worst = 0.0;
  for (int m = lo; m <= hi; ++m) {
    const auto p = make_params(o.sigma, o.sigma * o.sigma / (100.0 * m), m);
    const double alpha = solve_alpha(p).alpha;
    const double pos = pos_mechany(p, alpha);
    const double via = m * penalty_closed_form(static_cast<double>(p.n_star), p, alpha) /
                       (2.0 * p.sigma * std::sqrt(p.cost * m));
    in_range = in_range && pos > 1.0 && pos < 2.0;
    worst = std::max(worst, std::abs(pos - via));
    r.rows.push_back({static_cast<long>(m), alpha, pos, via});
  }
  r.context["max_identity_gap"] = worst;
  r.check("1 < PoS < 2 for every m", in_range, kAnalytic);
  r.check("closed-form PoS matches the integrated penalty within 1e-9", worst <= 1e-9, kAnalytic);
  return r;
}

// Closed-form risk of the recommended profile, when one is available.
std::optional<double> recommended_risk(const Scenario& sc) {
  const ProblemParams& p = sc.params;
  switch (sc.mechanism.kind) {
    case MechanismKind::Pool:
    case MechanismKind::SizeCheck:
      return p.sigma * p.sigma * p.dim / (p.agents * static_cast<double>(pooled_share_count(p)));
    case MechanismKind::CorruptDeploy: return mechpk_exploit_risk(p, sc.mechanism.epsilon).deployed;
    case MechanismKind::CrossCheck:
      if (p.agents <= 4) return p.sigma * p.sigma * p.dim / (p.agents * static_cast<double>(p.n_star));
      if (p.dim == 1) return rinf_max_risk(static_cast<double>(p.n_star), p, sc.alpha);
      return std::nullopt;  // fixed-weight estimator; only a bound is known
  }
  return std::nullopt;
}

Report cmd_mc_vs_closed_form(const Options& o) {
  const ProblemParams p = params_from(o);
  const Scenario sc = scenario_from(o, p, false);
  const auto cf = recommended_risk(sc);
  if (!cf) throw UsageError("no closed-form risk for this configuration (cross-check with --dim > 1)");
  Report r;
  r.command = "experiment mc-vs-closed-form";
  describe_scenario(r, sc);
  r.header = {"mu", "mse", "std_error", "closed_form", "z"};
  bool ok = true;
  for (const Vec& mu : sc.mu_grid) {
    Scenario one = sc;
    one.mu_grid = {mu};
    const EmpiricalPenalty e = run_replications(one);
    const double z = (e.mean_sq_error - *cf) / e.std_error;
    ok = ok && std::abs(z) <= kSigmaRule;
    r.rows.push_back({mu[0], e.mean_sq_error, e.std_error, *cf, z});
  }
  r.check("Monte Carlo risk within 3 standard errors of the closed form", ok, kStatistical);
  return r;
}

std::vector<Strategy> sweep_menu(const Options& o, const Scenario& sc, std::vector<std::string>& expected) {
  const ProblemParams& p = sc.params;
  std::vector<Strategy> menu;
  switch (sc.mechanism.kind) {
    case MechanismKind::SizeCheck:
      menu = size_check_restricted_menu(p);
      if (o.unrestricted) {
        menu.push_back(fabrication_exploit(p));
        expected.push_back(menu.back().label);
      }
      break;
    case MechanismKind::CorruptDeploy:
      menu = default_menu(p, sc.mechanism, sc.alpha, false);
      if (o.unrestricted) {
        menu.push_back({sc.profile[0].n, submit::Identity{},
                        est::FixedWeighted{mechpk_exploit_tau_sq(p, sc.mechanism.epsilon)}, "estimator=reweight-noisy"});
        expected.push_back(menu.back().label);
      }
      break;
    case MechanismKind::Pool:
    case MechanismKind::CrossCheck: menu = default_menu(p, sc.mechanism, sc.alpha); break;
  }
  return menu;
}

Report cmd_nash_sweep(const Options& o) {
  const ProblemParams p = params_from(o);
  const Scenario sc = scenario_from(o, p, true);
  std::vector<std::string> expected;
  const auto menu = sweep_menu(o, sc, expected);
  const SweepResult res = nash_deviation_sweep(sc, menu);
  Report r;
  r.command = "experiment nash-sweep";
  describe_scenario(r, sc);
  r.header = {"strategy", "n", "penalty", "std_error", "closed_form", "delta", "combined_se", "z",
              "profitable", "expected_profitable", "grid_max_only", "note"};
  const auto cf_cell = [](const std::optional<double>& v) -> Cell { return v ? Cell{*v} : Cell{std::string()}; };
  r.rows.push_back({std::string("recommended"), sc.profile[0].n, res.baseline.total, res.baseline.std_error,
                    cf_cell(res.baseline_closed_form), 0.0, 0.0, 0.0, false, false,
                    res.baseline.lower_bound_on_sup, std::string()});
  bool restricted_ok = true;
  bool exploits_found = true;
  for (const SweepRow& row : res.rows) {
    const bool exp = std::find(expected.begin(), expected.end(), row.strategy.label) != expected.end();
    if (!row.penalty) {
      r.rows.push_back({row.strategy.label, row.strategy.n, std::nan(""), std::nan(""), cf_cell(row.closed_form),
                        std::nan(""), std::nan(""), std::nan(""), false, exp, false, row.note});
      if (exp) exploits_found = false;
      continue;
    }
    const double delta = row.penalty->total - res.baseline.total;
    r.rows.push_back({row.strategy.label, row.strategy.n, row.penalty->total, row.penalty->std_error,
                      cf_cell(row.closed_form), delta, row.combined_se, delta / row.combined_se, row.profitable, exp,
                      row.penalty->lower_bound_on_sup, row.note});
    if (exp) exploits_found = exploits_found && row.profitable;
    else restricted_ok = restricted_ok && !row.profitable;
  }
  r.check("no deviation in the restricted menu beats the recommendation by 3 combined SE", restricted_ok,
          kStatistical);
  if (!expected.empty()) r.check("the known exploit is profitable, as expected", exploits_found, kStatistical);
  return r;
}

Report cmd_ir_check(const Options& o) {
  const ProblemParams p = params_from(o);
  const Scenario sc = scenario_from(o, p, false);
  const IrResult ir = ir_check(sc);
  Report r;
  r.command = "experiment ir-check";
  describe_scenario(r, sc);
  r.header = {"participating", "std_error", "standalone"};
  r.rows.push_back({ir.participating, ir.std_error, ir.standalone});
  r.check("participating penalty below the standalone optimum 2 sigma sqrt(c d)", ir.ok, kStatistical);
  return r;
}

Report cmd_highdim(const Options& o) {
  Options q = o;
  if (!o.dim_given) q.dim = 3;
  if (!o.cost_given) q.cost = "1/300";
  q.mechanism = "cross-check";
  const ProblemParams p = params_from(q);
  const Scenario sc = scenario_from(q, p, false);
  const HighDimResult hd = highdim_nic_check(sc, highdim_menu(p, sc.alpha));
  Report r;
  r.command = "experiment highdim-check";
  describe_scenario(r, sc);
  r.context["distribution"] = q.distribution;
  r.context["ratio"] = hd.ratio;
  r.context["ratio_std_error"] = hd.ratio_se;
  r.context["ratio_bound"] = hd.bound;
  r.context["pos_proxy"] = hd.pos_proxy;
  r.context["pos_bound"] = hd.pos_bound;
  r.header = {"strategy", "penalty", "std_error"};
  r.rows.push_back({std::string("recommended"), hd.sweep.baseline.total, hd.sweep.baseline.std_error});
  for (const SweepRow& row : hd.sweep.rows) {
    if (row.penalty) r.rows.push_back({row.strategy.label, row.penalty->total, row.penalty->std_error});
    else r.rows.push_back({row.strategy.label, std::nan(""), std::nan("")});
  }
  r.check("recommended / best deviation <= 1 + 5/m (3 SE)", hd.ratio <= hd.bound + kSigmaRule * hd.ratio_se,
          kStatistical);
  r.check("m penalty / (2 sigma sqrt(c m d)) < 2 + 10/m", hd.pos_proxy < hd.pos_bound, kStatistical);
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative mean estimation: mechanisms, analytics and experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--sigma", o.sigma, "per-coordinate standard deviation");
  app.add_option("--cost", o.cost, "cost per sample, a decimal or a/b");
  app.add_option("--agents", o.agents, "number of agents m");
  app.add_option("--dim", o.dim, "data dimension d");
  app.add_option("--epsilon", o.epsilon, "corrupt-and-deploy tolerance");
  app.add_option("--m-range", o.m_range, "lo:hi, inclusive");
  app.add_option("--replications", o.replications, "Monte Carlo replications");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--mu-grid", o.mu_grid, "comma-separated means, applied to every coordinate");
  app.add_option("--mechanism", o.mechanism, "pool | size-check | corrupt-deploy | cross-check");
  app.add_option("--distribution", o.distribution, "gaussian | uniform | rademacher");
  app.add_flag("--unrestricted", o.unrestricted, "include the known exploits in the sweep");
  app.add_option("--threads", o.threads, "worker threads");
  app.add_option("--format", o.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--out", o.out, "output file (default stdout)");

  std::function<Report()> run;
  auto leaf = [&](CLI::App* parent, const char* name, const char* help, std::function<Report()> fn) {
    parent->add_subcommand(name, help)->fallthrough()->callback([&run, fn] { run = fn; });
  };
  auto* solve = app.add_subcommand("solve-alpha", "solve the root equation for alpha")->fallthrough();
  solve->callback([&] { run = [&] { return cmd_solve_alpha(o); }; });
  auto* figures = app.add_subcommand("figures", "figure data with sign/bound checks")->fallthrough();
  figures->require_subcommand(1);
  leaf(figures, "g-check", "G at the top of the bracket", [&] { return cmd_g_check(o); });
  leaf(figures, "em-check", "E(m) against 5/m", [&] { return cmd_em_check(o); });
  auto* experiment = app.add_subcommand("experiment", "analytic and Monte Carlo checks")->fallthrough();
  experiment->require_subcommand(1);
  leaf(experiment, "nash-sweep", "unilateral deviations against the recommendation", [&] { return cmd_nash_sweep(o); });
  leaf(experiment, "ir-check", "participation versus going alone", [&] { return cmd_ir_check(o); });
  leaf(experiment, "pos-table", "price of stability over a range of m", [&] { return cmd_pos_table(o); });
  leaf(experiment, "mc-vs-closed-form", "simulated risk against its closed form",
       [&] { return cmd_mc_vs_closed_form(o); });
  leaf(experiment, "highdim-check", "approximate equilibrium for d > 1", [&] { return cmd_highdim(o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kBadInput;
  }
  o.cost_given = app.count("--cost") > 0;
  o.dim_given = app.count("--dim") > 0;

  try {
    const Report r = run();
    const std::string format = o.format.value_or(solve->parsed() ? "json" : "csv");
    std::ofstream file;
    if (o.out) {
      file.open(*o.out, std::ios::binary);
      if (!file) throw UsageError("cannot open " + *o.out);
    }
    std::ostream& out = o.out ? static_cast<std::ostream&>(file) : std::cout;
    if (format == "json") emit_json(r, out);
    else emit_csv(r, out);
    out.flush();
    for (const auto& c : r.checks) std::cerr << (c.passed ? "PASS  " : "FAIL  ") << c.name << '\n';
    return r.exit_code();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::NoSignChange: return kNoSignChange;
      case ErrorCode::InvalidParam:
      case ErrorCode::NonIntegerNStar:
      case ErrorCode::DimensionMismatch:
      case ErrorCode::InvalidDistribution:
      case ErrorCode::SubsetTooLarge: return kBadInput;
      default: return kAnalytic;
    }
  }
}
