#include "ibsrisk/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "ibsrisk/asymptotic_risk.hpp"
#include "ibsrisk/error.hpp"
#include "ibsrisk/finite_risk.hpp"
#include "ibsrisk/loss_io.hpp"
#include "ibsrisk/optimizer.hpp"
#include "ibsrisk/verify.hpp"

namespace ibsrisk::cli {

using nlohmann::json;

namespace {

struct Options {
  std::string loss = "mse";
  std::optional<double> mu1, mu2, A1, A2;
  int r = 0;
  std::optional<double> omega;
  std::string method = "auto";
  std::string variable = "x";
  std::optional<double> tol;

  std::string estimator = "omega/(n+c)";
  int c = 0;
  std::string table;
  std::optional<double> p;
  std::string p_grid;
  bool simulate = false;
  std::uint64_t samples = 100000;
  std::uint64_t seed = 1;
  std::uint64_t batch = 65536;
  unsigned threads = 0;
  std::string out_file;
  std::string format;

  std::string suite = "all";
  std::string r_range;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string num17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double env_double(const char* name, double fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const double d = std::strtod(v, &end);
  if (end == v || *end != '\0' || !(d > 0.0)) {
    throw DomainError(std::string("environment variable ") + name + " must be a positive number");
  }
  return d;
}

json loss_params(const Options& o) {
  json j = json::object();
  if (o.mu1) j["mu1"] = *o.mu1;
  if (o.mu2) j["mu2"] = *o.mu2;
  if (o.A1) j["A1"] = *o.A1;
  if (o.A2) j["A2"] = *o.A2;
  return j;
}

AsymptoticOptions asym_options(const Options& o) {
  AsymptoticOptions a;
  a.rel_tol = env_double("IBSRISK_QUAD_REL_TOL", a.rel_tol);
  if (o.method == "analytic") a.method = RiskMethod::analytic;
  else if (o.method == "adaptive") a.method = RiskMethod::adaptive;
  a.variable = o.variable == "nu" ? IntegrationVariable::nu : IntegrationVariable::x;
  return a;
}

json quad_json(const QuadratureReport& q) {
  return {{"eta_bar", q.value},
          {"abs_error", q.abs_error_estimate},
          {"method", to_string(q.method)},
          {"subdivisions", q.subdivisions}};
}

class Run {
 public:
  Run(std::string command, const Options& o, json params)
      : command_(std::move(command)), opts_(o), params_(std::move(params)), started_(utc_now()) {}

  json manifest(const json& seeds = json::array()) const {
    return {{"tool", "ibsrisk"},
            {"version", kVersion},
            {"command", command_},
            {"parameters", params_},
            {"seeds", seeds},
            {"started_at", started_},
            {"finished_at", utc_now()}};
  }

  // JSON goes to --out when given, else to stdout
  void emit_json(json body, std::ostream& out, const json& seeds = json::array()) const {
    body["manifest"] = manifest(seeds);
    const std::string text = body.dump(2) + "\n";
    if (opts_.out_file.empty()) {
      out << text;
    } else {
      write_file(opts_.out_file, text);
    }
  }

  // CSV body to --out (with a sidecar manifest) or stdout
  void emit_text(const std::string& text, std::ostream& out, const json& seeds = json::array()) const {
    if (opts_.out_file.empty()) {
      out << text;
      return;
    }
    write_file(opts_.out_file, text);
    write_file(opts_.out_file + ".manifest.json", manifest(seeds).dump(2) + "\n");
  }

 private:
  static void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::ios_base::failure("cannot open " + path + " for writing");
    f << text;
    if (!f) throw std::ios_base::failure("write to " + path + " failed");
  }

  std::string command_;
  const Options& opts_;
  json params_;
  std::string started_;
};

json base_params(const Options& o) {
  json j;
  j["loss"] = o.loss;
  const json lp = loss_params(o);
  if (!lp.empty()) j["loss_params"] = lp;
  j["r"] = o.r;
  return j;
}

int cmd_asymptotic(const Options& o, std::ostream& out) {
  json params = base_params(o);
  params["omega"] = *o.omega;
  params["method"] = o.method;
  params["variable"] = o.variable;
  Run run("asymptotic", o, params);
  const auto loss = resolve_loss(o.loss, loss_params(o));
  auto a = asym_options(o);
  json body;
  if (o.method == "both") {
    a.method = RiskMethod::analytic;
    const auto an = asymptotic_risk(loss, o.r, *o.omega, a);
    a.method = RiskMethod::adaptive;
    const auto ad = asymptotic_risk(loss, o.r, *o.omega, a);
    body = quad_json(an);
    body["method"] = "both";
    body["analytic"] = quad_json(an);
    body["adaptive"] = quad_json(ad);
    body["agreement"] = std::fabs(an.value - ad.value) / std::max(std::fabs(an.value), 1e-300);
  } else {
    body = quad_json(asymptotic_risk(loss, o.r, *o.omega, a));
  }
  run.emit_json(body, out);
  return kOk;
}

int cmd_optimize(const Options& o, std::ostream& out) {
  json params = base_params(o);
  OptimizerConfig cfg;
  cfg.risk = asym_options(o);
  if (o.tol) {
    cfg.omega_rel_tol = *o.tol;
    cfg.residual_rel_tol = *o.tol;
    params["tol"] = *o.tol;
  }
  Run run("optimize", o, params);
  const auto loss = resolve_loss(o.loss, loss_params(o));
  const auto res = find_optimum(loss, o.r, cfg);
  json body = {{"omega_star", res.omega_star},
               {"eta_star", res.eta_star},
               {"bracket", {res.bracket_lo, res.bracket_hi}},
               {"iterations", res.iterations},
               {"stationarity_residual", res.stationarity_residual},
               {"converged", res.converged},
               {"multiplicity_warning", res.multiplicity_warning},
               {"candidates", res.candidates},
               {"left_condition_holds", res.left_condition_holds},
               {"unchecked_hypotheses", res.unchecked_hypotheses}};
  run.emit_json(body, out);
  return kOk;
}

Estimator make_estimator(const Options& o) {
  if (!o.table.empty()) {
    std::ifstream in(o.table);
    if (!in) throw DomainError("cannot read estimator table " + o.table);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw DomainError("estimator table " + o.table + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("values") || !j.at("values").is_array()) {
      throw DomainError("estimator table: expected {\"values\": [...], \"omega\": W, \"c\": C}");
    }
    std::vector<double> values;
    for (const auto& v : j.at("values")) {
      if (!v.is_number()) throw DomainError("estimator table: values must be numbers");
      values.push_back(v.get<double>());
    }
    std::optional<double> omega = o.omega;
    if (j.contains("omega")) omega = j.at("omega").get<double>();
    if (!omega) throw DomainError("estimator table: omega missing (file or --omega)");
    const int c = j.contains("c") ? j.at("c").get<int>() : o.c;
    return Estimator::table(o.r, std::move(values), *omega, c);
  }

  static const std::regex re(R"(^\s*([^/\s]+)\s*/\s*\(\s*[nN]\s*(?:([+-])\s*([0-9a-z]+))?\s*\)\s*$)");
  std::smatch m;
  if (!std::regex_match(o.estimator, m, re)) {
    throw DomainError("estimator must look like omega/(n+c), e.g. \"omega/(n+c)\" or \"3/(n+1)\"");
  }
  double omega = 0.0;
  std::string num = m[1];
  if (num.size() > 2 && num.front() == '(' && num.back() == ')') num = num.substr(1, num.size() - 2);
  static const std::regex r_expr(R"(^r(?:([+-])(\d+))?$)");
  std::smatch rm;
  if (num == "omega" || num == "W") {
    if (!o.omega) throw DomainError("--omega is required with estimator " + o.estimator);
    omega = *o.omega;
  } else if (std::regex_match(num, rm, r_expr)) {
    omega = o.r + (rm[1].matched ? (rm[1] == "-" ? -1 : 1) * std::stod(rm[2]) : 0.0);
  } else {
    std::size_t used = 0;
    try {
      omega = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != num.size()) throw DomainError("cannot read estimator numerator '" + num + "'");
  }
  int c = 0;
  if (m[2].matched) {
    const std::string cs = m[3];
    if (cs == "c") {
      c = m[2] == "-" ? -o.c : o.c;
    } else {
      if (cs.find_first_not_of("0123456789") != std::string::npos) {
        throw DomainError("cannot read estimator offset '" + cs + "'");
      }
      c = std::stoi(cs) * (m[2] == "-" ? -1 : 1);
    }
  }
  return Estimator::shifted_reciprocal(omega, c);
}

std::string curve_csv(const RiskCurve& curve) {
  std::string s = "p,eta,bound_kind,error_bound\n";
  for (const auto& rec : curve.records) {
    s += num17(rec.p) + "," + num17(rec.eta) + "," + to_string(rec.kind) + "," + num17(rec.error_bound) +
         "\n";
  }
  return s;
}

json curve_json(const RiskCurve& curve) {
  json rows = json::array();
  for (const auto& rec : curve.records) {
    json row = {{"p", rec.p}, {"eta", rec.eta}, {"bound_kind", to_string(rec.kind)},
                {"error_bound", rec.error_bound}};
    if (!rec.message.empty()) row["message"] = rec.message;
    rows.push_back(row);
  }
  return {{"records", rows}};
}

int cmd_curve(const std::string& command, const Options& o, std::ostream& out, std::ostream& err) {
  if (o.p && !o.p_grid.empty()) throw DomainError("give either --p or --p-grid, not both");
  if (!o.p && o.p_grid.empty()) throw DomainError("one of --p or --p-grid is required");
  std::vector<double> grid = o.p ? std::vector<double>{*o.p} : parse_p_grid(o.p_grid);
  for (double p : grid) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("p values must lie in (0, 1), got " + num17(p));
  }
  const bool mc = command == "simulate" || o.simulate;

  json params = base_params(o);
  params["estimator"] = o.table.empty() ? json(o.estimator) : json("table:" + o.table);
  if (o.omega) params["omega"] = *o.omega;
  params["c"] = o.c;
  params["p_grid"] = grid;
  json seeds = json::array();
  if (mc) {
    params["samples"] = o.samples;
    params["batch"] = o.batch;
    seeds.push_back(o.seed);
  }

  const auto loss = resolve_loss(o.loss, loss_params(o));
  const auto est = make_estimator(o);
  est.validate_for(o.r);
  params["estimator_resolved"] = est.describe();
  Run run(command, o, params);

  RiskCurve curve;
  if (mc) {
    SimConfig cfg;
    cfg.samples = o.samples;
    cfg.seed = o.seed;
    cfg.batch = o.batch;
    cfg.threads = o.threads ? o.threads : std::max(1u, std::thread::hardware_concurrency());
    curve = simulate_sweep(loss, est, o.r, grid, cfg);
  } else {
    ExactRiskOptions eo;
    eo.tol = o.tol ? *o.tol : env_double("IBSRISK_TOL", eo.tol);
    curve = risk_sweep(loss, est, o.r, grid, eo);
  }
  // only the sweep keeps the p = 0 reference row
  if (command != "sweep") curve.records.pop_back();

  for (const auto& rec : curve.records) {
    if (!rec.message.empty()) err << "p=" << num17(rec.p) << ": " << rec.message << "\n";
  }
  if (o.format == "json") {
    run.emit_json(curve_json(curve), out, seeds);
  } else {
    run.emit_text(curve_csv(curve), out, seeds);
  }
  return curve.any_failed() ? kUsage : kOk;
}

int cmd_verify(const Options& o, std::ostream& out) {
  int lo = 0, hi = 0;
  if (!o.r_range.empty()) std::tie(lo, hi) = parse_r_range(o.r_range);
  json params = {{"suite", o.suite}, {"r_range", o.r_range}};
  Run run("verify", o, params);
  const auto reports = run_suites(o.suite, lo, hi);
  bool ok = true;
  for (const auto& rep : reports) ok = ok && rep.pass;

  if (o.format == "json") {
    json suites = json::array();
    for (const auto& rep : reports) {
      json rows = json::array();
      for (const auto& row : rep.rows) {
        rows.push_back({{"check", row.label}, {"value", row.value}, {"limit", row.limit},
                        {"margin", row.margin}, {"pass", row.pass}});
      }
      suites.push_back({{"suite", rep.suite}, {"pass", rep.pass}, {"rows", rows}, {"notes", rep.notes}});
    }
    run.emit_json({{"pass", ok}, {"suites", suites}}, out);
  } else {
    std::ostringstream s;
    for (const auto& rep : reports) {
      s << "== " << rep.suite << " : " << (rep.pass ? "PASS" : "FAIL") << "\n";
      for (const auto& row : rep.rows) {
        char line[256];
        std::snprintf(line, sizeof line, "  %-4s %-60s value=%-12.6g limit=%-12.6g margin=%.3g\n",
                      row.pass ? "ok" : "FAIL", row.label.c_str(), row.value, row.limit, row.margin);
        s << line;
      }
      for (const auto& n : rep.notes) s << "  # " << n << "\n";
    }
    s << (ok ? "ALL PASS" : "FAILURES") << "\n";
    run.emit_text(s.str(), out);
  }
  return ok ? kOk : kVerifyFailed;
}

void error_json(std::ostream& err, const std::string& type, const std::string& msg, int code) {
  err << json{{"error", {{"type", type}, {"message", msg}, {"exit_code", code}}}}.dump() << "\n";
}

}  // namespace

std::vector<double> parse_p_grid(const std::string& spec) {
  std::vector<double> out;
  auto to_d = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
    if (s.empty() || used != s.size()) throw DomainError("p-grid: cannot read '" + s + "'");
    return v;
  };
  auto to_p = [&](const std::string& s) {
    const double v = to_d(s);
    if (!(v > 0.0 && v < 1.0)) throw DomainError("p-grid: values must lie in (0, 1), got '" + s + "'");
    return v;
  };
  if (spec.rfind("logspace:", 0) == 0) {
    std::vector<std::string> parts;
    std::stringstream ss(spec.substr(9));
    for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
    if (parts.size() != 3) throw DomainError("p-grid: expected logspace:A:B:N");
    const double a = to_d(parts[0]), b = to_d(parts[1]);
    const double nd = to_d(parts[2]);
    const int n = static_cast<int>(nd);
    if (!(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) || n < 1 || nd != n)
      throw DomainError("p-grid: logspace needs A, B in (0, 1) and integer N >= 1");
    if (n == 1) return {a};
    for (int i = 0; i < n; ++i) out.push_back(a * std::pow(b / a, double(i) / (n - 1)));
    out.front() = a;
    out.back() = b;
    return out;
  }
  std::stringstream ss(spec);
  for (std::string part; std::getline(ss, part, ',');) {
    const auto b = part.find_first_not_of(" \t");
    out.push_back(to_p(b == std::string::npos ? std::string() : part.substr(b)));
  }
  if (out.empty()) throw DomainError("p-grid is empty");
  return out;
}

std::pair<int, int> parse_r_range(const std::string& spec) {
  static const std::regex re(R"(^\s*(\d+)\s*\.\.\s*(\d+)\s*$)");
  std::smatch m;
  if (!std::regex_match(spec, m, re)) throw DomainError("r range must look like A..B");
  const int a = std::stoi(m[1]), b = std::stoi(m[2]);
  if (a < 1 || a > b) throw DomainError("r range A..B needs 1 <= A <= B");
  return {a, b};
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Risk of inverse binomial sampling estimators", "ibsrisk"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  auto add_loss = [&](CLI::App* sc) {
    sc->add_option("--loss", o.loss, "mse, mae, constant-one, interval, generalized_interval, a JSON file, or inline JSON")
        ->capture_default_str();
    sc->add_option("--mu1", o.mu1, "interval upper ratio (> 1)");
    sc->add_option("--mu2", o.mu2, "interval lower ratio (> 1)");
    sc->add_option("--A1", o.A1, "penalty above mu1");
    sc->add_option("--A2", o.A2, "penalty below 1/mu2");
  };
  auto add_r = [&](CLI::App* sc) { sc->add_option("--r", o.r, "required successes")->required()->check(CLI::PositiveNumber); };
  auto add_quad = [&](CLI::App* sc) {
    sc->add_option("--variable", o.variable, "adaptive integration variable")->check(CLI::IsMember({"x", "nu"}));
  };

  auto* asym = app.add_subcommand("asymptotic", "asymptotic risk eta_bar(omega)");
  add_loss(asym);
  add_r(asym);
  add_quad(asym);
  asym->add_option("--omega", o.omega, "estimator scale omega")->required();
  asym->add_option("--method", o.method)->check(CLI::IsMember({"auto", "analytic", "adaptive", "both"}));

  auto* opt = app.add_subcommand("optimize", "minimize eta_bar over omega");
  add_loss(opt);
  add_r(opt);
  add_quad(opt);
  opt->add_option("--tol", o.tol, "relative tolerance on omega and on the stationarity residual");

  std::vector<CLI::App*> curves;
  for (const char* name : {"risk", "sweep", "simulate"}) {
    auto* sc = app.add_subcommand(name, std::string(name) == "sweep" ? "exact risk over a p grid plus the p=0 limit"
                                        : std::string(name) == "risk" ? "exact (or simulated) finite-p risk"
                                                                      : "Monte Carlo finite-p risk");
    add_loss(sc);
    add_r(sc);
    sc->add_option("--estimator", o.estimator, "omega/(n+c), e.g. \"3/(n+1)\" or \"r-2/(n-1)\"")
        ->capture_default_str();
    sc->add_option("--omega", o.omega);
    sc->add_option("--c", o.c)->capture_default_str();
    sc->add_option("--table", o.table, "JSON file {\"values\": [g(r), g(r+1), ...], \"omega\": W, \"c\": C}");
    sc->add_option("--p", o.p);
    sc->add_option("--p-grid", o.p_grid, "comma list or logspace:A:B:N");
    sc->add_option("--tol", o.tol, "certified truncation tolerance");
    sc->add_flag("--simulate", o.simulate, "Monte Carlo instead of the exact series");
    sc->add_option("--samples", o.samples)->capture_default_str()->check(CLI::PositiveNumber);
    sc->add_option("--seed", o.seed)->capture_default_str();
    sc->add_option("--batch", o.batch)->capture_default_str()->check(CLI::PositiveNumber);
    sc->add_option("--threads", o.threads, "worker threads (0 = all cores); output does not depend on it");
    sc->add_option("--format", o.format)->check(CLI::IsMember({"csv", "json"}));
    curves.push_back(sc);
  }

  auto* ver = app.add_subcommand("verify", "run verification suites");
  ver->add_option("--suite", o.suite)
      ->capture_default_str()
      ->check(CLI::IsMember({"mse-minimax", "mae-stationarity", "interval-guarantee", "convergence",
                             "special-functions", "all"}));
  ver->add_option("--r-range", o.r_range, "A..B");
  ver->add_option("--format", o.format)->check(CLI::IsMember({"text", "json"}));

  for (auto* sc : {asym, opt, ver}) sc->add_option("--out", o.out_file, "write output to FILE");
  for (auto* sc : curves) sc->add_option("--out", o.out_file, "write CSV to FILE and FILE.manifest.json");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    error_json(err, "usage", e.what(), kUsage);
    return kUsage;
  }

  try {
    if (asym->parsed()) return cmd_asymptotic(o, out);
    if (opt->parsed()) return cmd_optimize(o, out);
    if (ver->parsed()) return cmd_verify(o, out);
    for (auto* sc : curves) {
      if (sc->parsed()) return cmd_curve(sc->get_name(), o, out, err);
    }
  } catch (const DivergenceError& e) {
    error_json(err, "divergence", e.what(), kDivergence);
    return kDivergence;
  } catch (const NoOptimumError& e) {
    error_json(err, "no_optimum", e.what(), kNoOptimum);
    return kNoOptimum;
  } catch (const std::exception& e) {
    error_json(err, "error", e.what(), kUsage);
    return kUsage;
  }
  return kUsage;
}

}  // namespace ibsrisk::cli
