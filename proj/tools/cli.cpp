#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "qkf/acceptance.hpp"
#include "qkf/bounds.hpp"
#include "qkf/closedform.hpp"
#include "qkf/report.hpp"
#include "qkf/riccati.hpp"
#include "qkf/sim.hpp"

namespace qkf::cli {

namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Where the system comes from: a spec file or one of the two worked examples.
struct SpecSource {
  enum class Kind { file, example1, example2 };
  Kind kind = Kind::file;
  std::string path;
  SystemSpec file_spec;
  Example1Params e1;
  Example2Params e2;

  SystemSpec spec() const {
    switch (kind) {
      case Kind::example1: return example1_spec(e1);
      case Kind::example2: return example2_spec(e2);
      case Kind::file: break;
    }
    return validate_spec(file_spec);
  }

  Json to_json() const {
    Json j;
    switch (kind) {
      case Kind::file:
        j["kind"] = "file";
        j["path"] = path;
        break;
      case Kind::example1:
        j["kind"] = "example1";
        j["params"] = {{"m", e1.m},     {"omega", e1.omega}, {"alpha", e1.alpha},
                       {"phi", e1.phi}, {"eta", e1.eta},     {"hbar", e1.hbar}};
        break;
      case Kind::example2:
        j["kind"] = "example2";
        j["params"] = {{"beta", e2.beta}, {"gamma", e2.gamma}, {"phi", e2.phi},
                       {"eta", e2.eta},   {"hbar", e2.hbar}};
        break;
    }
    return j;
  }

  // Pointer to the named parameter, or nullptr when the source has none.
  double* field(const std::string& key) {
    switch (kind) {
      case Kind::example1: {
        const std::map<std::string, double*> f = {{"m", &e1.m},     {"omega", &e1.omega},
                                                  {"alpha", &e1.alpha}, {"phi", &e1.phi},
                                                  {"eta", &e1.eta}, {"hbar", &e1.hbar}};
        auto it = f.find(key);
        return it == f.end() ? nullptr : it->second;
      }
      case Kind::example2: {
        const std::map<std::string, double*> f = {{"beta", &e2.beta}, {"gamma", &e2.gamma},
                                                  {"phi", &e2.phi},   {"eta", &e2.eta},
                                                  {"hbar", &e2.hbar}};
        auto it = f.find(key);
        return it == f.end() ? nullptr : it->second;
      }
      case Kind::file: {
        const std::map<std::string, double*> f = {
            {"phi", &file_spec.phi}, {"eta", &file_spec.eta}, {"hbar", &file_spec.hbar}};
        auto it = f.find(key);
        return it == f.end() ? nullptr : it->second;
      }
    }
    return nullptr;
  }
};

struct CommonFlags {
  std::string spec_path;
  int example = 0;
  std::string set;
  std::string out_dir;
};

double parse_number(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError("invalid number for " + what + ": '" + text + "'");
  }
}

SpecSource resolve_source(const CommonFlags& f) {
  SpecSource src;
  if (!f.spec_path.empty() && f.example != 0) throw UsageError("--spec and --example are exclusive");
  if (f.example == 1) {
    src.kind = SpecSource::Kind::example1;
  } else if (f.example == 2) {
    src.kind = SpecSource::Kind::example2;
  } else if (f.example != 0) {
    throw UsageError("--example must be 1 or 2");
  } else if (!f.spec_path.empty()) {
    src.kind = SpecSource::Kind::file;
    src.path = f.spec_path;
    std::ifstream in(f.spec_path);
    if (!in) throw SpecError("cannot read spec file '" + f.spec_path + "'");
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw SpecError(std::string("spec file is not valid JSON: ") + e.what());
    }
    src.file_spec = spec_from_json(j);
  } else {
    throw UsageError("one of --spec or --example is required");
  }

  if (!f.set.empty()) {
    std::stringstream ss(f.set);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + item + "'");
      const std::string key = item.substr(0, eq);
      double* slot = src.field(key);
      if (!slot) throw UsageError("unknown --set key '" + key + "'");
      *slot = parse_number(item.substr(eq + 1), key);
    }
  }
  return src;
}

void add_source_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--spec", f.spec_path, "Spec JSON file");
  cmd->add_option("--example", f.example, "Built-in example (1 or 2)");
  cmd->add_option("--set", f.set, "Parameter overrides k=v[,k=v...]");
  cmd->add_option("--out", f.out_dir, "Output directory");
}

Json manifest(const std::string& command, const std::vector<std::string>& args,
              const SpecSource* src, std::optional<std::uint64_t> seed,
              const std::vector<std::string>& outputs) {
  Json m;
  m["tool"] = "qkf";
  m["version"] = kVersion;
  m["command"] = command;
  m["args"] = args;
  if (src) {
    m["spec_source"] = src->to_json();
    m["resolved_spec"] = spec_to_json(src->spec());
  }
  m["seed"] = seed ? Json(*seed) : Json(nullptr);
  m["outputs"] = outputs;
  return m;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << content;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

std::optional<double> closed_det(const SpecSource& src) {
  if (src.kind != SpecSource::Kind::example1) return std::nullopt;
  try {
    return example1_det(src.e1);
  } catch (const PhaseSingularity&) {
    return std::nullopt;
  }
}

std::optional<double> closed_product(const SpecSource& src) {
  if (src.kind == SpecSource::Kind::example1 && src.e1.phi == 0.0) return example1_product(src.e1);
  if (src.kind == SpecSource::Kind::example2 && src.e2.phi == 0.0) return example2_product(src.e2);
  return std::nullopt;
}

std::optional<double> closed_product_are(const SpecSource& src) {
  if (src.kind == SpecSource::Kind::example1 && src.e1.phi == 0.0) {
    return example1_product_from_are(src.e1);
  }
  return std::nullopt;
}

AreStrategy parse_method(const std::string& m) {
  if (m.empty() || m == "auto") return AreStrategy::automatic;
  if (m == "hamiltonian") return AreStrategy::hamiltonian;
  if (m == "ode") return AreStrategy::ode;
  throw UsageError("--method must be hamiltonian or ode");
}

int cmd_analyze(const std::vector<std::string>& args, const CommonFlags& f,
                const std::string& method, std::ostream& out) {
  const SpecSource src = resolve_source(f);
  const SystemSpec spec = src.spec();
  const DerivedModel model = build_derived(spec);
  const AreStrategy strategy = parse_method(method);

  const TheoremReport theorem = verify_theorem(model, strategy);
  const ExistenceProbe probe = are_existence_probe(model);

  Json report;
  std::vector<std::string> outputs;
  if (!f.out_dir.empty()) outputs = {"report.json", "manifest.json"};
  const Json man = manifest("analyze", args, &src, std::nullopt, outputs);
  report["manifest"] = man;
  report["spec"] = spec_to_json(spec);
  report["derived"] = derived_to_json(model);
  report["stability"] = stability_to_json(classify_stability(model));
  report["existence"] = probe_to_json(probe);
  report["steady_state"] = theorem.steady ? steady_to_json(*theorem.steady) : Json(nullptr);
  report["theorem"] = theorem_to_json(theorem);
  Json cf;
  if (auto d = closed_det(src)) cf["det"] = *d;
  if (auto p = closed_product(src)) cf["product"] = *p;
  if (auto p = closed_product_are(src)) cf["product_from_are"] = *p;
  report["closed_form"] = cf.is_null() ? Json(nullptr) : cf;

  const std::string text = report.dump(2) + "\n";
  if (f.out_dir.empty()) {
    out << text;
  } else {
    const fs::path dir = prepare_out(f.out_dir);
    write_file(dir / "report.json", text);
    write_file(dir / "manifest.json", man.dump(2) + "\n");
    out << "wrote " << (dir / "report.json").string() << "\n";
  }
  return theorem.has_steady_state ? kOk : kNoSteadySolution;
}

struct SweepFlags {
  std::string param;
  double min = 0.0;
  double max = 1.0;
  int steps = 11;
  bool log = false;
};

// Applies a sweep value to the source. r1 and r2 are the dimensionless
// parameters of the examples, realized by adjusting alpha and beta.
void apply_sweep_value(SpecSource& src, const std::string& param, double value) {
  if (param == "r1") {
    if (src.kind != SpecSource::Kind::example1) throw UsageError("r1 applies to --example 1 only");
    if (!(value > 0.0)) throw UsageError("r1 must be positive");
    const auto& e = src.e1;
    if (!(e.omega > 0.0)) throw UsageError("r1 sweep needs omega > 0");
    src.e1.alpha = e.hbar * e.m * e.omega * e.omega / (8.0 * e.eta * value);
    return;
  }
  if (param == "r2") {
    if (src.kind != SpecSource::Kind::example2) throw UsageError("r2 applies to --example 2 only");
    src.e2.beta = value * src.e2.gamma * src.e2.gamma;
    return;
  }
  double* slot = src.field(param);
  if (!slot) throw UsageError("parameter '" + param + "' does not apply to this spec source");
  *slot = value;
}

int cmd_sweep(const std::vector<std::string>& args, const CommonFlags& f, const SweepFlags& s,
              const std::string& method, std::ostream& out) {
  static const std::vector<std::string> known = {"phi",  "eta",   "alpha", "beta", "gamma",
                                                 "m",    "omega", "r1",    "r2"};
  if (std::find(known.begin(), known.end(), s.param) == known.end()) {
    throw UsageError("unknown sweep parameter '" + s.param + "'");
  }
  if (s.steps < 1) throw UsageError("--steps must be >= 1");
  if (s.log && !(s.min > 0.0 && s.max > 0.0)) throw UsageError("--log needs positive bounds");
  const SpecSource base = resolve_source(f);
  const AreStrategy strategy = parse_method(method);
  {
    SpecSource probe = base;
    apply_sweep_value(probe, s.param, s.min);
  }

  std::ostringstream csv;
  csv << "param,value,kappa,bound,exists,det,product,closed_det,abs_diff_det,closed_product,"
         "abs_diff_product,closed_product_from_are\n";
  auto cell = [](std::optional<double> v) { return v ? format_double(*v) : std::string(); };
  for (int i = 0; i < s.steps; ++i) {
    const double frac = s.steps == 1 ? 0.0 : static_cast<double>(i) / (s.steps - 1);
    const double value =
        s.log ? s.min * std::pow(s.max / s.min, frac) : s.min + (s.max - s.min) * frac;
    SpecSource src = base;
    apply_sweep_value(src, s.param, value);
    const DerivedModel model = build_derived(src.spec());

    std::optional<double> det, product;
    try {
      const SteadyState ss = solve_are(model, strategy);
      det = ss.V_inf.det();
      product = ss.V_inf.diagonal_product();
    } catch (const NoSteadySolution&) {
    }
    const auto cdet = closed_det(src);
    const auto cprod = closed_product(src);
    std::optional<double> ddet, dprod;
    if (det && cdet) ddet = std::abs(*det - *cdet);
    if (product && cprod) dprod = std::abs(*product - *cprod);

    csv << s.param << ',' << format_double(value) << ',' << format_double(model.kappa) << ','
        << format_double(theorem_bound(model)) << ',' << (det ? 1 : 0) << ',' << cell(det) << ','
        << cell(product) << ',' << cell(cdet) << ',' << cell(ddet) << ',' << cell(cprod) << ','
        << cell(dprod) << ',' << cell(closed_product_are(src)) << '\n';
  }

  if (f.out_dir.empty()) {
    out << csv.str();
  } else {
    const fs::path dir = prepare_out(f.out_dir);
    write_file(dir / "sweep.csv", csv.str());
    write_file(dir / "manifest.json",
               manifest("sweep", args, &base, std::nullopt, {"sweep.csv", "manifest.json"}).dump(2) +
                   "\n");
    out << "wrote " << (dir / "sweep.csv").string() << "\n";
  }
  return kOk;
}

struct SimFlags {
  double dt = 1e-3;
  double t_final = 5.0;
  std::uint64_t seed = 0;
  std::size_t ensemble = 1;
  std::string drive_b;
  std::string drive_u;
  unsigned threads = 0;
};

Waveform parse_waveform(const std::string& text) {
  if (text.empty() || text == "none") return Waveform::none();
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(item);
  if (parts[0] == "const" && parts.size() == 2) {
    return Waveform::constant(parse_number(parts[1], "--drive-u"));
  }
  if (parts[0] == "sine" && parts.size() == 3) {
    return Waveform::sine(parse_number(parts[1], "--drive-u"), parse_number(parts[2], "--drive-u"));
  }
  throw UsageError("--drive-u must be none, const:C or sine:AMPLITUDE:FREQUENCY");
}

int cmd_simulate(const std::vector<std::string>& args, const CommonFlags& f, const SimFlags& s,
                 std::ostream& out, std::ostream& err) {
  const SpecSource src = resolve_source(f);
  const SystemSpec spec = src.spec();

  SimConfig cfg;
  cfg.dt = s.dt;
  cfg.t_final = s.t_final;
  cfg.seed = s.seed;
  cfg.ensemble = s.ensemble;
  if (!s.drive_b.empty() || !s.drive_u.empty()) {
    const auto comma = s.drive_b.find(',');
    if (comma == std::string::npos) throw UsageError("--drive-b expects q,p");
    Drive d;
    d.B = Vec2(parse_number(s.drive_b.substr(0, comma), "--drive-b"),
               parse_number(s.drive_b.substr(comma + 1), "--drive-b"));
    d.u = parse_waveform(s.drive_u);
    cfg.drive = d;
  }
  try {
    validate_config(cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const DerivedModel model = build_derived(spec);
  const RiccatiFlow flow =
      integrate_riccati(model, CovMatrix::vacuum(model.hbar()), cfg.t_final, cfg.dt);
  const Trajectory traj = simulate_trajectory(spec, cfg, flow);

  Json stats_json;
  if (cfg.ensemble >= 2) {
    const EnsembleStats stats = monte_carlo(spec, cfg, {}, s.threads);
    stats_json = stats_to_json(stats);
    bool consistent = true;
    for (const auto& c : stats.checkpoints) consistent = consistent && covariance_consistent(c);
    stats_json["riccati_consistent"] = consistent;
  } else {
    err << "notice: ensemble < 2, ensemble statistics omitted\n";
  }
  Json innov;
  if (traj.innovations.size() > 1000) {
    const InnovationStats is = innovation_stats(traj);
    innov = {{"mean", is.mean},       {"variance", is.variance}, {"samples", is.samples},
             {"mean_ok", is.mean_ok}, {"var_ok", is.var_ok},     {"passed", is.passed()}};
  }

  std::vector<std::string> outputs = {"trajectory.csv"};
  if (!stats_json.is_null()) outputs.push_back("stats.json");
  outputs.push_back("manifest.json");
  const Json man = manifest("simulate", args, &src, cfg.seed, outputs);

  Json summary;
  summary["manifest"] = man;
  summary["stats"] = stats_json;
  summary["innovation_trajectory0"] = innov;

  if (f.out_dir.empty()) {
    out << summary.dump(2) << "\n";
  } else {
    const fs::path dir = prepare_out(f.out_dir);
    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    write_file(dir / "trajectory.csv", csv.str());
    if (!stats_json.is_null()) write_file(dir / "stats.json", summary.dump(2) + "\n");
    write_file(dir / "manifest.json", man.dump(2) + "\n");
    out << "wrote " << dir.string() << "\n";
  }
  return kOk;
}

int cmd_verify(const std::string& filter, const std::string& fault, unsigned threads,
               std::ostream& out) {
  AcceptanceOptions opts;
  opts.filter = filter;
  opts.threads = threads;
  if (!fault.empty()) {
    if (fault != "d-sign") throw UsageError("--inject-fault supports only d-sign");
    opts.inject_d_sign_fault = true;
  }
  const auto results = run_acceptance(opts);
  if (results.empty()) throw UsageError("--filter matched no criterion");
  print_acceptance(out, results);
  return all_passed(results) ? kOk : kVerifyFailed;
}

int cmd_rerun(const std::string& manifest_path, const std::string& out_dir, std::ostream& out,
              std::ostream& err) {
  std::ifstream in(manifest_path);
  if (!in) throw UsageError("cannot read manifest '" + manifest_path + "'");
  Json m;
  try {
    m = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!m.contains("args") || !m["args"].is_array()) throw UsageError("manifest has no args");
  std::vector<std::string> args = m["args"].get<std::vector<std::string>>();
  if (!args.empty() && args[0] == "rerun") throw UsageError("manifest refers to another rerun");
  if (!out_dir.empty()) {
    auto it = std::find(args.begin(), args.end(), "--out");
    if (it != args.end() && std::next(it) != args.end()) {
      *std::next(it) = out_dir;
    } else {
      args.push_back("--out");
      args.push_back(out_dir);
    }
  }
  return run(args, out, err);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quantum Kalman filter analysis for a single-mode linear system"};
  app.name("qkf");
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonFlags analyze_f, sweep_f, sim_f;
  std::string analyze_method, sweep_method;
  SweepFlags sweep_s;
  SimFlags sim_s;
  std::string filter, fault, manifest_path, rerun_out;
  unsigned verify_threads = 0;

  auto* analyze = app.add_subcommand("analyze", "Steady state, theorem bound and stability report");
  add_source_flags(analyze, analyze_f);
  analyze->add_option("--method", analyze_method, "ARE method: hamiltonian or ode");

  auto* sweep = app.add_subcommand("sweep", "Parameter sweep to CSV");
  add_source_flags(sweep, sweep_f);
  sweep->add_option("--param", sweep_s.param, "phi, eta, alpha, beta, gamma, m, omega, r1, r2")
      ->required();
  sweep->add_option("--min", sweep_s.min);
  sweep->add_option("--max", sweep_s.max);
  sweep->add_option("--steps", sweep_s.steps);
  sweep->add_flag("--log", sweep_s.log, "Log-spaced grid");
  sweep->add_option("--method", sweep_method, "ARE method: hamiltonian or ode");

  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo filter simulation");
  add_source_flags(simulate, sim_f);
  simulate->add_option("--dt", sim_s.dt);
  simulate->add_option("--t-final", sim_s.t_final);
  simulate->add_option("--seed", sim_s.seed);
  simulate->add_option("--ensemble", sim_s.ensemble);
  simulate->add_option("--drive-b", sim_s.drive_b, "Drive vector B as q,p");
  simulate->add_option("--drive-u", sim_s.drive_u, "none | const:C | sine:AMPLITUDE:FREQUENCY");
  simulate->add_option("--threads", sim_s.threads);

  auto* verify = app.add_subcommand("verify", "Run the acceptance suite");
  verify->add_option("--filter", filter, "Run only criteria whose name contains this");
  verify->add_option("--inject-fault", fault, "Negative control (d-sign)")->group("");
  verify->add_option("--threads", verify_threads);

  auto* rerun = app.add_subcommand("rerun", "Re-run the command recorded in a manifest");
  rerun->add_option("--manifest", manifest_path)->required();
  rerun->add_option("--out", rerun_out, "Override the output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
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
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (analyze->parsed()) return cmd_analyze(args, analyze_f, analyze_method, out);
    if (sweep->parsed()) return cmd_sweep(args, sweep_f, sweep_s, sweep_method, out);
    if (simulate->parsed()) return cmd_simulate(args, sim_f, sim_s, out, err);
    if (verify->parsed()) return cmd_verify(filter, fault, verify_threads, out);
    if (rerun->parsed()) return cmd_rerun(manifest_path, rerun_out, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const SpecError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const NoSteadySolution& e) {
    err << "error: " << e.what() << "\n";
    return kNoSteadySolution;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace qkf::cli
