#include "qkf/report.hpp"

#include <cmath>
#include <cstdio>

namespace qkf {

namespace {

double number(const Json& j, const char* what) {
  if (!j.is_number()) throw SpecError(std::string("spec field '") + what + "' must be a number");
  return j.get<double>();
}

Vec2 vec2(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) {
    throw SpecError(std::string("spec field '") + what + "' must be an array of 2 numbers");
  }
  return Vec2(number(j[0], what), number(j[1], what));
}

Json complex_to_json(std::complex<double> z) { return Json::array({z.real(), z.imag()}); }

// nlohmann writes NaN/inf as null.
Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

}  // namespace

SystemSpec spec_from_json(const Json& j) {
  if (!j.is_object()) throw SpecError("spec must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "G" && key != "C_re" && key != "C_im" && key != "phi" && key != "eta" &&
        key != "hbar") {
      throw SpecError("unknown spec field '" + key + "'");
    }
  }
  for (const char* key : {"G", "C_re", "C_im", "eta"}) {
    if (!j.contains(key)) throw SpecError(std::string("spec is missing '") + key + "'");
  }
  const Json& g = j.at("G");
  if (!g.is_array() || g.size() != 2) throw SpecError("spec field 'G' must be a 2x2 array");
  SystemSpec s;
  const Vec2 row0 = vec2(g[0], "G");
  const Vec2 row1 = vec2(g[1], "G");
  s.G << row0(0), row0(1), row1(0), row1(1);
  const Vec2 re = vec2(j.at("C_re"), "C_re");
  const Vec2 im = vec2(j.at("C_im"), "C_im");
  s.C << std::complex<double>(re(0), im(0)), std::complex<double>(re(1), im(1));
  s.eta = number(j.at("eta"), "eta");
  s.phi = j.contains("phi") ? number(j.at("phi"), "phi") : 0.0;
  s.hbar = j.contains("hbar") ? number(j.at("hbar"), "hbar") : 1.0;
  return validate_spec(s);
}

Json spec_to_json(const SystemSpec& s) {
  Json j;
  j["G"] = to_json(s.G);
  j["C_re"] = Json::array({s.C(0).real(), s.C(1).real()});
  j["C_im"] = Json::array({s.C(0).imag(), s.C(1).imag()});
  j["phi"] = s.phi;
  j["eta"] = s.eta;
  j["hbar"] = s.hbar;
  return j;
}

Json to_json(const Mat2& m) {
  return Json::array({Json::array({num(m(0, 0)), num(m(0, 1))}),
                      Json::array({num(m(1, 0)), num(m(1, 1))})});
}

Json to_json(const Vec2& v) { return Json::array({num(v(0)), num(v(1))}); }

Json derived_to_json(const DerivedModel& m) {
  Json j;
  j["Cr"] = to_json(m.Cr);
  j["Ci"] = to_json(m.Ci);
  j["A"] = to_json(m.A);
  j["Aprime"] = to_json(m.Aprime);
  j["D"] = to_json(m.D);
  j["kappa"] = m.kappa;
  j["M"] = to_json(Vec2(m.M.transpose()));
  j["R"] = m.R;
  j["S"] = to_json(m.S);
  j["Q"] = to_json(m.Q);
  return j;
}

Json steady_to_json(const SteadyState& s) {
  Json j;
  j["V_inf"] = to_json(s.V_inf.matrix());
  j["det"] = s.V_inf.det();
  j["product"] = s.V_inf.diagonal_product();
  j["residual"] = s.residual;
  j["method"] = to_string(s.method);
  j["closed_loop_stable"] = s.closed_loop_stable;
  j["newton_steps"] = s.newton_steps;
  return j;
}

Json theorem_to_json(const TheoremReport& r) {
  Json j;
  j["kappa"] = r.kappa;
  j["kappa_class"] = to_string(r.kappa_class);
  j["stability_class"] = to_string(r.stability_class);
  j["bound"] = r.bound;
  j["has_steady_state"] = r.has_steady_state;
  if (r.has_steady_state) {
    j["det_V_inf"] = r.det_V_inf;
    j["margin"] = r.margin;
    j["heisenberg_ok"] = r.heisenberg_ok;
    j["proof_identity_residual"] =
        r.proof_identity_residual ? Json(*r.proof_identity_residual) : Json(nullptr);
    j["theorem_holds"] = r.theorem_holds();
  } else {
    j["det_V_inf"] = nullptr;
    j["margin"] = nullptr;
    j["heisenberg_ok"] = nullptr;
    j["proof_identity_residual"] = nullptr;
    j["failure"] = r.failure;
  }
  return j;
}

Json probe_to_json(const ExistenceProbe& p) {
  Json j;
  Json spec = Json::array();
  for (const auto& z : p.spectrum) spec.push_back(complex_to_json(z));
  j["hamiltonian_spectrum"] = spec;
  j["axis_distance"] = p.axis_distance;
  j["hamiltonian_ok"] = p.hamiltonian_ok;
  j["ode_ok"] = p.ode_ok;
  j["exists"] = p.exists;
  return j;
}

Json stability_to_json(const StabilityRecord& r) {
  Json j;
  j["class"] = to_string(r.stability);
  j["kappa"] = r.kappa;
  j["det_G"] = r.det_G;
  j["eigenvalues"] = Json::array({complex_to_json(r.numeric[0]), complex_to_json(r.numeric[1])});
  j["analytic_roots"] =
      Json::array({complex_to_json(r.analytic[0]), complex_to_json(r.analytic[1])});
  j["root_mismatch"] = r.root_mismatch;
  return j;
}

Json stats_to_json(const EnsembleStats& s) {
  Json j;
  j["ensemble"] = s.ensemble;
  Json cps = Json::array();
  for (const auto& c : s.checkpoints) {
    Json cj;
    cj["time"] = c.time;
    cj["step"] = c.step;
    cj["sample_error_cov"] = to_json(c.sample_error_cov);
    cj["standard_errors"] = to_json(c.standard_errors);
    cj["riccati"] = to_json(c.riccati);
    cj["consistent"] = covariance_consistent(c);
    cps.push_back(cj);
  }
  j["checkpoints"] = cps;
  j["innovation_mean"] = s.innovation_mean;
  j["innovation_var"] = s.innovation_var;
  j["innovation_samples"] = s.innovation_samples;
  return j;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "t,q_true,p_true,q_hat,p_hat,dy,innov\n";
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    os << format_double(tr.times[k]) << ',' << format_double(tr.x_true[k](0)) << ','
       << format_double(tr.x_true[k](1)) << ',' << format_double(tr.x_hat[k](0)) << ','
       << format_double(tr.x_hat[k](1)) << ',' << format_double(tr.dy[k]) << ','
       << format_double(tr.innovations[k]) << '\n';
  }
}

}  // namespace qkf
