#pragma once

#include <ostream>
#include <string>

#include <json.hpp>

#include "qkf/bounds.hpp"
#include "qkf/model.hpp"
#include "qkf/riccati.hpp"
#include "qkf/sim.hpp"

namespace qkf {

using Json = nlohmann::ordered_json;

// Spec file schema:
//   {"G": [[g11, g12], [g21, g22]], "C_re": [a, b], "C_im": [c, d],
//    "phi": x, "eta": y, "hbar": z}
// phi and hbar are optional (0 and 1). Throws SpecError on schema violations;
// the result is validated.
SystemSpec spec_from_json(const Json& j);
Json spec_to_json(const SystemSpec& spec);

Json to_json(const Mat2& m);
Json to_json(const Vec2& v);
Json derived_to_json(const DerivedModel& m);
Json steady_to_json(const SteadyState& s);
Json theorem_to_json(const TheoremReport& r);
Json probe_to_json(const ExistenceProbe& p);
Json stability_to_json(const StabilityRecord& r);
Json stats_to_json(const EnsembleStats& s);

// 17 significant digits.
std::string format_double(double x);

// Header: t,q_true,p_true,q_hat,p_hat,dy,innov
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

}  // namespace qkf
