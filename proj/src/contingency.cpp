#include "mtdc/contingency.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mtdc::contingency {

using nlohmann::json;

std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::TripGenerator: return "trip-generator";
    case ActionKind::TripConverter: return "trip-converter";
    case ActionKind::ScaleLoad: return "scale-load";
    case ActionKind::TripAcBranch: return "trip-ac-branch";
    case ActionKind::TripDcBranch: return "trip-dc-branch";
  }
  return "unknown";
}

ActionKind action_kind_from_string(std::string_view text) {
  for (auto k : {ActionKind::TripGenerator, ActionKind::TripConverter, ActionKind::ScaleLoad,
                 ActionKind::TripAcBranch, ActionKind::TripDcBranch}) {
    if (to_string(k) == text) return k;
  }
  throw ScenarioError("unknown scenario action '" + std::string(text) + "'");
}

namespace {

Action parse_action(const json& j, std::size_t pos) {
  const std::string where = "actions[" + std::to_string(pos) + "]";
  if (!j.is_object()) throw ScenarioError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "action" && key != "id" && key != "bus" && key != "factor") {
      throw ScenarioError(where + " has unknown key '" + key + "'");
    }
  }
  if (!j.contains("action") || !j["action"].is_string()) throw ScenarioError(where + ".action is required");
  Action a;
  a.kind = action_kind_from_string(j["action"].get<std::string>());
  if (a.kind == ActionKind::ScaleLoad) {
    if (!j.contains("bus") || !j["bus"].is_number_integer()) throw ScenarioError(where + ".bus is required");
    if (!j.contains("factor") || !j["factor"].is_number()) throw ScenarioError(where + ".factor is required");
    a.id = j["bus"].get<int>();
    a.factor = j["factor"].get<double>();
    if (!std::isfinite(a.factor) || a.factor < 0.0) throw ScenarioError(where + ".factor must be nonnegative");
  } else {
    if (!j.contains("id") || !j["id"].is_number_integer()) throw ScenarioError(where + ".id is required");
    a.id = j["id"].get<int>();
  }
  return a;
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::string& default_id) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario syntax error: ") + e.what());
  }
  Scenario s;
  s.id = default_id;
  const json* actions = &doc;
  if (doc.is_object()) {
    for (const auto& [key, _] : doc.items()) {
      if (key != "id" && key != "actions" && key != "control_overrides") {
        throw ScenarioError("scenario has unknown key '" + key + "'");
      }
    }
    if (doc.contains("id")) {
      if (!doc["id"].is_string()) throw ScenarioError("scenario id must be a string");
      s.id = doc["id"].get<std::string>();
    }
    static const json empty = json::array();
    actions = doc.contains("actions") ? &doc["actions"] : &empty;
    if (doc.contains("control_overrides")) {
      const auto& ov = doc["control_overrides"];
      if (!ov.is_array()) throw ScenarioError("control_overrides must be a list");
      for (std::size_t i = 0; i < ov.size(); ++i) {
        const auto& o = ov[i];
        const std::string where = "control_overrides[" + std::to_string(i) + "]";
        if (!o.is_object() || !o.contains("converter") || !o["converter"].is_number_integer() ||
            !o.contains("mode") || !o["mode"].is_string()) {
          throw ScenarioError(where + " needs integer 'converter' and string 'mode'");
        }
        for (const auto& [key, _] : o.items()) {
          if (key != "converter" && key != "mode" && key != "strategy") {
            throw ScenarioError(where + " has unknown key '" + key + "'");
          }
        }
        ControlOverride c;
        c.converter = o["converter"].get<int>();
        try {
          c.mode = control_mode_from_string(o["mode"].get<std::string>());
        } catch (const std::invalid_argument& e) {
          throw ScenarioError(where + ": " + e.what());
        }
        if (o.contains("strategy")) {
          if (!o["strategy"].is_string()) throw ScenarioError(where + ".strategy must be a string");
          c.strategy = o["strategy"].get<std::string>();
        }
        s.control_overrides.push_back(c);
      }
    }
  }
  if (!actions->is_array()) throw ScenarioError("scenario actions must be a list");
  for (std::size_t i = 0; i < actions->size(); ++i) s.actions.push_back(parse_action((*actions)[i], i));
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), std::filesystem::path(path).stem().string());
}

std::string serialize_scenario(const Scenario& s) {
  nlohmann::ordered_json doc;
  doc["id"] = s.id;
  doc["actions"] = nlohmann::ordered_json::array();
  for (const auto& a : s.actions) {
    nlohmann::ordered_json j;
    j["action"] = std::string(to_string(a.kind));
    if (a.kind == ActionKind::ScaleLoad) {
      j["bus"] = a.id;
      j["factor"] = a.factor;
    } else {
      j["id"] = a.id;
    }
    doc["actions"].push_back(j);
  }
  doc["control_overrides"] = nlohmann::ordered_json::array();
  for (const auto& o : s.control_overrides) {
    nlohmann::ordered_json j;
    j["converter"] = o.converter;
    j["mode"] = std::string(to_string(o.mode));
    if (!o.strategy.empty()) j["strategy"] = o.strategy;
    doc["control_overrides"].push_back(j);
  }
  return doc.dump(2) + "\n";
}

NetworkCase apply_scenario(const NetworkCase& net, const Scenario& scenario) {
  NetworkCase out = net;
  const CaseIndex index(net);
  auto trip = [&](std::optional<std::size_t> pos, bool& in_service, const char* what, int id) {
    if (!pos) throw ScenarioError(std::string("scenario '") + scenario.id + "': unknown " + what + " " + std::to_string(id));
    if (!in_service) {
      throw ScenarioError(std::string("scenario '") + scenario.id + "': " + what + " " + std::to_string(id) +
                          " is already out of service");
    }
    in_service = false;
  };
  for (const auto& a : scenario.actions) {
    switch (a.kind) {
      case ActionKind::TripGenerator: {
        const auto pos = index.generator(a.id);
        bool dummy = false;
        trip(pos, pos ? out.generators[*pos].in_service : dummy, "generator", a.id);
        break;
      }
      case ActionKind::TripConverter: {
        const auto pos = index.converter(a.id);
        bool dummy = false;
        trip(pos, pos ? out.converters[*pos].in_service : dummy, "converter", a.id);
        break;
      }
      case ActionKind::TripAcBranch: {
        const auto pos = index.ac_branch(a.id);
        bool dummy = false;
        trip(pos, pos ? out.ac_branches[*pos].in_service : dummy, "AC branch", a.id);
        break;
      }
      case ActionKind::TripDcBranch: {
        const auto pos = index.dc_branch(a.id);
        bool dummy = false;
        trip(pos, pos ? out.dc_branches[*pos].in_service : dummy, "DC branch", a.id);
        break;
      }
      case ActionKind::ScaleLoad: {
        const auto pos = index.ac_bus(a.id);
        if (!pos) throw ScenarioError("scenario '" + scenario.id + "': unknown AC bus " + std::to_string(a.id));
        out.ac_buses[*pos].p_demand *= a.factor;
        out.ac_buses[*pos].q_demand *= a.factor;
        break;
      }
    }
  }
  for (const auto& o : scenario.control_overrides) {
    if (!index.converter(o.converter)) {
      throw ScenarioError("scenario '" + scenario.id + "': override names unknown converter " +
                          std::to_string(o.converter));
    }
  }
  return out;
}

steady::PowerFlowResult equilibrium_after(const NetworkCase& pre, const NetworkCase& post,
                                          const steady::PowerFlowControls& controls,
                                          const steady::OperatingPoint& pre_point,
                                          const steady::PowerFlowOptions& options) {
  if (pre.ac_buses.size() != post.ac_buses.size() || pre.dc_buses.size() != post.dc_buses.size() ||
      pre.generators.size() != post.generators.size() || pre.converters.size() != post.converters.size()) {
    throw std::invalid_argument("pre- and post-disturbance cases have different element sets");
  }
  steady::OperatingPoint start = pre_point;
  for (std::size_t g = 0; g < post.generators.size(); ++g) {
    if (!post.generators[g].in_service) start.p_g[g] = start.q_g[g] = 0.0;
  }
  for (std::size_t c = 0; c < post.converters.size(); ++c) {
    if (!post.converters[c].in_service) start.p_c[c] = start.q_c[c] = start.p_dc[c] = start.i_c[c] = 0.0;
  }
  return steady::solve_power_flow(post, controls, start, options);
}

double voltage_deviation(const steady::OperatingPoint& op, const NetworkCase& net) {
  if (op.u_dc.size() != net.dc_buses.size()) throw std::invalid_argument("DC voltage vector does not match the case");
  double v = 0.0;
  for (std::size_t j = 0; j < net.dc_buses.size(); ++j) {
    const double d = op.u_dc[j] - net.dc_buses[j].u_dc_rated;
    v += d * d;
  }
  return v;
}

SharingMetrics sharing_metrics(const steady::OperatingPoint& pre, const steady::OperatingPoint& post,
                               const NetworkCase& net, const std::vector<ControlMode>& modes) {
  const auto nc = net.converters.size();
  if (pre.p_dc.size() != nc || post.p_dc.size() != nc || pre.delta_f.size() != post.delta_f.size() ||
      (!modes.empty() && modes.size() != nc)) {
    throw std::invalid_argument("operating points do not match the case");
  }
  auto shares = [&](std::size_t c) {
    return net.converters[c].in_service && (modes.empty() || modes[c] != ControlMode::ActivePower);
  };
  SharingMetrics m;
  m.delta_p.resize(nc);
  double total = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    const double after = net.converters[c].in_service ? post.p_dc[c] : 0.0;
    m.delta_p[c] = after - pre.p_dc[c];
    if (shares(c)) total += m.delta_p[c];
  }
  m.sharing_ratios.assign(nc, 0.0);
  if (std::abs(total) > 1e-12) {
    for (std::size_t c = 0; c < nc; ++c) {
      if (shares(c)) m.sharing_ratios[c] = m.delta_p[c] / total;
    }
  }
  m.voltage_deviation = voltage_deviation(post, net);
  for (double df : post.delta_f) m.max_delta_f = std::max(m.max_delta_f, std::abs(df));
  return m;
}

}  // namespace mtdc::contingency
