#include "mtdc/results_io.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace mtdc::io {

using opf::Stage;
using steady::OperatingPoint;

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json to_json(const OperatingPoint& op, const NetworkCase& net) {
  const CaseIndex index(net);
  Json j;
  j["ac_buses"] = Json::array();
  for (std::size_t i = 0; i < net.ac_buses.size() && i < op.u.size(); ++i) {
    j["ac_buses"].push_back({{"id", net.ac_buses[i].id}, {"u", op.u[i]}, {"delta", op.delta[i]}});
  }
  j["dc_buses"] = Json::array();
  for (std::size_t i = 0; i < net.dc_buses.size() && i < op.u_dc.size(); ++i) {
    j["dc_buses"].push_back({{"id", net.dc_buses[i].id}, {"u_dc", op.u_dc[i]}});
  }
  j["generators"] = Json::array();
  for (std::size_t g = 0; g < net.generators.size() && g < op.p_g.size(); ++g) {
    j["generators"].push_back({{"id", net.generators[g].id},
                               {"in_service", net.generators[g].in_service},
                               {"p_g", op.p_g[g]},
                               {"q_g", op.q_g[g]}});
  }
  j["converters"] = Json::array();
  for (std::size_t c = 0; c < net.converters.size() && c < op.p_c.size(); ++c) {
    Json e = {{"id", net.converters[c].id}, {"in_service", net.converters[c].in_service},
              {"p_c", op.p_c[c]},           {"q_c", op.q_c[c]},
              {"p_dc", op.p_dc[c]},         {"i_c", op.i_c[c]}};
    if (c < op.p_loss.size()) e["p_loss"] = op.p_loss[c];
    j["converters"].push_back(e);
  }
  j["areas"] = Json::array();
  for (std::size_t a = 0; a < index.areas().size() && a < op.delta_f.size(); ++a) {
    j["areas"].push_back({{"id", index.areas()[a]}, {"delta_f", op.delta_f[a]}});
  }
  return j;
}

Json to_json(const DroopSettings& d) {
  Json j;
  j["k_v"] = d.k_v;
  j["k_f"] = d.k_f ? Json(*d.k_f) : Json(nullptr);
  j["p_dc_0"] = d.p_dc_0;
  j["u_dc_0"] = d.u_dc_0;
  j["f_ref"] = d.f_ref;
  j["k_min"] = d.k_min;
  j["k_max"] = d.k_max;
  return j;
}

namespace {

Json droop_json(const std::vector<DroopSettings>& droop, const NetworkCase& net) {
  Json j = Json::array();
  for (std::size_t c = 0; c < droop.size() && c < net.converters.size(); ++c) {
    Json e = {{"converter", net.converters[c].id}};
    const Json d = to_json(droop[c]);
    for (const auto& [k, v] : d.items()) e[k] = v;
    j.push_back(e);
  }
  return j;
}

std::optional<double> number_at(const Json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) return std::nullopt;
  return j[key].get<double>();
}

}  // namespace

Json to_json(const opf::StrategyResult& r, const NetworkCase& net, const NetworkCase& post, bool with_traces) {
  Json j;
  j["scenario"] = r.scenario;
  j["strategy"] = std::string(opf::to_string(r.strategy.kind));
  j["frequency_subset"] = r.strategy.frequency_subset;
  j["success"] = r.success;
  j["message"] = r.message;
  j["retries"] = r.retries;
  Json obj;
  obj["obj1_stage1"] = r.obj1_stage1;
  obj["obj2_stage2"] = r.obj2_stage2 ? Json(*r.obj2_stage2) : Json(nullptr);
  obj["obj1_stage3"] = r.obj1_stage3 ? Json(*r.obj1_stage3) : Json(nullptr);
  j["objectives"] = obj;

  j["stages"] = Json::array();
  int attempt = 0;
  for (const auto& s : r.stages) {
    const bool after = s.stage == Stage::Stage3Redispatch;
    const NetworkCase& at = after ? post : net;
    Json e;
    e["stage"] = std::string(opf::to_string(s.stage));
    if (after) e["attempt"] = attempt++;
    e["status"] = std::string(nlp::to_string(s.status));
    e["objective"] = s.objective_value;
    e["kkt"] = {{"stationarity", s.kkt.stationarity},
                {"primal_feasibility", s.kkt.primal_feasibility},
                {"complementarity", s.kkt.complementarity}};
    e["iterations"] = s.iterations;
    e["direction_passes"] = s.direction_passes;
    e["max_equality_residual"] = s.max_equality_residual;
    e["message"] = s.message;
    e["operating_point"] = to_json(s.operating_point, at);
    e["droop"] = droop_json(s.droop, at);
    if (with_traces) e["trace"] = s.trace;
    j["stages"].push_back(e);
  }
  j["droop_pre"] = droop_json(r.droop_pre, net);
  j["droop_final"] = droop_json(r.droop_final, post);

  Json eq;
  eq["status"] = std::string(steady::to_string(r.equilibrium_status));
  eq["message"] = r.equilibrium_message;
  eq["pre_point"] = r.pre_point ? to_json(*r.pre_point, net) : Json(nullptr);
  eq["post_point"] = r.post_point ? to_json(*r.post_point, post) : Json(nullptr);
  if (r.sharing) {
    Json s;
    s["voltage_deviation"] = r.sharing->voltage_deviation;
    s["max_delta_f"] = r.sharing->max_delta_f;
    s["converters"] = Json::array();
    for (std::size_t c = 0; c < post.converters.size(); ++c) {
      s["converters"].push_back({{"id", post.converters[c].id},
                                 {"in_service", post.converters[c].in_service},
                                 {"delta_p", r.sharing->delta_p[c]},
                                 {"sharing_ratio", r.sharing->sharing_ratios[c]}});
    }
    eq["sharing"] = s;
  } else {
    eq["sharing"] = nullptr;
  }
  j["equilibrium"] = eq;
  return j;
}

ResultSummary summarize(const Json& j) {
  ResultSummary s;
  s.scenario = j.at("scenario").get<std::string>();
  s.strategy = j.at("strategy").get<std::string>();
  s.success = j.at("success").get<bool>();
  s.message = j.value("message", "");
  s.retries = j.value("retries", 0);
  const auto& obj = j.at("objectives");
  s.obj1_stage1 = number_at(obj, "obj1_stage1").value_or(0.0);
  s.obj2_stage2 = number_at(obj, "obj2_stage2");
  s.obj1_stage3 = number_at(obj, "obj1_stage3");
  if (j.contains("equilibrium") && j["equilibrium"].contains("sharing") && j["equilibrium"]["sharing"].is_object()) {
    const auto& sh = j["equilibrium"]["sharing"];
    s.voltage_deviation = number_at(sh, "voltage_deviation");
    s.max_delta_f = number_at(sh, "max_delta_f");
  }
  return s;
}

bool cost_not_greater(double a, double b) { return a <= b + 1e-8 * std::max(1.0, std::abs(b)); }

std::vector<OrderingCheck> check_ordering(const std::vector<ResultSummary>& summaries) {
  std::vector<std::string> order;
  std::map<std::string, std::map<std::string, const ResultSummary*>> by;
  for (const auto& s : summaries) {
    if (!by.count(s.scenario)) order.push_back(s.scenario);
    by[s.scenario][s.strategy] = &s;
  }
  std::vector<OrderingCheck> out;
  for (const auto& sc : order) {
    OrderingCheck c;
    c.scenario = sc;
    auto cost = [&](opf::StrategyKind k) -> std::optional<double> {
      const auto it = by[sc].find(std::string(opf::to_string(k)));
      if (it == by[sc].end() || !it->second->success) return std::nullopt;
      return it->second->obj1_stage3;
    };
    const auto act = cost(opf::StrategyKind::ActivePowerControl);
    const auto ada = cost(opf::StrategyKind::AdaptiveDroop);
    const auto pro = cost(opf::StrategyKind::ProposedDroop);
    c.complete = act && ada && pro;
    if (act && pro) c.active_le_proposed = cost_not_greater(*act, *pro);
    if (act && ada) c.active_le_adaptive = cost_not_greater(*act, *ada);
    if (pro && ada) c.proposed_le_adaptive = cost_not_greater(*pro, *ada);
    out.push_back(c);
  }
  return out;
}

namespace {

std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

}  // namespace

std::string droop_table_csv(const std::vector<Json>& results) {
  std::ostringstream out;
  out << "scenario,strategy,converter,k_v,k_f,p_dc_0,u_dc_0\n";
  for (const auto& r : results) {
    if (r.at("strategy").get<std::string>() == opf::to_string(opf::StrategyKind::ActivePowerControl)) continue;
    for (const auto& d : r.at("droop_final")) {
      out << r.at("scenario").get<std::string>() << ',' << r.at("strategy").get<std::string>() << ','
          << d.at("converter").get<int>() << ',' << format_number(d.at("k_v").get<double>()) << ','
          << (d.at("k_f").is_number() ? format_number(d.at("k_f").get<double>()) : "") << ','
          << format_number(d.at("p_dc_0").get<double>()) << ',' << format_number(d.at("u_dc_0").get<double>())
          << '\n';
    }
  }
  return out.str();
}

std::string objectives_csv(const std::vector<ResultSummary>& summaries) {
  std::ostringstream out;
  out << "scenario,strategy,success,retries,obj1_stage1,obj2_stage2,obj1_stage3\n";
  for (const auto& s : summaries) {
    out << s.scenario << ',' << s.strategy << ',' << (s.success ? "true" : "false") << ',' << s.retries << ','
        << format_number(s.obj1_stage1) << ',' << opt_number(s.obj2_stage2) << ',' << opt_number(s.obj1_stage3)
        << '\n';
  }
  return out.str();
}

std::string comparison_csv(const std::vector<ResultSummary>& summaries, const std::vector<OrderingCheck>& checks) {
  std::ostringstream out;
  out << "scenario,strategy,status,obj1_stage3,voltage_deviation,max_delta_f\n";
  for (const auto& s : summaries) {
    out << s.scenario << ',' << s.strategy << ',' << (s.success ? "ok" : "FAILED") << ','
        << (s.success ? opt_number(s.obj1_stage3) : "") << ',' << opt_number(s.voltage_deviation) << ','
        << opt_number(s.max_delta_f) << '\n';
  }
  out << "\nscenario,active_le_proposed,active_le_adaptive,proposed_le_adaptive,verdict\n";
  for (const auto& c : checks) {
    auto b = [&](bool v) { return c.complete ? (v ? "true" : "false") : "n/a"; };
    out << c.scenario << ',' << b(c.active_le_proposed) << ',' << b(c.active_le_adaptive) << ','
        << b(c.proposed_le_adaptive) << ',' << (c.complete ? (c.pass() ? "PASS" : "FAIL") : "INCOMPLETE") << '\n';
  }
  return out.str();
}

std::string tidy_csv(const std::vector<Json>& results) {
  std::ostringstream out;
  out << "scenario,strategy,element,quantity,value\n";
  for (const auto& r : results) {
    const std::string prefix = r.at("scenario").get<std::string>() + ',' + r.at("strategy").get<std::string>() + ',';
    auto row = [&](const std::string& element, const char* quantity, const Json& v) {
      if (v.is_number()) out << prefix << element << ',' << quantity << ',' << format_number(v.get<double>()) << '\n';
    };
    const auto& eq = r.at("equilibrium");
    if (eq.contains("sharing") && eq["sharing"].is_object()) {
      const auto& sh = eq["sharing"];
      for (const auto& c : sh.at("converters")) {
        const std::string el = "converter " + std::to_string(c.at("id").get<int>());
        row(el, "delta_p", c.at("delta_p"));
        row(el, "sharing_ratio", c.at("sharing_ratio"));
      }
      row("dc_grid", "voltage_deviation", sh.at("voltage_deviation"));
      row("system", "max_delta_f", sh.at("max_delta_f"));
    }
    for (const char* which : {"pre_point", "post_point"}) {
      if (!eq.contains(which) || !eq[which].is_object()) continue;
      const bool pre = std::string(which) == "pre_point";
      for (const auto& b : eq[which].at("dc_buses")) {
        row("dc_bus " + std::to_string(b.at("id").get<int>()), pre ? "u_dc_pre" : "u_dc_post", b.at("u_dc"));
      }
      for (const auto& a : eq[which].at("areas")) {
        row("area " + std::to_string(a.at("id").get<int>()), pre ? "delta_f_pre" : "delta_f_post", a.at("delta_f"));
      }
    }
  }
  return out.str();
}

}  // namespace mtdc::io
