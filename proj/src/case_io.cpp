#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mtdc/grid_model.hpp"

namespace mtdc {

CaseError::CaseError(Kind kind, std::string locus, const std::string& message)
    : std::runtime_error(locus.empty() ? message : locus + ": " + message),
      kind_(kind),
      locus_(std::move(locus)) {}

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

std::string line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

/// Reads one JSON object, tracking which keys were consumed so that leftovers
/// can be rejected.
class Record {
 public:
  Record(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) schema_error(path_, "expected an object");
  }

  [[noreturn]] static void schema_error(const std::string& locus, const std::string& message) {
    throw CaseError(CaseError::Kind::Schema, locus, message);
  }

  std::string field_path(const std::string& key) const { return path_ + "." + key; }

  const Json* get(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const Json* v = get(key);
    if (!v) {
      if (fallback) return *fallback;
      schema_error(field_path(key), "missing required field");
    }
    if (!v->is_number()) schema_error(field_path(key), "expected a number");
    return v->get<double>();
  }

  std::optional<double> optional_number(const std::string& key) {
    const Json* v = get(key);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_number()) schema_error(field_path(key), "expected a number");
    return v->get<double>();
  }

  int integer(const std::string& key, std::optional<int> fallback = std::nullopt) {
    const Json* v = get(key);
    if (!v) {
      if (fallback) return *fallback;
      schema_error(field_path(key), "missing required field");
    }
    if (!v->is_number_integer()) schema_error(field_path(key), "expected an integer");
    return v->get<int>();
  }

  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    const Json* v = get(key);
    if (!v) {
      if (fallback) return *fallback;
      schema_error(field_path(key), "missing required field");
    }
    if (!v->is_string()) schema_error(field_path(key), "expected a string");
    return v->get<std::string>();
  }

  bool status(const std::string& key = "status") {
    const auto value = text(key, "in");
    if (value == "in") return true;
    if (value == "out") return false;
    schema_error(field_path(key), "expected \"in\" or \"out\"");
  }

  template <typename Enum, typename Parse>
  Enum enumeration(const std::string& key, Parse parse, std::optional<std::string> fallback = std::nullopt) {
    const auto value = text(key, std::move(fallback));
    try {
      return parse(value);
    } catch (const std::invalid_argument& e) {
      schema_error(field_path(key), e.what());
    }
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) schema_error(field_path(it.key()), "unknown key");
    }
  }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T>
std::vector<T> read_list(Record& top, const std::string& key, bool required,
                         const std::function<T(Record&)>& read_one) {
  std::vector<T> out;
  const Json* list = top.get(key);
  if (!list) {
    if (required) Record::schema_error(key, "missing required section");
    return out;
  }
  if (!list->is_array()) Record::schema_error(key, "expected an array");
  for (std::size_t i = 0; i < list->size(); ++i) {
    Record rec((*list)[i], key + "[" + std::to_string(i) + "]");
    out.push_back(read_one(rec));
    rec.finish();
  }
  return out;
}

DroopSettings read_setpoints(Record& rec) {
  DroopSettings s;
  s.p_dc_0 = rec.number("p_dc_0", 0.0);
  s.u_dc_0 = rec.number("u_dc_0", 1.0);
  s.f_ref = rec.number("f_ref", 1.0);
  s.k_min = rec.number("k_min", kDefaultDroopMin);
  s.k_max = rec.number("k_max", kDefaultDroopMax);
  s.k_v = rec.number("k_v", s.k_max);
  s.k_f = rec.optional_number("k_f");
  return s;
}

template <typename T>
void check_duplicates(const std::vector<T>& items, const std::string& section) {
  std::set<int> seen;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!seen.insert(items[i].id).second) {
      throw CaseError(CaseError::Kind::DuplicateId, section + "[" + std::to_string(i) + "].id",
                      "duplicate id " + std::to_string(items[i].id));
    }
  }
}

void dangling(const std::string& section, std::size_t pos, const char* owner, int owner_id,
              const char* field, const char* target, int target_id) {
  throw CaseError(CaseError::Kind::DanglingReference,
                  section + "[" + std::to_string(pos) + "]." + field,
                  std::string(owner) + " " + std::to_string(owner_id) + " field '" + field +
                      "' references unknown " + target + " " + std::to_string(target_id));
}

void check_references(const NetworkCase& net) {
  std::set<int> ac, dc;
  for (const auto& b : net.ac_buses) ac.insert(b.id);
  for (const auto& b : net.dc_buses) dc.insert(b.id);

  for (std::size_t i = 0; i < net.ac_branches.size(); ++i) {
    const auto& br = net.ac_branches[i];
    if (!ac.count(br.from_bus)) dangling("ac_branches", i, "ac_branch", br.id, "from_bus", "AC bus", br.from_bus);
    if (!ac.count(br.to_bus)) dangling("ac_branches", i, "ac_branch", br.id, "to_bus", "AC bus", br.to_bus);
  }
  for (std::size_t i = 0; i < net.generators.size(); ++i) {
    const auto& g = net.generators[i];
    if (!ac.count(g.bus)) dangling("generators", i, "generator", g.id, "bus", "AC bus", g.bus);
  }
  for (std::size_t i = 0; i < net.dc_branches.size(); ++i) {
    const auto& br = net.dc_branches[i];
    if (!dc.count(br.from_bus)) dangling("dc_branches", i, "dc_branch", br.id, "from_bus", "DC bus", br.from_bus);
    if (!dc.count(br.to_bus)) dangling("dc_branches", i, "dc_branch", br.id, "to_bus", "DC bus", br.to_bus);
  }
  for (std::size_t i = 0; i < net.converters.size(); ++i) {
    const auto& c = net.converters[i];
    if (!ac.count(c.ac_bus)) dangling("converters", i, "converter", c.id, "ac_bus", "AC bus", c.ac_bus);
    if (!dc.count(c.dc_bus)) dangling("converters", i, "converter", c.id, "dc_bus", "DC bus", c.dc_bus);
  }
  for (std::size_t i = 0; i < net.fixed_injections.size(); ++i) {
    const auto& f = net.fixed_injections[i];
    if (!ac.count(f.bus)) dangling("fixed_injections", i, "fixed_injection", f.id, "bus", "AC bus", f.bus);
  }
}

}  // namespace

NetworkCase parse_case(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw CaseError(CaseError::Kind::Syntax, line_column(text, e.byte), e.what());
  }

  Record top(doc, "");
  if (top.text("schema") != kCaseSchema) {
    Record::schema_error("schema", "unsupported schema, expected \"" + std::string(kCaseSchema) + "\"");
  }

  NetworkCase net;
  {
    const Json* bases = top.get("bases");
    if (!bases) Record::schema_error("bases", "missing required section");
    Record rec(*bases, "bases");
    net.bases.s_nom = rec.number("s_nom");
    net.bases.v_dc_nom = rec.number("v_dc_nom");
    net.bases.f_nom = rec.number("f_nom");
    rec.finish();
  }

  net.ac_buses = read_list<AcBus>(top, "ac_buses", true, [](Record& r) {
    AcBus b;
    b.id = r.integer("id");
    b.kind = r.enumeration<BusKind>("bus_kind", bus_kind_from_string);
    b.u_min = r.number("u_min");
    b.u_max = r.number("u_max");
    b.delta_min = r.number("delta_min", -std::numbers::pi / 2);
    b.delta_max = r.number("delta_max", std::numbers::pi / 2);
    b.p_demand = r.number("p_demand", 0.0);
    b.q_demand = r.number("q_demand", 0.0);
    b.area = r.integer("area", 1);
    return b;
  });

  net.ac_branches = read_list<AcBranch>(top, "ac_branches", false, [](Record& r) {
    AcBranch b;
    b.id = r.integer("id");
    b.from_bus = r.integer("from_bus");
    b.to_bus = r.integer("to_bus");
    b.g = r.number("g");
    b.b = r.number("b");
    b.b_shunt = r.number("b_shunt", 0.0);
    b.in_service = r.status();
    return b;
  });

  net.generators = read_list<Generator>(top, "generators", false, [](Record& r) {
    Generator g;
    g.id = r.integer("id");
    g.bus = r.integer("bus");
    g.p_min = r.number("p_min");
    g.p_max = r.number("p_max");
    g.q_min = r.number("q_min");
    g.q_max = r.number("q_max");
    g.alpha = r.number("alpha", 0.0);
    g.beta = r.number("beta", 0.0);
    g.gamma = r.number("gamma", 0.0);
    g.governor_droop = r.number("governor_droop", 0.0);
    g.in_service = r.status();
    return g;
  });

  net.dc_buses = read_list<DcBus>(top, "dc_buses", false, [](Record& r) {
    DcBus b;
    b.id = r.integer("id");
    b.u_dc_rated = r.number("u_dc_rated", 1.0);
    b.u_dc_min = r.number("u_dc_min");
    b.u_dc_max = r.number("u_dc_max");
    return b;
  });

  net.dc_branches = read_list<DcBranch>(top, "dc_branches", false, [](Record& r) {
    DcBranch b;
    b.id = r.integer("id");
    b.from_bus = r.integer("from_bus");
    b.to_bus = r.integer("to_bus");
    b.y_dc = r.number("y_dc");
    b.in_service = r.status();
    return b;
  });

  net.converters = read_list<ConverterStation>(top, "converters", false, [](Record& r) {
    ConverterStation c;
    c.id = r.integer("id");
    c.ac_bus = r.integer("ac_bus");
    c.dc_bus = r.integer("dc_bus");
    c.p_dc_min = r.number("p_dc_min");
    c.p_dc_max = r.number("p_dc_max");
    c.loss_a = r.number("loss_a", 0.0);
    c.loss_b = r.number("loss_b", 0.0);
    c.loss_c_rec = r.number("loss_c_rec", 0.0);
    c.loss_c_inv = r.number("loss_c_inv", 0.0);
    c.control_mode = r.enumeration<ControlMode>("control_mode", control_mode_from_string, "active-power");
    if (const Json* sp = r.get("setpoints")) {
      Record sub(*sp, r.field_path("setpoints"));
      c.setpoints = read_setpoints(sub);
      sub.finish();
    }
    c.in_service = r.status();
    return c;
  });

  net.fixed_injections = read_list<FixedInjection>(top, "fixed_injections", false, [](Record& r) {
    FixedInjection f;
    f.id = r.integer("id");
    f.bus = r.integer("bus");
    f.p = r.number("p");
    f.q = r.number("q", 0.0);
    return f;
  });

  top.finish();

  check_duplicates(net.ac_buses, "ac_buses");
  check_duplicates(net.ac_branches, "ac_branches");
  check_duplicates(net.generators, "generators");
  check_duplicates(net.dc_buses, "dc_buses");
  check_duplicates(net.dc_branches, "dc_branches");
  check_duplicates(net.converters, "converters");
  check_duplicates(net.fixed_injections, "fixed_injections");
  check_references(net);
  return net;
}

NetworkCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open case file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_case(buffer.str());
}

std::string serialize_case(const NetworkCase& net) {
  auto status = [](bool in) { return in ? "in" : "out"; };

  OrderedJson doc;
  doc["schema"] = kCaseSchema;
  doc["bases"] = {{"s_nom", net.bases.s_nom}, {"v_dc_nom", net.bases.v_dc_nom}, {"f_nom", net.bases.f_nom}};

  doc["ac_buses"] = OrderedJson::array();
  for (const auto& b : net.ac_buses) {
    doc["ac_buses"].push_back({{"id", b.id},
                               {"bus_kind", to_string(b.kind)},
                               {"u_min", b.u_min},
                               {"u_max", b.u_max},
                               {"delta_min", b.delta_min},
                               {"delta_max", b.delta_max},
                               {"p_demand", b.p_demand},
                               {"q_demand", b.q_demand},
                               {"area", b.area}});
  }
  doc["ac_branches"] = OrderedJson::array();
  for (const auto& b : net.ac_branches) {
    doc["ac_branches"].push_back({{"id", b.id},
                                  {"from_bus", b.from_bus},
                                  {"to_bus", b.to_bus},
                                  {"g", b.g},
                                  {"b", b.b},
                                  {"b_shunt", b.b_shunt},
                                  {"status", status(b.in_service)}});
  }
  doc["generators"] = OrderedJson::array();
  for (const auto& g : net.generators) {
    doc["generators"].push_back({{"id", g.id},
                                 {"bus", g.bus},
                                 {"p_min", g.p_min},
                                 {"p_max", g.p_max},
                                 {"q_min", g.q_min},
                                 {"q_max", g.q_max},
                                 {"alpha", g.alpha},
                                 {"beta", g.beta},
                                 {"gamma", g.gamma},
                                 {"governor_droop", g.governor_droop},
                                 {"status", status(g.in_service)}});
  }
  doc["dc_buses"] = OrderedJson::array();
  for (const auto& b : net.dc_buses) {
    doc["dc_buses"].push_back(
        {{"id", b.id}, {"u_dc_rated", b.u_dc_rated}, {"u_dc_min", b.u_dc_min}, {"u_dc_max", b.u_dc_max}});
  }
  doc["dc_branches"] = OrderedJson::array();
  for (const auto& b : net.dc_branches) {
    doc["dc_branches"].push_back({{"id", b.id},
                                  {"from_bus", b.from_bus},
                                  {"to_bus", b.to_bus},
                                  {"y_dc", b.y_dc},
                                  {"status", status(b.in_service)}});
  }
  doc["converters"] = OrderedJson::array();
  for (const auto& c : net.converters) {
    OrderedJson sp = {{"p_dc_0", c.setpoints.p_dc_0},
                      {"u_dc_0", c.setpoints.u_dc_0},
                      {"f_ref", c.setpoints.f_ref},
                      {"k_v", c.setpoints.k_v}};
    if (c.setpoints.k_f) sp["k_f"] = *c.setpoints.k_f;
    sp["k_min"] = c.setpoints.k_min;
    sp["k_max"] = c.setpoints.k_max;
    doc["converters"].push_back({{"id", c.id},
                                 {"ac_bus", c.ac_bus},
                                 {"dc_bus", c.dc_bus},
                                 {"p_dc_min", c.p_dc_min},
                                 {"p_dc_max", c.p_dc_max},
                                 {"loss_a", c.loss_a},
                                 {"loss_b", c.loss_b},
                                 {"loss_c_rec", c.loss_c_rec},
                                 {"loss_c_inv", c.loss_c_inv},
                                 {"control_mode", to_string(c.control_mode)},
                                 {"setpoints", sp},
                                 {"status", status(c.in_service)}});
  }
  doc["fixed_injections"] = OrderedJson::array();
  for (const auto& f : net.fixed_injections) {
    doc["fixed_injections"].push_back({{"id", f.id}, {"bus", f.bus}, {"p", f.p}, {"q", f.q}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace mtdc
