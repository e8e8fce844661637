#include "mtdc/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace mtdc {

std::string_view to_string(BusKind kind) {
  switch (kind) {
    case BusKind::SlackCandidate: return "slack-candidate";
    case BusKind::PV: return "pv";
    case BusKind::PQ: return "pq";
  }
  return "pq";
}

std::string_view to_string(ControlMode mode) {
  switch (mode) {
    case ControlMode::ActivePower: return "active-power";
    case ControlMode::DcVoltage: return "dc-voltage";
    case ControlMode::VoltageDroop: return "voltage-droop";
    case ControlMode::VoltageFrequencyDroop: return "voltage-frequency-droop";
  }
  return "active-power";
}

BusKind bus_kind_from_string(std::string_view text) {
  if (text == "slack-candidate") return BusKind::SlackCandidate;
  if (text == "pv") return BusKind::PV;
  if (text == "pq") return BusKind::PQ;
  throw std::invalid_argument("unknown bus kind '" + std::string(text) + "'");
}

ControlMode control_mode_from_string(std::string_view text) {
  if (text == "active-power") return ControlMode::ActivePower;
  if (text == "dc-voltage") return ControlMode::DcVoltage;
  if (text == "voltage-droop") return ControlMode::VoltageDroop;
  if (text == "voltage-frequency-droop") return ControlMode::VoltageFrequencyDroop;
  throw std::invalid_argument("unknown control mode '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void index_ids(const std::vector<T>& items, std::map<int, std::size_t>& map, const char* what) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!map.emplace(items[i].id, i).second) {
      throw std::invalid_argument(std::string("duplicate ") + what + " id " +
                                  std::to_string(items[i].id));
    }
  }
}

}  // namespace

CaseIndex::CaseIndex(const NetworkCase& net) {
  index_ids(net.ac_buses, ac_bus_, "ac_bus");
  index_ids(net.ac_branches, ac_branch_, "ac_branch");
  index_ids(net.generators, generator_, "generator");
  index_ids(net.dc_buses, dc_bus_, "dc_bus");
  index_ids(net.dc_branches, dc_branch_, "dc_branch");
  index_ids(net.converters, converter_, "converter");

  std::set<int> areas;
  for (const auto& bus : net.ac_buses) areas.insert(bus.area);
  areas_.assign(areas.begin(), areas.end());
  bus_area_.reserve(net.ac_buses.size());
  for (const auto& bus : net.ac_buses) bus_area_.push_back(area_position(bus.area));
}

std::optional<std::size_t> CaseIndex::find(const Map& map, int id) {
  auto it = map.find(id);
  if (it == map.end()) return std::nullopt;
  return it->second;
}

std::size_t CaseIndex::ac_bus_at(int id) const {
  auto pos = ac_bus(id);
  if (!pos) throw std::out_of_range("unknown AC bus " + std::to_string(id));
  return *pos;
}

std::size_t CaseIndex::dc_bus_at(int id) const {
  auto pos = dc_bus(id);
  if (!pos) throw std::out_of_range("unknown DC bus " + std::to_string(id));
  return *pos;
}

std::size_t CaseIndex::area_position(int area_id) const {
  auto it = std::lower_bound(areas_.begin(), areas_.end(), area_id);
  if (it == areas_.end() || *it != area_id) {
    throw std::out_of_range("unknown area " + std::to_string(area_id));
  }
  return static_cast<std::size_t>(it - areas_.begin());
}

// ---------------------------------------------------------------------------
// Validation

std::string ValidationReport::to_string() const {
  std::ostringstream out;
  for (const auto& v : violations) out << v.element << ": " << v.message << '\n';
  return out.str();
}

namespace {

class Checker {
 public:
  explicit Checker(ValidationReport& report) : report_(report) {}

  void require(bool condition, const std::string& element, const std::string& message) {
    if (!condition) report_.violations.push_back({element, message});
  }

 private:
  ValidationReport& report_;
};

std::string tag(const char* kind, int id) { return std::string(kind) + " " + std::to_string(id); }

template <typename T>
void check_unique(const std::vector<T>& items, const char* kind, Checker& check) {
  std::set<int> seen;
  for (const auto& item : items) {
    check.require(seen.insert(item.id).second, tag(kind, item.id), "duplicate id");
  }
}

/// Union-find over positions.
class Components {
 public:
  explicit Components(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t root(std::size_t i) {
    while (parent_[i] != i) i = parent_[i] = parent_[parent_[i]];
    return i;
  }
  void join(std::size_t a, std::size_t b) { parent_[root(a)] = root(b); }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

ValidationReport validate_case(const NetworkCase& net) {
  ValidationReport report;
  Checker check(report);

  const auto& b = net.bases;
  check.require(b.s_nom > 0 && b.v_dc_nom > 0 && b.f_nom > 0, "bases", "bases must be positive");

  check_unique(net.ac_buses, "ac_bus", check);
  check_unique(net.ac_branches, "ac_branch", check);
  check_unique(net.generators, "generator", check);
  check_unique(net.dc_buses, "dc_bus", check);
  check_unique(net.dc_branches, "dc_branch", check);
  check_unique(net.converters, "converter", check);
  check_unique(net.fixed_injections, "fixed_injection", check);
  if (!report.ok()) return report;  // everything below resolves ids

  const CaseIndex index(net);

  std::map<int, int> slack_count;
  for (const auto& bus : net.ac_buses) {
    const auto who = tag("ac_bus", bus.id);
    slack_count[bus.area] += bus.kind == BusKind::SlackCandidate ? 1 : 0;
    check.require(bus.u_min > 0, who, "u_min must be positive");
    check.require(bus.u_min <= bus.u_max, who, "u_min exceeds u_max");
    check.require(bus.delta_min <= bus.delta_max, who, "delta_min exceeds delta_max");
  }
  for (const auto& [area, count] : slack_count) {
    check.require(count == 1, tag("area", area),
                  "expected exactly one slack-candidate bus, found " + std::to_string(count));
  }

  for (const auto& br : net.ac_branches) {
    const auto who = tag("ac_branch", br.id);
    auto from = index.ac_bus(br.from_bus);
    auto to = index.ac_bus(br.to_bus);
    check.require(from.has_value(), who, "from_bus " + std::to_string(br.from_bus) + " not found");
    check.require(to.has_value(), who, "to_bus " + std::to_string(br.to_bus) + " not found");
    check.require(br.from_bus != br.to_bus, who, "from_bus equals to_bus");
    if (from && to) {
      check.require(net.ac_buses[*from].area == net.ac_buses[*to].area, who,
                    "connects buses of different areas");
    }
  }

  for (const auto& gen : net.generators) {
    const auto who = tag("generator", gen.id);
    check.require(index.ac_bus(gen.bus).has_value(), who,
                  "bus " + std::to_string(gen.bus) + " not found");
    check.require(gen.p_min <= gen.p_max, who, "p_min exceeds p_max");
    check.require(gen.q_min <= gen.q_max, who, "q_min exceeds q_max");
    check.require(gen.alpha >= 0, who, "alpha must be nonnegative (convex cost)");
    check.require(gen.governor_droop >= 0, who, "governor_droop must be nonnegative");
  }

  for (const auto& bus : net.dc_buses) {
    const auto who = tag("dc_bus", bus.id);
    check.require(bus.u_dc_min > 0, who, "u_dc_min must be positive");
    check.require(bus.u_dc_min <= bus.u_dc_rated && bus.u_dc_rated <= bus.u_dc_max, who,
                  "rated voltage outside [u_dc_min, u_dc_max]");
  }

  for (const auto& br : net.dc_branches) {
    const auto who = tag("dc_branch", br.id);
    check.require(index.dc_bus(br.from_bus).has_value(), who,
                  "from_bus " + std::to_string(br.from_bus) + " not found");
    check.require(index.dc_bus(br.to_bus).has_value(), who,
                  "to_bus " + std::to_string(br.to_bus) + " not found");
    check.require(br.from_bus != br.to_bus, who, "from_bus equals to_bus");
    check.require(!br.in_service || br.y_dc > 0, who, "y_dc must be positive when in service");
  }

  for (const auto& conv : net.converters) {
    const auto who = tag("converter", conv.id);
    const auto& s = conv.setpoints;
    check.require(index.ac_bus(conv.ac_bus).has_value(), who,
                  "ac_bus " + std::to_string(conv.ac_bus) + " not found");
    check.require(index.dc_bus(conv.dc_bus).has_value(), who,
                  "dc_bus " + std::to_string(conv.dc_bus) + " not found");
    check.require(conv.p_dc_min <= conv.p_dc_max, who, "p_dc_min exceeds p_dc_max");
    check.require(conv.loss_a >= 0 && conv.loss_b >= 0 && conv.loss_c_rec >= 0 &&
                      conv.loss_c_inv >= 0,
                  who, "loss coefficients must be nonnegative");
    check.require(s.k_min > 0 && s.k_min <= s.k_max, who, "droop range must satisfy 0 < k_min <= k_max");
    check.require(s.k_min <= s.k_v && s.k_v <= s.k_max, who, "k_v outside [k_min, k_max]");
    if (s.k_f) {
      check.require(std::isfinite(*s.k_f) && s.k_min <= *s.k_f && *s.k_f <= s.k_max, who,
                    "k_f outside [k_min, k_max]");
    }
    check.require(conv.control_mode != ControlMode::VoltageFrequencyDroop ||
                      (s.k_f && std::isfinite(*s.k_f)),
                  who, "voltage-frequency-droop requires a finite k_f");
    check.require(s.u_dc_0 > 0, who, "u_dc_0 must be positive");
  }

  for (const auto& inj : net.fixed_injections) {
    check.require(index.ac_bus(inj.bus).has_value(), tag("fixed_injection", inj.id),
                  "bus " + std::to_string(inj.bus) + " not found");
  }
  if (!report.ok()) return report;  // connectivity needs resolved references

  // AC: every area must be one connected component of in-service branches.
  Components ac(net.ac_buses.size());
  for (const auto& br : net.ac_branches) {
    if (br.in_service) ac.join(index.ac_bus_at(br.from_bus), index.ac_bus_at(br.to_bus));
  }
  std::map<int, std::size_t> area_root;
  for (std::size_t i = 0; i < net.ac_buses.size(); ++i) {
    const auto& bus = net.ac_buses[i];
    auto [it, fresh] = area_root.emplace(bus.area, ac.root(i));
    check.require(fresh || it->second == ac.root(i), tag("ac_bus", bus.id),
                  "not connected to the rest of area " + std::to_string(bus.area));
  }

  // DC: the whole DC grid must be connected through in-service branches.
  if (!net.dc_buses.empty()) {
    Components dc(net.dc_buses.size());
    for (const auto& br : net.dc_branches) {
      if (br.in_service) dc.join(index.dc_bus_at(br.from_bus), index.dc_bus_at(br.to_bus));
    }
    const std::size_t root = dc.root(0);
    for (std::size_t i = 1; i < net.dc_buses.size(); ++i) {
      check.require(dc.root(i) == root, tag("dc_bus", net.dc_buses[i].id),
                    "isolated from the DC grid");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

QuantityKind quantity_kind_from_string(std::string_view text) {
  if (text == "power") return QuantityKind::Power;
  if (text == "dc-voltage") return QuantityKind::DcVoltage;
  throw std::invalid_argument("unknown quantity kind '" + std::string(text) + "'");
}

namespace {
double base_of(const Bases& bases, QuantityKind kind) {
  const double base = kind == QuantityKind::Power ? bases.s_nom : bases.v_dc_nom;
  if (!(base > 0)) throw std::invalid_argument("per-unit base must be positive");
  return base;
}
}  // namespace

double to_per_unit(double value, const Bases& bases, QuantityKind kind) {
  return value / base_of(bases, kind);
}

double from_per_unit(double value, const Bases& bases, QuantityKind kind) {
  return value * base_of(bases, kind);
}

double modulation_index(long n_active, long n_total) {
  if (n_total <= 0) throw std::invalid_argument("submodule count must be positive");
  if (n_active < 0 || n_active > n_total) {
    throw std::invalid_argument("active submodules must lie in [0, n_total]");
  }
  return static_cast<double>(n_active) / static_cast<double>(n_total);
}

}  // namespace mtdc
