// Static description of a hybrid AC / multi-terminal DC grid.
//
// All electrical quantities are per-unit on the case Bases, angles are in
// radians. Elements are stored in file order; the integer ids are the
// user-facing handles and are resolved through CaseIndex.

#pragma once

#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mtdc {

enum class BusKind { SlackCandidate, PV, PQ };

/// Converter control law. DcVoltage (constant DC voltage) is only used as an
/// operator override during contingencies; OPF strategies never assign it.
enum class ControlMode { ActivePower, DcVoltage, VoltageDroop, VoltageFrequencyDroop };

std::string_view to_string(BusKind kind);
std::string_view to_string(ControlMode mode);
BusKind bus_kind_from_string(std::string_view text);
ControlMode control_mode_from_string(std::string_view text);

inline constexpr double kDefaultDroopMin = 0.001;
inline constexpr double kDefaultDroopMax = 1.0;

struct Bases {
  double s_nom = 100.0;    // MVA
  double v_dc_nom = 200.0; // kV
  double f_nom = 50.0;     // Hz

  bool operator==(const Bases&) const = default;
};

struct AcBus {
  int id = 0;
  BusKind kind = BusKind::PQ;
  double u_min = 0.9;
  double u_max = 1.1;
  double delta_min = -std::numbers::pi / 2;
  double delta_max = std::numbers::pi / 2;
  double p_demand = 0.0;
  double q_demand = 0.0;
  int area = 1;

  bool operator==(const AcBus&) const = default;
};

struct AcBranch {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double g = 0.0;       // series conductance
  double b = 0.0;       // series susceptance
  double b_shunt = 0.0; // total line charging, split evenly over both ends
  bool in_service = true;

  bool operator==(const AcBranch&) const = default;
};

struct Generator {
  int id = 0;
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double alpha = 0.0; // cost per p.u.^2
  double beta = 0.0;  // cost per p.u.
  double gamma = 0.0; // fixed cost
  /// Steady-state frequency response, p.u. power per p.u. frequency.
  double governor_droop = 0.0;
  bool in_service = true;

  double cost(double p_g) const { return (alpha * p_g + beta) * p_g + gamma; }

  bool operator==(const Generator&) const = default;
};

struct DcBus {
  int id = 0;
  double u_dc_rated = 1.0;
  double u_dc_min = 0.9;
  double u_dc_max = 1.1;

  bool operator==(const DcBus&) const = default;
};

struct DcBranch {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double y_dc = 0.0;
  bool in_service = true;

  bool operator==(const DcBranch&) const = default;
};

struct DroopSettings {
  double p_dc_0 = 0.0;
  double u_dc_0 = 1.0;
  double f_ref = 1.0;
  double k_v = kDefaultDroopMax;
  std::optional<double> k_f; // absent: no frequency term
  double k_min = kDefaultDroopMin;
  double k_max = kDefaultDroopMax;

  bool operator==(const DroopSettings&) const = default;
};

struct ConverterStation {
  int id = 0;
  int ac_bus = 0;
  int dc_bus = 0;
  double p_dc_min = 0.0;
  double p_dc_max = 0.0;
  double loss_a = 0.0;
  double loss_b = 0.0;
  double loss_c_rec = 0.0;
  double loss_c_inv = 0.0;
  ControlMode control_mode = ControlMode::ActivePower;
  DroopSettings setpoints;
  bool in_service = true;

  bool operator==(const ConverterStation&) const = default;
};

/// Constant power source at an AC bus (e.g. a wind farm).
struct FixedInjection {
  int id = 0;
  int bus = 0;
  double p = 0.0;
  double q = 0.0;

  bool operator==(const FixedInjection&) const = default;
};

struct NetworkCase {
  Bases bases;
  std::vector<AcBus> ac_buses;
  std::vector<AcBranch> ac_branches;
  std::vector<Generator> generators;
  std::vector<DcBus> dc_buses;
  std::vector<DcBranch> dc_branches;
  std::vector<ConverterStation> converters;
  std::vector<FixedInjection> fixed_injections;

  bool operator==(const NetworkCase&) const = default;
};

/// Id -> position lookups plus the AC area partition. Built once per case;
/// throws std::invalid_argument on duplicate ids.
class CaseIndex {
 public:
  explicit CaseIndex(const NetworkCase& net);

  std::optional<std::size_t> ac_bus(int id) const { return find(ac_bus_, id); }
  std::optional<std::size_t> ac_branch(int id) const { return find(ac_branch_, id); }
  std::optional<std::size_t> generator(int id) const { return find(generator_, id); }
  std::optional<std::size_t> dc_bus(int id) const { return find(dc_bus_, id); }
  std::optional<std::size_t> dc_branch(int id) const { return find(dc_branch_, id); }
  std::optional<std::size_t> converter(int id) const { return find(converter_, id); }

  /// Position of an id that is known to exist; throws otherwise.
  std::size_t ac_bus_at(int id) const;
  std::size_t dc_bus_at(int id) const;

  /// Sorted distinct area ids.
  const std::vector<int>& areas() const { return areas_; }
  std::size_t area_position(int area_id) const;
  /// Area position of every AC bus, in bus order.
  const std::vector<std::size_t>& bus_area() const { return bus_area_; }

 private:
  using Map = std::map<int, std::size_t>;
  static std::optional<std::size_t> find(const Map& map, int id);

  Map ac_bus_, ac_branch_, generator_, dc_bus_, dc_branch_, converter_;
  std::vector<int> areas_;
  std::vector<std::size_t> bus_area_;
};

// ---------------------------------------------------------------------------
// Case file I/O

/// Parse or schema failure. `locus` names the line/column or the JSON path of
/// the offending field.
class CaseError : public std::runtime_error {
 public:
  enum class Kind { Syntax, Schema, DanglingReference, DuplicateId };

  CaseError(Kind kind, std::string locus, const std::string& message);

  Kind kind() const { return kind_; }
  const std::string& locus() const { return locus_; }

 private:
  Kind kind_;
  std::string locus_;
};

inline constexpr std::string_view kCaseSchema = "mtdc-opf/1";

NetworkCase parse_case(std::string_view text);
NetworkCase load_case(const std::string& path);
std::string serialize_case(const NetworkCase& net);

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string element; // e.g. "ac_bus 3"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

ValidationReport validate_case(const NetworkCase& net);

// ---------------------------------------------------------------------------
// Per-unit helpers

enum class QuantityKind { Power, DcVoltage };

QuantityKind quantity_kind_from_string(std::string_view text);
double to_per_unit(double value, const Bases& bases, QuantityKind kind);
double from_per_unit(double value, const Bases& bases, QuantityKind kind);

/// Fraction of submodules inserted in an arm, N_active / N_total.
double modulation_index(long n_active, long n_total);

}  // namespace mtdc
