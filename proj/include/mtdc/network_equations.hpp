// Equality rows of the hybrid AC/DC model over one flat state vector.
//
// Power flow and every OPF stage use the same column layout and pick the rows
// they need. Each row has analytic first and second derivatives.

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mtdc/steadystate.hpp"

namespace mtdc::steady {

/// Column layout:
///   u[bus] | delta[bus] | u_dc[dc bus] | p_g[gen] | q_g[gen] | p_c[conv] |
///   q_c[conv] | p_dc[conv] | i_c[conv] | delta_f[area] | k_v[slot] | k_f[slot] |
///   p_ref[slot] | u_ref[slot]
/// Element positions follow the NetworkCase order, areas follow
/// CaseIndex::areas(). Slots exist only in droop-tuning OPF stages.
struct VariableLayout {
  int n_bus = 0, n_dc = 0, n_gen = 0, n_conv = 0, n_area = 0, n_kv = 0, n_kf = 0, n_ref = 0;

  int u(int bus) const { return bus; }
  int delta(int bus) const { return n_bus + bus; }
  int u_dc(int j) const { return 2 * n_bus + j; }
  int p_g(int g) const { return 2 * n_bus + n_dc + g; }
  int q_g(int g) const { return p_g(n_gen) + g; }
  int p_c(int c) const { return q_g(n_gen) + c; }
  int q_c(int c) const { return p_c(n_conv) + c; }
  int p_dc(int c) const { return q_c(n_conv) + c; }
  int i_c(int c) const { return p_dc(n_conv) + c; }
  int delta_f(int a) const { return i_c(n_conv) + a; }
  int k_v(int slot) const { return delta_f(n_area) + slot; }
  int k_f(int slot) const { return k_v(n_kv) + slot; }
  int p_ref(int slot) const { return k_f(n_kf) + slot; }
  int u_ref(int slot) const { return p_ref(n_ref) + slot; }
  int size() const { return u_ref(n_ref); }

  static VariableLayout of(const NetworkCase& net, int n_kv = 0, int n_kf = 0, int n_ref = 0);

  /// Human-readable column name, e.g. "u_dc[dc_bus 3]".
  std::string name(int column, const NetworkCase& net) const;

  Vector pack(const OperatingPoint& op) const;
  /// Copies the state columns; p_loss is recomputed from i_c by the caller.
  OperatingPoint unpack(const Vector& x) const;
};

enum class RowKind {
  ActiveBalance,
  ReactiveBalance,
  DcBalance,
  ConverterLoss,
  ReactorCurrent,
  Droop,
  Pin,
  GeneratorGovernor,
  AreaFrequency,
  Equal,
};

struct RowInfo {
  RowKind kind;
  std::string label;
};

/// A droop coefficient is either a constant or a state column.
struct Coefficient {
  double value = 1.0;
  int column = -1;

  static Coefficient constant(double v) { return {v, -1}; }
  static Coefficient variable(int col) { return {0.0, col}; }
  double at(const Vector& x) const { return column >= 0 ? x[column] : value; }
};

struct DroopRow {
  int converter = 0;
  double p_dc_0 = 0.0;
  double u_dc_0 = 1.0;
  double f_ref = 1.0;
  Coefficient k_v;
  std::optional<Coefficient> k_f;
  int p_ref_column = -1;  ///< replaces p_dc_0 when set
  int u_ref_column = -1;  ///< replaces u_dc_0 when set
};

class NetworkEquations {
 public:
  explicit NetworkEquations(const NetworkCase& net, int n_kv = 0, int n_kf = 0, int n_ref = 0);

  const NetworkCase& network() const { return *net_; }
  const CaseIndex& index() const { return *index_; }
  const VariableLayout& layout() const { return layout_; }
  const Admittance& admittance() const { return y_; }
  const Matrix& dc_admittance() const { return y_dc_; }

  /// Active and reactive balance at every AC bus.
  void add_ac_balance();
  /// Power balance at every DC bus.
  void add_dc_balance();
  /// Loss coupling and reactor current rows for every in-service converter.
  void add_converter_physics(const std::vector<ConverterDirection>& directions);
  void add_droop(const DroopRow& row);
  /// x[column] - value = 0
  void add_pin(int column, double value, std::string label);
  /// x[a] - x[b] = 0
  void add_equal(int column_a, int column_b, std::string label);
  /// p_g - p_set + R delta_f(area of gen) = 0
  void add_governor(int generator, double p_set);
  /// sum over in-service gens of the area (p_g - p_sched) + R_area delta_f = 0
  void add_area_frequency(int area, const std::vector<double>& p_sched);

  int rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<RowInfo>& row_info() const { return info_; }
  const std::vector<ConverterDirection>& directions() const { return directions_; }

  Vector residual(const Vector& x) const;
  Matrix jacobian(const Vector& x) const;
  /// h += sum_r lambda[r] * Hessian(row r).
  void add_hessian(const Vector& x, const Vector& lambda, Matrix& h) const;

  /// Sum of governor_droop over in-service generators of an area position.
  double area_response(int area) const;
  int area_of_bus(int bus) const { return static_cast<int>(index_->bus_area()[static_cast<std::size_t>(bus)]); }

 private:
  struct Row {
    RowKind kind;
    int element = 0;  // bus, dc bus, converter, generator, area or column
    int other = 0;
    double value = 0.0;
    int droop = -1;   // index into droops_
    int sched = -1;   // index into schedules_
  };

  void push(Row row, RowKind kind, std::string label);

  std::shared_ptr<const NetworkCase> net_;
  std::shared_ptr<const CaseIndex> index_;
  VariableLayout layout_;
  Admittance y_;
  Matrix y_dc_;

  std::vector<std::vector<int>> gens_at_bus_, convs_at_bus_, convs_at_dc_;
  std::vector<int> conv_ac_, conv_dc_, gen_bus_;
  std::vector<double> fixed_p_, fixed_q_;

  std::vector<Row> rows_;
  std::vector<RowInfo> info_;
  std::vector<DroopRow> droops_;
  std::vector<std::vector<double>> schedules_;
  std::vector<ConverterDirection> directions_;
};

}  // namespace mtdc::steady
