// JSON and CSV renderings of operating points and strategy results.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtdc/opf.hpp"

namespace mtdc::io {

using Json = nlohmann::ordered_json;

/// Elements keyed by their case ids.
Json to_json(const steady::OperatingPoint& op, const NetworkCase& net);
Json to_json(const DroopSettings& d);
/// `post` is the case after the scenario; traces are embedded when requested.
Json to_json(const opf::StrategyResult& result, const NetworkCase& net, const NetworkCase& post,
             bool with_traces = false);

/// Compact view of one result, readable back from its JSON.
struct ResultSummary {
  std::string scenario;
  std::string strategy;
  bool success = false;
  std::string message;
  int retries = 0;
  double obj1_stage1 = 0.0;
  std::optional<double> obj2_stage2;
  std::optional<double> obj1_stage3;
  std::optional<double> voltage_deviation;
  std::optional<double> max_delta_f;
};

ResultSummary summarize(const Json& result);

/// Cost ordering of the strategies on one scenario.
struct OrderingCheck {
  std::string scenario;
  bool complete = false;  ///< all three strategies succeeded
  bool active_le_proposed = false;
  bool active_le_adaptive = false;
  bool proposed_le_adaptive = false;  ///< reported only
  bool pass() const { return complete && active_le_proposed && active_le_adaptive; }
};

/// a <= b up to 1e-8 relative to max(1, |b|).
bool cost_not_greater(double a, double b);

/// One check per scenario, in order of first appearance.
std::vector<OrderingCheck> check_ordering(const std::vector<ResultSummary>& summaries);

std::string format_number(double v);

/// scenario,strategy,converter,k_v,k_f,p_dc_0,u_dc_0 (final stage-3 coefficients)
std::string droop_table_csv(const std::vector<Json>& results);
/// scenario,strategy,success,retries,obj1_stage1,obj2_stage2,obj1_stage3
std::string objectives_csv(const std::vector<ResultSummary>& summaries);
/// scenario,strategy,success,obj1_stage3,voltage_deviation,max_delta_f plus the ordering verdicts
std::string comparison_csv(const std::vector<ResultSummary>& summaries, const std::vector<OrderingCheck>& checks);
/// Tidy long format: scenario,strategy,element,quantity,value
std::string tidy_csv(const std::vector<Json>& results);

}  // namespace mtdc::io
