// Batch front end: solve, compare, export-plots, check.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "mtdc/contingency.hpp"
#include "mtdc/opf.hpp"
#include "mtdc/results_io.hpp"

namespace fs = std::filesystem;
using namespace mtdc;
using io::Json;

namespace {

struct RunConfig {
  std::string case_path;
  std::vector<std::string> scenarios;
  std::vector<std::string> strategies;
  std::optional<double> tol;
  int jobs = 1;
  std::string out = "results";
  std::string results;
  bool free_references = false;
  int max_retries = 5;
  bool layout = false;
  int points = 20;
  unsigned long long seed = 1;
};

/// Exit with a machine-readable error.
struct Failure {
  int code;
  std::string kind;
  std::string message;
  std::string path;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Failure{1, "io", "cannot write '" + path.string() + "'", path.string()};
  out << text;
}

int emit_error(const Failure& f, const std::string& out_dir) {
  Json j;
  j["error"] = f.kind;
  j["message"] = f.message;
  if (!f.path.empty()) j["path"] = f.path;
  j["exit_code"] = f.code;
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!ec) {
      std::ofstream(fs::path(out_dir) / "error.json", std::ios::binary) << text;
    }
  }
  return f.code;
}

NetworkCase load_valid_case(const std::string& path) {
  if (path.empty()) throw Failure{1, "usage", "--case is required", ""};
  if (!fs::exists(path)) throw Failure{1, "missing-file", "case file not found: " + path, path};
  NetworkCase net;
  try {
    net = load_case(path);
  } catch (const CaseError& e) {
    throw Failure{1, "case-error", e.locus() + ": " + e.what(), path};
  } catch (const std::exception& e) {
    throw Failure{1, "case-error", e.what(), path};
  }
  const auto report = validate_case(net);
  if (!report.ok()) throw Failure{1, "validation", report.to_string(), path};
  return net;
}

std::vector<contingency::Scenario> load_scenarios(const RunConfig& cfg, const NetworkCase& net) {
  std::vector<std::string> paths;
  for (const auto& s : cfg.scenarios) {
    if (s == "all") {
      std::vector<std::string> found;
      const fs::path dir = fs::path(cfg.case_path).parent_path().empty() ? fs::path(".")
                                                                         : fs::path(cfg.case_path).parent_path();
      for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind("scenario", 0) == 0 && e.path().extension() == ".json") {
          found.push_back(e.path().string());
        }
      }
      if (found.empty()) throw Failure{1, "missing-file", "no scenario*.json next to the case", dir.string()};
      std::sort(found.begin(), found.end());
      paths.insert(paths.end(), found.begin(), found.end());
    } else {
      paths.push_back(s);
    }
  }
  std::vector<contingency::Scenario> out;
  if (paths.empty()) out.push_back({"normal", {}, {}});
  for (const auto& p : paths) {
    if (!fs::exists(p)) throw Failure{1, "missing-file", "scenario file not found: " + p, p};
    try {
      auto s = contingency::load_scenario(p);
      contingency::apply_scenario(net, s);
      out.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw Failure{1, "scenario-error", e.what(), p};
    }
  }
  return out;
}

std::vector<opf::Strategy> load_strategies(const RunConfig& cfg, const NetworkCase& net) {
  std::vector<opf::StrategyKind> kinds;
  if (cfg.strategies.empty()) throw Failure{1, "usage", "at least one --strategy is required", ""};
  for (const auto& s : cfg.strategies) {
    if (s == "all") {
      kinds.insert(kinds.end(), opf::kAllStrategies.begin(), opf::kAllStrategies.end());
      continue;
    }
    try {
      kinds.push_back(opf::strategy_from_string(s));
    } catch (const std::exception& e) {
      throw Failure{1, "usage", e.what(), ""};
    }
  }
  std::vector<opf::Strategy> out;
  for (auto k : kinds) {
    auto s = opf::Strategy::make(k, net);
    try {
      s.check(net);
    } catch (const std::exception& e) {
      throw Failure{1, "validation", e.what(), cfg.case_path};
    }
    out.push_back(s);
  }
  return out;
}

bool trace_enabled() {
  const char* v = std::getenv("MTDC_OPF_TRACE");
  return v && std::string(v) == "1";
}

std::string file_tag(const std::string& s) {
  std::string t = s;
  for (char& c : t) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  }
  return t;
}

struct Batch {
  std::vector<Json> results;
  std::vector<io::ResultSummary> summaries;
};

/// Runs every (scenario, strategy) pair and writes one JSON per pair.
Batch run_batch(const RunConfig& cfg) {
  const NetworkCase net = load_valid_case(cfg.case_path);
  const auto scenarios = load_scenarios(cfg, net);
  const auto strategies = load_strategies(cfg, net);
  opf::HierarchyOptions options;
  if (cfg.tol) options.opf.nlp.tol = *cfg.tol;
  options.opf.free_references = cfg.free_references;
  options.max_retries = cfg.max_retries;
  const bool traces = trace_enabled();

  struct Job {
    std::size_t scenario, strategy;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    for (std::size_t k = 0; k < strategies.size(); ++k) jobs.push_back({s, k});
  }
  std::vector<Json> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < jobs.size();) {
      const auto& sc = scenarios[jobs[i].scenario];
      const auto& st = strategies[jobs[i].strategy];
      const NetworkCase post = contingency::apply_scenario(net, sc);
      try {
        const auto r = opf::run_hierarchy(net, st, sc, options);
        results[i] = io::to_json(r, net, post, traces);
      } catch (const std::exception& e) {
        opf::StrategyResult r;
        r.strategy = st;
        r.scenario = sc.id;
        r.message = e.what();
        results[i] = io::to_json(r, net, post, traces);
      }
    }
  };
  const int n_threads = std::clamp(cfg.jobs, 1, static_cast<int>(std::max<std::size_t>(1, jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  fs::create_directories(cfg.out);
  Batch b;
  for (const auto& r : results) {
    const auto name = "result_" + file_tag(r["strategy"].get<std::string>()) + "_" +
                      file_tag(r["scenario"].get<std::string>()) + ".json";
    write_file(fs::path(cfg.out) / name, r.dump(2) + "\n");
    b.summaries.push_back(io::summarize(r));
  }
  b.results = std::move(results);
  return b;
}

Batch read_results(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Failure{1, "no-results", "results directory not found: " + dir, dir};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.rfind("result_", 0) == 0 && e.path().extension() == ".json") {
      files.push_back(e.path());
    }
  }
  if (files.empty()) throw Failure{1, "no-results", "no result_*.json in " + dir, dir};
  std::vector<std::pair<std::pair<std::string, int>, Json>> loaded;
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      Json j = Json::parse(in);
      const auto kind = opf::strategy_from_string(j.at("strategy").get<std::string>());
      const int rank = static_cast<int>(std::find(opf::kAllStrategies.begin(), opf::kAllStrategies.end(), kind) -
                                        opf::kAllStrategies.begin());
      loaded.push_back({{j.at("scenario").get<std::string>(), rank}, std::move(j)});
    } catch (const std::exception& e) {
      throw Failure{1, "bad-result", e.what(), f.string()};
    }
  }
  std::sort(loaded.begin(), loaded.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  Batch b;
  for (auto& [key, j] : loaded) {
    b.summaries.push_back(io::summarize(j));
    b.results.push_back(std::move(j));
  }
  return b;
}

int cmd_solve(const RunConfig& cfg) {
  const Batch b = run_batch(cfg);
  write_file(fs::path(cfg.out) / "droop_tables.csv", io::droop_table_csv(b.results));
  write_file(fs::path(cfg.out) / "objectives.csv", io::objectives_csv(b.summaries));
  std::cout << io::objectives_csv(b.summaries);
  std::vector<std::string> failed;
  for (const auto& s : b.summaries) {
    if (!s.success) failed.push_back(s.strategy + "/" + s.scenario + ": " + s.message);
  }
  if (failed.empty()) return 0;
  std::string msg = "solver failure in " + std::to_string(failed.size()) + " job(s)";
  for (const auto& f : failed) msg += "; " + f;
  return emit_error({2, "solver-failure", msg, ""}, cfg.out);
}

int cmd_compare(const RunConfig& cfg) {
  const Batch b = cfg.results.empty() ? run_batch(cfg) : read_results(cfg.results);
  const auto checks = io::check_ordering(b.summaries);
  fs::create_directories(cfg.out);
  const std::string csv = io::comparison_csv(b.summaries, checks);
  write_file(fs::path(cfg.out) / "comparison.csv", csv);
  Json j;
  j["rows"] = Json::array();
  for (const auto& s : b.summaries) {
    j["rows"].push_back({{"scenario", s.scenario},
                         {"strategy", s.strategy},
                         {"status", s.success ? "ok" : "FAILED"},
                         {"obj1_stage3", s.success && s.obj1_stage3 ? Json(*s.obj1_stage3) : Json(nullptr)},
                         {"voltage_deviation", s.voltage_deviation ? Json(*s.voltage_deviation) : Json(nullptr)},
                         {"max_delta_f", s.max_delta_f ? Json(*s.max_delta_f) : Json(nullptr)}});
  }
  j["ordering"] = Json::array();
  for (const auto& c : checks) {
    j["ordering"].push_back({{"scenario", c.scenario},
                             {"complete", c.complete},
                             {"active_le_proposed", c.active_le_proposed},
                             {"active_le_adaptive", c.active_le_adaptive},
                             {"proposed_le_adaptive", c.proposed_le_adaptive},
                             {"verdict", c.complete ? (c.pass() ? "PASS" : "FAIL") : "INCOMPLETE"}});
  }
  write_file(fs::path(cfg.out) / "comparison.json", j.dump(2) + "\n");
  std::cout << csv;
  std::map<std::string, bool> any_ok;
  for (const auto& s : b.summaries) any_ok[s.scenario] = any_ok[s.scenario] || s.success;
  for (const auto& [sc, ok] : any_ok) {
    if (!ok) return emit_error({2, "solver-failure", "no strategy succeeded on scenario " + sc, ""}, cfg.out);
  }
  return 0;
}

int cmd_export(const RunConfig& cfg) {
  const Batch b = read_results(cfg.results.empty() ? cfg.out : cfg.results);
  fs::create_directories(cfg.out);
  const auto path = fs::path(cfg.out) / "plots_tidy.csv";
  write_file(path, io::tidy_csv(b.results));
  std::cout << path.string() << "\n";
  return 0;
}

int cmd_check(const RunConfig& cfg) {
  const NetworkCase net = load_valid_case(cfg.case_path);
  if (cfg.layout) {
    std::cout << steady::state_layout(net, steady::PowerFlowControls::from_case(net));
    return 0;
  }
  std::vector<std::string> names = cfg.strategies.empty() ? std::vector<std::string>{"all"} : cfg.strategies;
  RunConfig c = cfg;
  c.strategies = names;
  const auto strategies = load_strategies(c, net);
  const auto inputs = opf::default_inputs(net);
  Json report;
  report["case"] = cfg.case_path;
  report["validation"] = "ok";
  report["points"] = cfg.points;
  report["programs"] = Json::array();
  double worst = 0.0;
  for (const auto& st : strategies) {
    std::vector<opf::Stage> stages{opf::Stage::Stage1Cost};
    if (st.uses_droop()) stages.push_back(opf::Stage::Stage2Droop);
    stages.push_back(opf::Stage::Stage3Redispatch);
    for (auto stage : stages) {
      const auto built = opf::build_opf(net, st, stage, inputs);
      double err = 0.0;
      nlp::DerivativeEntry where;
      for (int k = 0; k < cfg.points; ++k) {
        const auto seed = cfg.seed + static_cast<unsigned long long>(k);
        const auto x = nlp::sample_interior_point(built.problem, seed);
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        nlp::Vector lam(built.problem.m_eq);
        for (auto& v : lam) v = u(rng);
        const auto r = nlp::check_derivatives(built.problem, x, 1e-6, lam);
        if (r.max_relative_error > err) {
          err = r.max_relative_error;
          where = r.worst;
        }
      }
      worst = std::max(worst, err);
      Json e;
      e["strategy"] = std::string(opf::to_string(st.kind));
      e["stage"] = std::string(opf::to_string(stage));
      e["variables"] = built.problem.n;
      e["equalities"] = built.problem.m_eq;
      e["max_relative_error"] = err;
      if (err > 0.0) {
        const auto& p = built.problem;
        auto label = [](const std::vector<std::string>& names, int i) {
          return i >= 0 && i < static_cast<int>(names.size()) ? Json(names[static_cast<std::size_t>(i)]) : Json(i);
        };
        const auto& rows = where.part == "hessian"         ? p.variable_names
                           : where.part == "ineq_jacobian" ? p.ineq_names
                                                           : p.eq_names;
        e["worst"] = {{"part", where.part}, {"row", label(rows, where.row)}, {"column", label(p.variable_names, where.col)}};
      }
      report["programs"].push_back(e);
    }
  }
  report["max_relative_error"] = worst;
  report["verdict"] = worst <= 1e-5 ? "PASS" : "FAIL";
  std::cout << report.dump(2) << "\n";
  return worst <= 1e-5 ? 0 : 2;
}

void add_common(CLI::App* sub, RunConfig& cfg, bool solving) {
  sub->add_option("--case", cfg.case_path, "case file (JSON)");
  sub->add_option("--strategy", cfg.strategies, "strategy name or 'all' (repeatable)");
  sub->add_option("--out", cfg.out, "output directory");
  if (solving) {
    sub->add_option("--scenario", cfg.scenarios, "scenario file or 'all' (repeatable)");
    sub->add_option("--tol", cfg.tol, "NLP optimality tolerance");
    sub->add_option("--jobs", cfg.jobs, "parallel jobs")->check(CLI::PositiveNumber);
    sub->add_flag("--free-references", cfg.free_references, "optimize droop references in stage 2");
    sub->add_option("--max-retries", cfg.max_retries, "stage-3 revisions before giving up")->check(CLI::NonNegativeNumber);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical AC/MTDC droop OPF"};
  app.require_subcommand(1);
  RunConfig cfg;
  auto* solve = app.add_subcommand("solve", "run the staged OPF per strategy and scenario");
  add_common(solve, cfg, true);
  auto* compare = app.add_subcommand("compare", "cross-strategy objective and sharing comparison");
  add_common(compare, cfg, true);
  compare->add_option("--results", cfg.results, "read existing result_*.json instead of solving");
  auto* plots = app.add_subcommand("export-plots", "tidy CSV of equilibrium quantities");
  plots->add_option("--results", cfg.results, "directory holding result_*.json (default: --out)");
  plots->add_option("--out", cfg.out, "output directory");
  auto* check = app.add_subcommand("check", "validate the case and check OPF derivatives");
  add_common(check, cfg, false);
  check->add_flag("--layout", cfg.layout, "print the power flow state layout");
  check->add_option("--points", cfg.points, "random interior points")->check(CLI::PositiveNumber);
  check->add_option("--seed", cfg.seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error({1, "usage", e.what(), ""}, "");
  }

  try {
    if (solve->parsed()) {
      if (cfg.strategies.empty()) cfg.strategies = {"all"};
      return cmd_solve(cfg);
    }
    if (compare->parsed()) {
      if (cfg.strategies.empty()) cfg.strategies = {"all"};
      return cmd_compare(cfg);
    }
    if (plots->parsed()) return cmd_export(cfg);
    return cmd_check(cfg);
  } catch (const Failure& f) {
    return emit_error(f, f.kind == "missing-file" || f.kind == "usage" ? "" : cfg.out);
  } catch (const std::exception& e) {
    return emit_error({2, "internal", e.what(), ""}, cfg.out);
  }
}
