#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ssr/design_io.hpp"
#include "ssr/dse.hpp"
#include "ssr/error.hpp"
#include "ssr/simulator.hpp"

namespace ssr::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kBadInput = 3,
  kInfeasible = 4,
};

namespace detail {

struct SearchArgs {
  std::string model;
  std::string hw = "vck190";
  int batches = 1;
  double latency_ms = 0;  // 0: unconstrained
  std::string mode = "hybrid";
  int naccs = 6;
  std::uint64_t seed = 0;
  int pop = 16;
  int children = 16;
  int iters = 50;
  std::string inter_acc = "on";
  double eff = 0;  // 0: keep the profile's value
  std::int64_t tile_cap = 256;
};

inline void add_search_flags(CLI::App* app, SearchArgs& a) {
  app->add_option("--model", a.model, "built-in model name or JSON file")->required();
  app->add_option("--hw", a.hw, "built-in profile name or JSON file");
  app->add_option("--batches", a.batches, "batches in flight")->check(CLI::PositiveNumber);
  app->add_option("--latency-ms", a.latency_ms, "latency constraint in ms (0: none)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--mode", a.mode)->check(CLI::IsMember({"sequential", "spatial", "hybrid"}));
  app->add_option("--naccs", a.naccs, "accelerators available")->check(CLI::PositiveNumber);
  app->add_option("--seed", a.seed);
  app->add_option("--pop", a.pop)->check(CLI::Range(2, 1 << 20));
  app->add_option("--children", a.children)->check(CLI::Range(2, 1 << 20));
  app->add_option("--iters", a.iters)->check(CLI::PositiveNumber);
  app->add_option("--inter-acc-aware", a.inter_acc)->check(CLI::IsMember({"on", "off"}));
  app->add_option("--eff", a.eff, "override the profile MAC efficiency")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--tile-cap", a.tile_cap)->check(CLI::PositiveNumber);
}

inline EaParams to_params(const SearchArgs& a) {
  EaParams p;
  p.n_acc = a.naccs;
  p.n_bat = a.batches;
  p.n_pop = a.pop;
  p.n_child = a.children + a.children % 2;
  p.n_iter = a.iters;
  p.seed = a.seed;
  if (a.latency_ms > 0) p.lat_cons = a.latency_ms * 1e-3;
  p.inter_acc_flag = a.inter_acc == "on";
  p.dse.tile_cap = a.tile_cap;
  if (const char* t = std::getenv("SSR_THREADS")) {
    int n = std::atoi(t);
    if (n > 0) p.threads = n;
  }
  return p;
}

inline HardwareProfile load_hw(const SearchArgs& a) {
  HardwareProfile hw = load_profile(a.hw);
  if (a.eff > 0) hw.eff = a.eff;
  hw.validate();
  return hw;
}

}  // namespace detail

/// Command-line entry point; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Spatial-sequential accelerator design space explorer"};
  app.require_subcommand(1);

  detail::SearchArgs ex;
  std::string ex_out = "design.json", ex_pareto = "pareto.csv", ex_emit, ex_sched;
  auto* explore = app.add_subcommand("explore", "search assignments and configurations");
  detail::add_search_flags(explore, ex);
  explore->add_option("--out", ex_out, "best design JSON");
  explore->add_option("--pareto-out", ex_pareto, "Pareto CSV of the archive");
  explore->add_option("--emit-config-dir", ex_emit, "also write per-accelerator manifests");
  explore->add_option("--schedule-out", ex_sched, "schedule of the best design (JSON lines)");

  detail::SearchArgs pa;
  std::string pa_out;
  auto* pareto = app.add_subcommand("pareto", "sequential, spatial and hybrid archives as one CSV");
  detail::add_search_flags(pareto, pa);
  pareto->add_option("--pareto-out", pa_out, "CSV path (default: stdout)");

  std::string sim_design, sim_out, sim_trace_out = "events.jsonl";
  bool sim_trace = false, sim_no_bypass = false, sim_no_force = false;
  auto* simulate_cmd = app.add_subcommand("simulate", "replay a design event by event");
  simulate_cmd->add_option("--design", sim_design)->required();
  simulate_cmd->add_flag("--trace", sim_trace, "write the event log");
  simulate_cmd->add_option("--trace-out", sim_trace_out, "event log path (JSON lines)");
  simulate_cmd->add_option("--out", sim_out, "report path (default: stdout)");
  simulate_cmd->add_flag("--no-bypass", sim_no_bypass, "disable the nonlinear bypass buffer");
  simulate_cmd->add_flag("--no-force-partition", sim_no_force,
                         "keep natural bank layouts on consumers");

  std::string em_design, em_dir = "gen";
  auto* emit = app.add_subcommand("emit", "write per-accelerator configuration manifests");
  emit->add_option("--design", em_design)->required();
  emit->add_option("--out-dir", em_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsage;
  }

  try {
    if (*explore) {
      auto [name, g] = load_model(ex.model);
      HardwareProfile hw = detail::load_hw(ex);
      EaParams params = detail::to_params(ex);
      params.validate();
      SearchResult r = run_search(g, hw, params, search_mode_from_string(ex.mode));
      write_text_file(ex_pareto, emit_pareto(r.archive));
      if (!r.best) {
        err << "no design meets the latency constraint\n";
        return kInfeasible;
      }
      DesignFile f{name, g, hw, params, *r.best};
      write_text_file(ex_out, dump_json(design_file_to_json(f)));
      if (!ex_emit.empty()) emit_manifests(*r.best, ex_emit);
      if (!ex_sched.empty()) write_text_file(ex_sched, schedule_jsonl(r.best->schedule));
      out << "best: " << r.best->n_acc() << " accs, latency "
          << r.best->latency_s * 1e3 << " ms, throughput " << r.best->throughput / 1e12
          << " TOPS (" << r.archive.size() << " designs evaluated)\n";
      return kOk;
    }
    if (*pareto) {
      auto [name, g] = load_model(pa.model);
      HardwareProfile hw = detail::load_hw(pa);
      EaParams params = detail::to_params(pa);
      params.validate();
      std::vector<DesignPoint> all;
      bool any = false;
      for (auto m : {SearchMode::Sequential, SearchMode::Spatial, SearchMode::Hybrid}) {
        SearchResult r = run_search(g, hw, params, m);
        any = any || r.best.has_value();
        for (auto& d : r.archive) all.push_back(std::move(d));
      }
      std::string csv = emit_pareto(all);
      if (pa_out.empty()) out << csv;
      else write_text_file(pa_out, csv);
      return any ? kOk : kInfeasible;
    }
    if (*simulate_cmd) {
      DesignFile f = design_file_from_json(read_json_file(sim_design));
      SimOptions opt;
      opt.trace = sim_trace;
      opt.bypass_nonlinear = !sim_no_bypass;
      opt.force_partition = !sim_no_force;
      if (!f.design.realizable) {
        err << "design is not realizable: " << f.design.reason << "\n";
        return kInfeasible;
      }
      SimReport rep = simulate(f.design, f.graph, f.hw, opt);
      nlohmann::json j = rep;
      j["analytical_latency_s"] = f.design.latency_s;
      j["relative_error"] =
          rep.makespan_ticks > 0
              ? std::abs(double(f.design.schedule.makespan) - double(rep.makespan_ticks)) /
                    double(rep.makespan_ticks)
              : 0.0;
      if (sim_out.empty()) out << dump_json(j);
      else write_text_file(sim_out, dump_json(j));
      if (sim_trace) {
        std::string log;
        for (const auto& e : rep.events) log += nlohmann::json(e).dump() + "\n";
        write_text_file(sim_trace_out, log);
      }
      return kOk;
    }
    if (*emit) {
      DesignFile f = design_file_from_json(read_json_file(em_design));
      if (!f.design.realizable) {
        err << "design is not realizable: " << f.design.reason << "\n";
        return kInfeasible;
      }
      for (const auto& p : emit_manifests(f.design, em_dir)) out << p.string() << "\n";
      return kOk;
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace ssr::cli
