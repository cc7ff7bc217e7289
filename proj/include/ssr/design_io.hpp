#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssr/dse.hpp"
#include "ssr/error.hpp"
#include "ssr/hw_profile.hpp"
#include "ssr/model_graph.hpp"
#include "ssr/perf_model.hpp"
#include "ssr/scheduler.hpp"

namespace ssr {

using nlohmann::json;

inline void to_json(json& j, const Assignment& a) {
  j = json{{"n_acc", a.n_acc}, {"acc_of", a.acc_of}};
}
inline void from_json(const json& j, Assignment& a) {
  a.n_acc = j.at("n_acc").get<int>();
  a.acc_of = j.at("acc_of").get<std::vector<int>>();
}

inline void to_json(json& j, const AccDesign& d) {
  std::vector<std::string> kinds;
  for (auto k : d.kinds) kinds.emplace_back(to_string(k));
  j = json{{"has_hmm", d.has_hmm},   {"cfg", d.cfg},
           {"kinds", kinds},         {"util", d.util},
           {"cycles_per_batch", d.cycles_per_batch}, {"evaluated", d.evaluated}};
}
inline void from_json(const json& j, AccDesign& d) {
  d.has_hmm = j.at("has_hmm").get<bool>();
  d.cfg = j.at("cfg").get<AccConfig>();
  d.kinds.clear();
  for (const auto& k : j.at("kinds")) d.kinds.insert(layer_kind_from_string(k.get<std::string>()));
  d.util = j.at("util").get<Utilization>();
  d.cycles_per_batch = j.at("cycles_per_batch").get<double>();
  d.evaluated = j.at("evaluated").get<std::int64_t>();
}

inline void to_json(json& j, const CommEdge& e) {
  j = json{{"producer_layer", e.producer_layer}, {"consumer_layer", e.consumer_layer},
           {"producer_acc", e.producer_acc},     {"consumer_acc", e.consumer_acc},
           {"bytes", e.bytes},                   {"kind", std::string(to_string(e.kind))}};
  if (e.producer_write_pattern)
    j["producer_write_pattern"] = {e.producer_write_pattern->a, e.producer_write_pattern->c};
  if (e.consumer_read_pattern)
    j["consumer_read_pattern"] = {e.consumer_read_pattern->a, e.consumer_read_pattern->b};
}
inline void from_json(const json& j, CommEdge& e) {
  e.producer_layer = j.at("producer_layer").get<int>();
  e.consumer_layer = j.at("consumer_layer").get<int>();
  e.producer_acc = j.at("producer_acc").get<int>();
  e.consumer_acc = j.at("consumer_acc").get<int>();
  e.bytes = j.at("bytes").get<std::int64_t>();
  auto k = j.at("kind").get<std::string>();
  if (k == "internal") e.kind = EdgeKind::Internal;
  else if (k == "load") e.kind = EdgeKind::Load;
  else if (k == "store") e.kind = EdgeKind::Store;
  else throw ValidationError("unknown edge kind '" + k + "'");
  e.producer_write_pattern.reset();
  e.consumer_read_pattern.reset();
  if (j.contains("producer_write_pattern")) {
    const auto& w = j["producer_write_pattern"];
    e.producer_write_pattern = WritePattern{w.at(0).get<std::int64_t>(), w.at(1).get<std::int64_t>()};
  }
  if (j.contains("consumer_read_pattern")) {
    const auto& r = j["consumer_read_pattern"];
    e.consumer_read_pattern = ReadPattern{r.at(0).get<std::int64_t>(), r.at(1).get<std::int64_t>()};
  }
}

inline void to_json(json& j, const TimeBase& t) {
  j = json{{"tick_hz", t.tick_hz},
           {"ticks_per_aie_cycle", t.ticks_per_aie_cycle},
           {"ticks_per_pl_cycle", t.ticks_per_pl_cycle}};
}
inline void from_json(const json& j, TimeBase& t) {
  t.tick_hz = j.at("tick_hz").get<std::uint64_t>();
  t.ticks_per_aie_cycle = j.at("ticks_per_aie_cycle").get<std::int64_t>();
  t.ticks_per_pl_cycle = j.at("ticks_per_pl_cycle").get<std::int64_t>();
}

// Entries as compact [batch, layer, acc, start, end] rows.
inline void to_json(json& j, const Schedule& s) {
  json rows = json::array();
  for (const auto& e : s.entries) rows.push_back({e.batch, e.layer, e.acc, e.start, e.end});
  j = json{{"n_batches", s.n_batches}, {"makespan", s.makespan}, {"acc_busy", s.acc_busy},
           {"time", s.time},           {"entries", rows}};
}
inline void from_json(const json& j, Schedule& s) {
  s.n_batches = j.at("n_batches").get<int>();
  s.makespan = j.at("makespan").get<std::int64_t>();
  s.acc_busy = j.at("acc_busy").get<std::vector<std::int64_t>>();
  s.time = j.at("time").get<TimeBase>();
  s.entries.clear();
  for (const auto& r : j.at("entries"))
    s.entries.push_back({r.at(0).get<int>(), r.at(1).get<int>(), r.at(2).get<int>(),
                         r.at(3).get<std::int64_t>(), r.at(4).get<std::int64_t>()});
}

inline void to_json(json& j, const DesignPoint& d) {
  j = json{{"mode", d.mode},
           {"realizable", d.realizable},
           {"feasible", d.feasible},
           {"reason", d.reason},
           {"latency_s", d.latency_s},
           {"throughput_ops", d.throughput},
           {"evaluated", d.evaluated},
           {"assignment", d.assignment},
           {"partition", d.partition.budgets},
           {"accs", d.accs},
           {"edges", d.edges},
           {"edge_overhead_s", d.edge_overhead_s},
           {"schedule", d.schedule}};
}
inline void from_json(const json& j, DesignPoint& d) {
  d.mode = j.at("mode").get<std::string>();
  d.realizable = j.at("realizable").get<bool>();
  d.feasible = j.at("feasible").get<bool>();
  d.reason = j.at("reason").get<std::string>();
  d.latency_s = j.at("latency_s").get<double>();
  d.throughput = j.at("throughput_ops").get<double>();
  d.evaluated = j.at("evaluated").get<std::int64_t>();
  d.assignment = j.at("assignment").get<Assignment>();
  d.partition.budgets = j.at("partition").get<std::vector<Utilization>>();
  d.accs = j.at("accs").get<std::vector<AccDesign>>();
  d.edges = j.at("edges").get<std::vector<CommEdge>>();
  d.edge_overhead_s = j.at("edge_overhead_s").get<std::vector<double>>();
  d.schedule = j.at("schedule").get<Schedule>();
}

// Worker count is left out: it never changes the result.
inline json params_to_json(const EaParams& p) {
  json lat = std::isfinite(p.lat_cons) ? json(p.lat_cons) : json(nullptr);
  return json{{"n_acc", p.n_acc},
              {"n_bat", p.n_bat},
              {"n_pop", p.n_pop},
              {"n_child", p.n_child},
              {"n_iter", p.n_iter},
              {"seed", p.seed},
              {"lat_cons_s", lat},
              {"inter_acc_flag", p.inter_acc_flag},
              {"tile_cap", p.dse.tile_cap},
              {"tile_min", p.dse.tile_min},
              {"max_evaluations_per_acc", p.dse.max_evaluations_per_acc}};
}
inline EaParams params_from_json(const json& j) {
  EaParams p;
  p.n_acc = j.at("n_acc").get<int>();
  p.n_bat = j.at("n_bat").get<int>();
  p.n_pop = j.at("n_pop").get<int>();
  p.n_child = j.at("n_child").get<int>();
  p.n_iter = j.at("n_iter").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.lat_cons = j.at("lat_cons_s").is_null() ? std::numeric_limits<double>::infinity()
                                            : j.at("lat_cons_s").get<double>();
  p.inter_acc_flag = j.at("inter_acc_flag").get<bool>();
  p.dse.tile_cap = j.at("tile_cap").get<std::int64_t>();
  p.dse.tile_min = j.at("tile_min").get<std::int64_t>();
  p.dse.max_evaluations_per_acc = j.at("max_evaluations_per_acc").get<std::int64_t>();
  return p;
}

/// Everything needed to replay a design without the original inputs.
struct DesignFile {
  std::string model_name;
  Graph graph;
  HardwareProfile hw;
  EaParams params;
  DesignPoint design;
};

inline json design_file_to_json(const DesignFile& f) {
  return json{{"format", "ssr-design/1"},
              {"model", {{"name", f.model_name}, {"layers", graph_to_json(f.graph)}}},
              {"hardware", f.hw},
              {"params", params_to_json(f.params)},
              {"design", f.design}};
}

inline DesignFile design_file_from_json(const json& j) {
  try {
    DesignFile f;
    if (j.value("format", std::string{}) != "ssr-design/1")
      throw ValidationError("not a design file (missing format tag)");
    f.model_name = j.at("model").value("name", std::string{});
    f.graph = graph_from_json(j.at("model").at("layers"));
    f.hw = profile_from_json(j.at("hardware"));
    f.params = params_from_json(j.at("params"));
    f.design = j.at("design").get<DesignPoint>();
    f.design.assignment.validate(f.graph);
    return f;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("design file schema: ") + e.what());
  }
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

/// Model input: a built-in name, a ModelSpec JSON, or a layer-list graph
/// ({"layers": [...]} or a bare array).
inline std::pair<std::string, Graph> load_model(const std::string& name_or_path) {
  if (auto s = builtin_model(name_or_path)) return {s->name, build_transformer(*s)};
  json j = read_json_file(name_or_path);
  try {
    if (j.is_array()) return {std::filesystem::path(name_or_path).stem().string(), graph_from_json(j)};
    if (j.contains("layers"))
      return {j.value("name", std::filesystem::path(name_or_path).stem().string()),
              graph_from_json(j.at("layers"))};
    ModelSpec s = j.get<ModelSpec>();
    return {s.name, build_transformer(s)};
  } catch (const json::exception& e) {
    throw ValidationError("model schema: " + std::string(e.what()));
  }
}

// PLIO ports: a*b left-operand streams, b*c output streams and, for Type1,
// a*c right-operand streams.
inline std::vector<std::string> plio_list(const AccConfig& c) {
  std::vector<std::string> out;
  for (std::int64_t i = 0; i < c.a; ++i)
    for (std::int64_t k = 0; k < c.b; ++k)
      out.push_back("lhs_" + std::to_string(i) + "_" + std::to_string(k));
  for (std::int64_t k = 0; k < c.b; ++k)
    for (std::int64_t j = 0; j < c.c; ++j)
      out.push_back("out_" + std::to_string(k) + "_" + std::to_string(j));
  if (c.hmm_type == HmmType::Type1)
    for (std::int64_t i = 0; i < c.a; ++i)
      for (std::int64_t j = 0; j < c.c; ++j)
        out.push_back("rhs_" + std::to_string(i) + "_" + std::to_string(j));
  return out;
}

inline json acc_manifest(const DesignPoint& d, std::size_t acc) {
  const AccDesign& a = d.accs.at(acc);
  std::vector<std::string> kinds;
  for (auto k : a.kinds)
    if (is_hce(k)) kinds.emplace_back(to_string(k));
  json m{{"acc_id", acc}, {"fused_kinds", kinds}, {"ram_banks", a.util.ram_banks}};
  if (!a.has_hmm) {
    m["hmm_type"] = nullptr;
    m["plio_list"] = json::array();
    return m;
  }
  const AccConfig& c = a.cfg;
  m["hmm_type"] = std::string(to_string(c.hmm_type));
  m["h1"] = c.h1;
  m["w1"] = c.w1;
  m["w2"] = c.w2;
  m["a"] = c.a;
  m["b"] = c.b;
  m["c"] = c.c;
  m["part_a"] = c.part_a;
  m["part_b"] = c.part_b;
  m["part_c"] = c.part_c;
  m["plio_list"] = plio_list(c);
  return m;
}

/// Writes acc_<i>.json per accelerator; returns the paths written.
inline std::vector<std::filesystem::path> emit_manifests(const DesignPoint& d,
                                                         const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (std::size_t a = 0; a < d.accs.size(); ++a) {
    auto path = dir / ("acc_" + std::to_string(a) + ".json");
    write_text_file(path, dump_json(acc_manifest(d, a)));
    out.push_back(path);
  }
  return out;
}

/// CSV of every realizable archive point sorted by latency (ties: higher
/// throughput first), flagging points dominated by another archive point.
inline std::string emit_pareto(const std::vector<DesignPoint>& archive) {
  std::vector<const DesignPoint*> pts;
  for (const auto& d : archive)
    if (d.realizable) pts.push_back(&d);
  std::stable_sort(pts.begin(), pts.end(), [](const DesignPoint* x, const DesignPoint* y) {
    if (x->latency_s != y->latency_s) return x->latency_s < y->latency_s;
    return x->throughput > y->throughput;
  });
  std::ostringstream os;
  os << "latency_ms,throughput_tops,n_acc,batch,mode,dominated\n";
  char buf[64];
  for (const auto* d : pts) {
    bool dom = false;
    for (const auto* o : pts)
      if (dominates(*o, *d)) {
        dom = true;
        break;
      }
    std::snprintf(buf, sizeof buf, "%.6f", d->latency_s * 1e3);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.6f", d->throughput / 1e12);
    os << buf << ',' << d->n_acc() << ',' << d->n_batches() << ',' << d->mode << ','
       << (dom ? "true" : "false") << '\n';
  }
  return os.str();
}

/// One JSON object per scheduled execution.
inline std::string schedule_jsonl(const Schedule& s) {
  std::string out;
  for (const auto& e : s.entries) {
    json j{{"batch", e.batch}, {"layer", e.layer}, {"acc", e.acc},
           {"start_s", s.time.seconds(e.start)}, {"end_s", s.time.seconds(e.end)},
           {"start_ticks", e.start}, {"end_ticks", e.end}};
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace ssr
