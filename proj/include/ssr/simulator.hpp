#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "ssr/dse.hpp"
#include "ssr/error.hpp"
#include "ssr/hw_profile.hpp"
#include "ssr/model_graph.hpp"
#include "ssr/perf_model.hpp"
#include "ssr/scheduler.hpp"

namespace ssr {

enum class EventKind { AccStart, AccEnd, XferStart, XferEnd, BankBusy, BankFree };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::AccStart: return "acc_start";
    case EventKind::AccEnd: return "acc_end";
    case EventKind::XferStart: return "xfer_start";
    case EventKind::XferEnd: return "xfer_end";
    case EventKind::BankBusy: return "bank_busy";
    case EventKind::BankFree: return "bank_free";
  }
  return "?";
}

struct Event {
  std::int64_t time = 0;  // ticks
  std::uint64_t seq = 0;
  EventKind kind = EventKind::AccStart;
  int batch = 0;
  int layer = 0;
  int acc = 0;

  bool operator==(const Event&) const = default;
};

inline void to_json(nlohmann::json& j, const Event& e) {
  j = nlohmann::json{{"time", e.time},   {"seq", e.seq},     {"kind", to_string(e.kind)},
                     {"batch", e.batch}, {"layer", e.layer}, {"acc", e.acc}};
}

struct SimOptions {
  bool bypass_nonlinear = true;
  // false: consumers keep their natural (a, b, c) bank layout.
  bool force_partition = true;
  bool trace = false;
  // Station time per layer position in ticks, replacing every cost formula.
  std::optional<std::vector<std::int64_t>> durations;
};

struct StallBreakdown {
  std::int64_t bank_conflict = 0;
  std::int64_t dep_wait = 0;
  std::int64_t dma_wait = 0;
  bool operator==(const StallBreakdown&) const = default;
};

struct SimReport {
  TimeBase time;
  std::int64_t makespan_ticks = 0;
  double makespan_s = 0;
  std::int64_t makespan_aie_cycles = 0;
  std::int64_t makespan_pl_cycles = 0;
  std::vector<std::int64_t> busy;  // per acc, ticks
  std::vector<std::int64_t> idle;
  std::vector<double> utilization;
  std::vector<StallBreakdown> acc_stalls;
  StallBreakdown stalls;  // worst accelerator per component
  std::vector<ScheduleEntry> entries;
  std::vector<Event> events;  // filled when tracing

  bool operator==(const SimReport&) const = default;
};

inline void to_json(nlohmann::json& j, const StallBreakdown& s) {
  j = nlohmann::json{
      {"bank_conflict", s.bank_conflict}, {"dep_wait", s.dep_wait}, {"dma_wait", s.dma_wait}};
}

inline void to_json(nlohmann::json& j, const SimReport& r) {
  j = nlohmann::json{{"tick_hz", r.time.tick_hz},
                     {"makespan_ticks", r.makespan_ticks},
                     {"makespan_s", r.makespan_s},
                     {"makespan_aie_cycles", r.makespan_aie_cycles},
                     {"makespan_pl_cycles", r.makespan_pl_cycles},
                     {"busy_ticks", r.busy},
                     {"idle_ticks", r.idle},
                     {"utilization", r.utilization},
                     {"acc_stalls_ticks", r.acc_stalls},
                     {"stalls_ticks", r.stalls}};
}

/// Event-driven replay of a design. Each accelerator is a station that runs
/// one matrix layer at a time through DMA load, serialized bank copies for
/// misaligned inputs, compute and DMA store. Fabric kernels follow their
/// latest-finishing producer: a kernel that streams its input in T PL cycles
/// finishes at max(producer end, producer start + T) plus a drain tail (one
/// row for a bypassed reduction, a full second pass without bypass, nothing
/// for pointwise kernels).
inline SimReport simulate(const DesignPoint& d, const Graph& g, const HardwareProfile& p,
                          const SimOptions& opt = {}) {
  if (!d.realizable) throw ValidationError("cannot simulate an unrealizable design");
  const Assignment& assign = d.assignment;
  assign.validate(g);
  const std::size_t L = g.size();
  const int nb = d.schedule.n_batches;
  const std::size_t n_acc = std::size_t(assign.n_acc);
  if (opt.durations && opt.durations->size() != L)
    throw ValidationError("duration override must cover every layer");

  SimReport rep;
  const TimeBase tb = TimeBase::of(p);
  rep.time = tb;

  auto layouts = d.layouts();
  if (layouts.size() != n_acc) throw ValidationError("design has no configuration per accelerator");
  if (!opt.force_partition)
    for (auto& l : layouts)
      if (l) {
        l->part_a = l->a;
        l->part_b = l->b;
        l->part_c = l->c;
      }

  // Per-layer phase costs, identical for every batch.
  std::vector<std::int64_t> load(L, 0), copy(L, 0), compute(L, 0), store(L, 0);
  if (opt.durations) {
    compute = *opt.durations;
  } else {
    for (std::size_t i = 0; i < L; ++i)
      if (is_hmm(g[i].kind))
        compute[i] = layer_ticks(g[i], layouts[std::size_t(assign.acc_of[i])].value(), p, tb);
    for (const auto& e : d.edges) {
      if (e.kind == EdgeKind::Load) {
        load[g.index_of(e.consumer_layer)] += tb.transfer_ticks(e.bytes, p.offchip_bw_bytes_per_s);
      } else if (e.kind == EdgeKind::Store) {
        store[g.index_of(e.producer_layer)] += tb.transfer_ticks(e.bytes, p.offchip_bw_bytes_per_s);
      } else if (!edge_conflict_free(e, layouts)) {
        // One word per bank per PL cycle.
        std::int64_t banks = copy_banks(*layouts[std::size_t(e.producer_acc)],
                                        *layouts[std::size_t(e.consumer_acc)]);
        copy[g.index_of(e.consumer_layer)] +=
            ceil_div(e.bytes, banks * p.bank_word_bytes) * tb.ticks_per_pl_cycle;
      }
    }
  }

  const auto order = topo_order(g);
  std::vector<int> rank(L);
  for (std::size_t r = 0; r < order.size(); ++r) rank[g.index_of(order[r])] = int(r);
  const auto deps = g.dep_positions();
  const auto succ = g.successor_positions();

  std::vector<int> remaining(L * std::size_t(nb));
  std::vector<std::int64_t> t_start(L * std::size_t(nb), -1), t_end(L * std::size_t(nb), -1);
  for (int b = 0; b < nb; ++b)
    for (std::size_t i = 0; i < L; ++i) remaining[std::size_t(b) * L + i] = int(deps[i].size());

  rep.busy.assign(n_acc, 0);
  rep.acc_stalls.assign(n_acc, {});
  std::vector<std::int64_t> last_end(n_acc, 0);
  std::vector<bool> busy(n_acc, false);
  using Key = std::tuple<int, int, std::size_t>;
  std::vector<std::set<Key>> ready(n_acc);

  struct Pending {
    Event ev;
    std::size_t pos;
    bool operator>(const Pending& o) const {
      return std::tie(ev.time, ev.seq) > std::tie(o.ev.time, o.ev.seq);
    }
  };
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> q;
  std::uint64_t seq = 0;
  auto push = [&](std::int64_t t, EventKind k, int b, std::size_t pos) {
    q.push({{t, seq++, k, b, g[pos].id, assign.acc_of[pos]}, pos});
  };

  const bool modeled = !opt.durations.has_value();
  auto start_station = [&](int b, std::size_t pos, std::int64_t t) {
    const auto a = std::size_t(assign.acc_of[pos]);
    busy[a] = true;
    std::int64_t t0 = t;
    push(t, EventKind::AccStart, b, pos);
    if (load[pos] > 0) {
      push(t0, EventKind::XferStart, b, pos);
      t0 += load[pos];
      push(t0, EventKind::XferEnd, b, pos);
    }
    if (copy[pos] > 0) {
      push(t0, EventKind::BankBusy, b, pos);
      t0 += copy[pos];
      push(t0, EventKind::BankFree, b, pos);
    }
    t0 += compute[pos];
    if (store[pos] > 0) {
      push(t0, EventKind::XferStart, b, pos);
      t0 += store[pos];
      push(t0, EventKind::XferEnd, b, pos);
    }
    const std::size_t k = std::size_t(b) * L + pos;
    t_start[k] = t;
    t_end[k] = t0;
    rep.busy[a] += t0 - t;
    rep.acc_stalls[a].bank_conflict += copy[pos];
    rep.acc_stalls[a].dma_wait += load[pos] + store[pos];
    last_end[a] = std::max(last_end[a], t0);
    push(t0, EventKind::AccEnd, b, pos);
  };

  // Fabric kernel: streams behind its latest-finishing producer.
  auto start_follower = [&](int b, std::size_t pos, std::int64_t t) {
    const Layer& l = g[pos];
    const std::size_t k = std::size_t(b) * L + pos;
    std::int64_t s = t, end = t;
    if (!modeled) {
      end = t + compute[pos];
    } else {
      std::int64_t stream_from = t;
      if (!deps[pos].empty()) {
        std::size_t prod = deps[pos].front();
        for (std::size_t dp : deps[pos])
          if (t_end[std::size_t(b) * L + dp] > t_end[std::size_t(b) * L + prod]) prod = dp;
        stream_from = t_start[std::size_t(b) * L + prod];
      }
      // One lane group per output stream of the hosting accelerator.
      const auto& host = layouts[std::size_t(assign.acc_of[pos])];
      const std::int64_t lanes = p.hce_lanes * (host ? host->a * host->c : 1);
      const std::int64_t stream = nonlinear_latency(LayerKind::VectorAdd, l.m, l.n, lanes, false);
      const std::int64_t total = nonlinear_latency(l.kind, l.m, l.n, lanes, opt.bypass_nonlinear);
      const std::int64_t tpp = tb.ticks_per_pl_cycle;
      s = stream_from;
      end = std::max(t, stream_from + stream * tpp) + (total - stream) * tpp + load[pos] +
            copy[pos] + store[pos];
      const auto a = std::size_t(assign.acc_of[pos]);
      rep.acc_stalls[a].bank_conflict += copy[pos];
      rep.acc_stalls[a].dma_wait += load[pos] + store[pos];
    }
    t_start[k] = s;
    t_end[k] = end;
    push(t, EventKind::AccStart, b, pos);
    push(end, EventKind::AccEnd, b, pos);
  };

  auto make_ready = [&](int b, std::size_t pos, std::int64_t t) {
    if (is_hmm(g[pos].kind))
      ready[std::size_t(assign.acc_of[pos])].emplace(b, rank[pos], pos);
    else
      start_follower(b, pos, t);
  };

  for (int b = 0; b < nb; ++b)
    for (std::size_t i = 0; i < L; ++i)
      if (deps[i].empty()) make_ready(b, i, 0);

  std::size_t done = 0;
  std::int64_t t = 0;
  for (;;) {
    while (!q.empty() && q.top().ev.time <= t) {
      Pending pe = q.top();
      q.pop();
      if (opt.trace) rep.events.push_back(pe.ev);
      if (pe.ev.kind != EventKind::AccEnd) continue;
      ++done;
      const Layer& l = g[pe.pos];
      rep.entries.push_back({pe.ev.batch, l.id, pe.ev.acc,
                             t_start[std::size_t(pe.ev.batch) * L + pe.pos], pe.ev.time});
      if (is_hmm(l.kind)) busy[std::size_t(pe.ev.acc)] = false;
      for (std::size_t sp : succ[pe.pos])
        if (--remaining[std::size_t(pe.ev.batch) * L + sp] == 0) make_ready(pe.ev.batch, sp, t);
    }
    for (std::size_t a = 0; a < n_acc; ++a) {
      if (busy[a] || ready[a].empty()) continue;
      auto [b, r, pos] = *ready[a].begin();
      ready[a].erase(ready[a].begin());
      start_station(b, pos, t);
    }
    if (q.empty()) break;
    t = q.top().ev.time;
  }

  if (done != L * std::size_t(nb)) {
    std::string blocked;
    int listed = 0;
    for (int b = 0; b < nb && listed < 16; ++b)
      for (std::size_t i = 0; i < L && listed < 16; ++i)
        if (t_end[std::size_t(b) * L + i] < 0) {
          blocked += " (batch " + std::to_string(b) + ", layer " + std::to_string(g[i].id) + ")";
          ++listed;
        }
    throw DeadlockError("simulation deadlocked; blocked:" + blocked);
  }

  for (const auto& e : rep.entries) rep.makespan_ticks = std::max(rep.makespan_ticks, e.end);
  rep.makespan_s = tb.seconds(rep.makespan_ticks);
  rep.makespan_aie_cycles = ceil_div(rep.makespan_ticks, tb.ticks_per_aie_cycle);
  rep.makespan_pl_cycles = ceil_div(rep.makespan_ticks, tb.ticks_per_pl_cycle);
  rep.idle.resize(n_acc);
  rep.utilization.resize(n_acc);
  for (std::size_t a = 0; a < n_acc; ++a) {
    rep.idle[a] = rep.makespan_ticks - rep.busy[a];
    rep.utilization[a] =
        rep.makespan_ticks > 0 ? double(rep.busy[a]) / double(rep.makespan_ticks) : 0.0;
    auto& s = rep.acc_stalls[a];
    s.dep_wait = std::max<std::int64_t>(0, last_end[a] - rep.busy[a]);
    s.dma_wait = std::min(s.dma_wait, rep.makespan_ticks);
    s.bank_conflict = std::min(s.bank_conflict, rep.makespan_ticks);
    rep.stalls.bank_conflict = std::max(rep.stalls.bank_conflict, s.bank_conflict);
    rep.stalls.dep_wait = std::max(rep.stalls.dep_wait, s.dep_wait);
    rep.stalls.dma_wait = std::max(rep.stalls.dma_wait, s.dma_wait);
  }
  return rep;
}

/// |analytical - simulated| / simulated latency.
inline double cross_check(const DesignPoint& d, const Graph& g, const HardwareProfile& p,
                          const SimOptions& opt = {}) {
  SimReport r = simulate(d, g, p, opt);
  if (r.makespan_ticks == 0) return d.schedule.makespan == 0 ? 0.0 : 1.0;
  return std::abs(double(d.schedule.makespan) - double(r.makespan_ticks)) /
         double(r.makespan_ticks);
}

}  // namespace ssr
