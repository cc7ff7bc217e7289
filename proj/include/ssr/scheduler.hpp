#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ssr/error.hpp"
#include "ssr/hw_profile.hpp"
#include "ssr/model_graph.hpp"
#include "ssr/perf_model.hpp"

namespace ssr {

/// Layer -> accelerator map, indexed by layer position in the graph.
struct Assignment {
  std::vector<int> acc_of;
  int n_acc = 0;

  Assignment() = default;
  explicit Assignment(std::vector<int> accs) : acc_of(std::move(accs)) {
    for (int a : acc_of) n_acc = std::max(n_acc, a + 1);
  }
  Assignment(std::vector<int> accs, int n) : acc_of(std::move(accs)), n_acc(n) {}

  bool operator==(const Assignment&) const = default;
  auto operator<=>(const Assignment&) const = default;

  void validate(const Graph& g) const {
    if (acc_of.size() != g.size())
      throw ValidationError("assignment covers " + std::to_string(acc_of.size()) +
                            " layers, graph has " + std::to_string(g.size()));
    for (std::size_t i = 0; i < acc_of.size(); ++i)
      if (acc_of[i] < 0 || acc_of[i] >= n_acc)
        throw ValidationError("layer " + std::to_string(g[i].id) +
                              " mapped to accelerator out of range");
  }

  // Accelerators renumbered by first use in layer order; unused ids dropped.
  Assignment normalized() const {
    std::vector<int> remap(std::size_t(std::max(n_acc, 0)), -1);
    std::vector<int> out(acc_of.size());
    int next = 0;
    for (std::size_t i = 0; i < acc_of.size(); ++i) {
      int& r = remap[std::size_t(acc_of[i])];
      if (r < 0) r = next++;
      out[i] = r;
    }
    return Assignment(std::move(out), next);
  }

  std::vector<std::vector<std::size_t>> layers_per_acc() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(n_acc));
    for (std::size_t i = 0; i < acc_of.size(); ++i) out[std::size_t(acc_of[i])].push_back(i);
    return out;
  }
};

struct ScheduleEntry {
  int batch = 0;
  int layer = 0;  // layer id
  int acc = 0;
  std::int64_t start = 0;
  std::int64_t end = 0;

  bool operator==(const ScheduleEntry&) const = default;
};

/// Timed placement of every (batch, layer) execution, in ticks of `time`.
struct Schedule {
  std::vector<ScheduleEntry> entries;
  std::int64_t makespan = 0;
  std::vector<std::int64_t> acc_busy;
  int n_batches = 1;
  TimeBase time = TimeBase::unit();

  bool operator==(const Schedule&) const = default;

  double makespan_seconds() const { return time.seconds(makespan); }
};

struct ScheduleResult {
  Schedule schedule;
  std::vector<CommEdge> edges;
};

/// Cross-accelerator dependencies plus DDR loads for source layers and
/// stores for sink layers, in layer order.
inline std::vector<CommEdge> extract_edges(const Assignment& assign, const Graph& g) {
  std::vector<CommEdge> edges;
  auto succ = g.successor_positions();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Layer& l = g[i];
    int acc = assign.acc_of[i];
    if (l.deps.empty())
      edges.push_back({-1, l.id, -1, acc, input_bytes(l), EdgeKind::Load, {}, {}});
    for (int d : l.deps) {
      std::size_t dp = g.index_of(d);
      if (assign.acc_of[dp] != acc)
        edges.push_back({d, l.id, assign.acc_of[dp], acc, output_bytes(g[dp]),
                         EdgeKind::Internal, {}, {}});
    }
    if (succ[i].empty())
      edges.push_back({l.id, -1, acc, -1, output_bytes(l), EdgeKind::Store, {}, {}});
  }
  return edges;
}

/// Event-driven greedy list scheduling of `n_batches` independent copies of
/// the graph. A matrix layer occupies its accelerator exclusively and starts
/// as soon as the accelerator is idle and its dependencies have finished;
/// among ready layers the smallest (batch, topological position) wins.
/// Fabric-side layers stream alongside the matrix unit and only wait for
/// their dependencies. `durations` is indexed by layer position.
inline ScheduleResult layer_acc_schedule(const Assignment& assign, const Graph& g,
                                         int n_batches,
                                         std::span<const std::int64_t> durations,
                                         TimeBase time = TimeBase::unit()) {
  assign.validate(g);
  if (n_batches < 1) throw ValidationError("n_batches must be >= 1");
  if (durations.size() != g.size())
    throw ValidationError("durations must cover every layer");

  const std::size_t L = g.size();
  const auto order = topo_order(g);
  std::vector<int> rank(L);
  for (std::size_t r = 0; r < order.size(); ++r) rank[g.index_of(order[r])] = int(r);
  const auto deps = g.dep_positions();
  const auto succ = g.successor_positions();

  ScheduleResult res;
  Schedule& s = res.schedule;
  s.n_batches = n_batches;
  s.time = time;
  s.acc_busy.assign(std::size_t(assign.n_acc), 0);
  s.entries.reserve(L * std::size_t(n_batches));

  using Key = std::tuple<int, int, std::size_t>;  // (batch, rank, pos)
  std::vector<std::set<Key>> ready(std::size_t(assign.n_acc));
  std::vector<bool> busy(std::size_t(assign.n_acc), false);
  std::vector<int> remaining(L * std::size_t(n_batches));
  for (int b = 0; b < n_batches; ++b)
    for (std::size_t i = 0; i < L; ++i)
      remaining[std::size_t(b) * L + i] = int(deps[i].size());

  struct Done {
    std::int64_t time;
    std::uint64_t seq;
    int batch;
    std::size_t pos;
    bool operator>(const Done& o) const { return std::tie(time, seq) > std::tie(o.time, o.seq); }
  };
  std::priority_queue<Done, std::vector<Done>, std::greater<>> events;
  std::uint64_t seq = 0;

  auto start = [&](int b, std::size_t pos, std::int64_t t) {
    std::int64_t end = t + durations[pos];
    int acc = assign.acc_of[pos];
    s.entries.push_back({b, g[pos].id, acc, t, end});
    if (is_hmm(g[pos].kind)) {
      busy[std::size_t(acc)] = true;
      s.acc_busy[std::size_t(acc)] += durations[pos];
    }
    events.push({end, seq++, b, pos});
  };
  auto make_ready = [&](int b, std::size_t pos, std::int64_t t) {
    if (is_hmm(g[pos].kind))
      ready[std::size_t(assign.acc_of[pos])].emplace(b, rank[pos], pos);
    else
      start(b, pos, t);
  };

  for (int b = 0; b < n_batches; ++b)
    for (std::size_t i = 0; i < L; ++i)
      if (deps[i].empty()) make_ready(b, i, 0);

  std::int64_t t = 0;
  for (;;) {
    while (!events.empty() && events.top().time == t) {
      Done d = events.top();
      events.pop();
      if (is_hmm(g[d.pos].kind)) busy[std::size_t(assign.acc_of[d.pos])] = false;
      for (std::size_t sp : succ[d.pos])
        if (--remaining[std::size_t(d.batch) * L + sp] == 0) make_ready(d.batch, sp, t);
    }
    for (std::size_t a = 0; a < ready.size(); ++a) {
      if (busy[a] || ready[a].empty()) continue;
      auto [b, r, pos] = *ready[a].begin();
      ready[a].erase(ready[a].begin());
      start(b, pos, t);
    }
    if (events.empty()) break;
    t = events.top().time;
  }
  for (const auto& q : ready)
    if (!q.empty()) throw CycleError("schedule stalled with ready layers left");
  if (s.entries.size() != L * std::size_t(n_batches))
    throw CycleError("schedule stalled: dependency never resolved");

  for (const auto& e : s.entries) s.makespan = std::max(s.makespan, e.end);
  res.edges = extract_edges(assign, g);
  return res;
}

/// On-chip memory demand of one accelerator.
struct AccMemory {
  std::int64_t weight_bytes = 0;
  std::int64_t activation_bytes = 0;
  std::int64_t ram_banks_min = 0;
  bool operator==(const AccMemory&) const = default;
};

struct MemPlan {
  std::vector<AccMemory> accs;
  bool operator==(const MemPlan&) const = default;
};

/// Weights of every assigned layer stay resident; activations are
/// double-buffered for the largest layer working set (input + output).
inline MemPlan mem_allocation(std::span<const CommEdge> edges, const Graph& g,
                              const Assignment& assign, const HardwareProfile& p) {
  (void)edges;  // working sets already include forwarded inputs
  MemPlan plan;
  plan.accs.resize(std::size_t(assign.n_acc));
  std::vector<std::int64_t> working(std::size_t(assign.n_acc), 0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto& m = plan.accs[std::size_t(assign.acc_of[i])];
    m.weight_bytes += weight_bytes(g[i]) * p.bytes_per_elem;
    auto& w = working[std::size_t(assign.acc_of[i])];
    w = std::max(w, (input_bytes(g[i]) + output_bytes(g[i])) * p.bytes_per_elem);
  }
  for (std::size_t a = 0; a < plan.accs.size(); ++a) {
    auto& m = plan.accs[a];
    m.activation_bytes = 2 * working[a];
    m.ram_banks_min = ceil_div(m.weight_bytes + m.activation_bytes, p.bank_bytes);
  }
  return plan;
}

/// Splits `total` proportionally to `weights` (largest remainder) after
/// granting each entry its minimum. Returns nullopt when the minima alone
/// exceed the total.
inline std::optional<std::vector<std::int64_t>> apportion(std::int64_t total,
                                                          std::span<const double> weights,
                                                          std::span<const std::int64_t> mins) {
  const std::size_t n = weights.size();
  std::vector<std::int64_t> out(mins.begin(), mins.end());
  std::int64_t used = std::accumulate(out.begin(), out.end(), std::int64_t{0});
  if (used > total) return std::nullopt;
  double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (n == 0 || wsum <= 0) return out;

  // Ideal shares ignoring minima, then lift entries below their minimum and
  // re-share what is left among the rest.
  std::vector<bool> pinned(n, false);
  for (;;) {
    double free_w = 0;
    std::int64_t free_total = total;
    for (std::size_t i = 0; i < n; ++i) {
      if (pinned[i]) free_total -= mins[i];
      else free_w += weights[i];
    }
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (pinned[i]) continue;
      double share = free_w > 0 ? double(free_total) * weights[i] / free_w : 0;
      if (share < double(mins[i])) {
        pinned[i] = true;
        changed = true;
      }
    }
    if (changed) continue;

    std::vector<std::pair<double, std::size_t>> rem;
    std::int64_t given = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (pinned[i]) {
        out[i] = mins[i];
        continue;
      }
      double share = free_w > 0 ? double(free_total) * weights[i] / free_w : 0;
      out[i] = std::int64_t(std::floor(share));
      given += out[i];
      rem.emplace_back(share - double(out[i]), i);
    }
    std::int64_t left = free_total - given;
    std::stable_sort(rem.begin(), rem.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    for (std::size_t j = 0; j < rem.size() && left > 0; ++j, --left) ++out[rem[j].second];
    return out;
  }
}

/// Per-accelerator resource budgets.
struct HwPartition {
  std::vector<Utilization> budgets;
  bool operator==(const HwPartition&) const = default;
};

inline HmmType required_hmm_type(const Graph& g, std::span<const std::size_t> layers) {
  for (std::size_t i : layers)
    if (g[i].activation_inputs == 2) return HmmType::Type1;
  return HmmType::Type0;
}

inline std::set<LayerKind> fused_kinds(const Graph& g, std::span<const std::size_t> layers) {
  std::set<LayerKind> kinds;
  for (std::size_t i : layers) kinds.insert(g[i].kind);
  return kinds;
}

/// AIE and PLIO proportional to assigned MACs (at least one AIE per
/// accelerator with matrix work), RAM from the memory plan plus a MAC-share
/// of the slack, DSP from the fused fabric kernels plus a share of the slack.
inline HwPartition hw_partition(const MemPlan& mem, const Schedule& sched, const Graph& g,
                                const Assignment& assign, const HardwareProfile& p) {
  (void)sched;
  const std::size_t n = std::size_t(assign.n_acc);
  auto per_acc = assign.layers_per_acc();
  std::vector<double> mac_w(n, 0.0), dsp_w(n, 0.0);
  std::vector<std::int64_t> aie_min(n, 0), plio_min(n, 0), ram_min(n, 0), dsp_min(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    std::int64_t m = 0;
    for (std::size_t i : per_acc[a]) m += macs(g[i]);
    mac_w[a] = double(m);
    if (m > 0) {
      aie_min[a] = 1;
      plio_min[a] = required_hmm_type(g, per_acc[a]) == HmmType::Type1 ? 3 : 2;
    }
    ram_min[a] = mem.accs[a].ram_banks_min;
    dsp_min[a] = dsp_need(fused_kinds(g, per_acc[a]), p);
    dsp_w[a] = double(dsp_min[a]);
  }
  double mac_sum = std::accumulate(mac_w.begin(), mac_w.end(), 0.0);
  std::vector<double> ram_w = mac_w;
  if (mac_sum <= 0) ram_w.assign(n, 1.0);
  if (std::accumulate(dsp_w.begin(), dsp_w.end(), 0.0) <= 0) dsp_w = ram_w;

  auto aie = apportion(p.aie_total, mac_w, aie_min);
  auto plio = apportion(p.plio_budget, mac_w, plio_min);
  auto ram = apportion(p.ram_banks_total(), ram_w, ram_min);
  auto dsp = apportion(p.dsp_total, dsp_w, dsp_min);
  if (!aie) throw InfeasibleError("more matrix accelerators than AIEs");
  if (!plio) throw InfeasibleError("PLIO budget below per-accelerator minimum");
  if (!ram) throw InfeasibleError("minimum RAM allocation exceeds device RAM");
  if (!dsp) throw InfeasibleError("fused nonlinear kernels exceed device DSPs");

  HwPartition hp;
  hp.budgets.resize(n);
  for (std::size_t a = 0; a < n; ++a)
    hp.budgets[a] = {(*aie)[a], (*plio)[a], (*ram)[a], (*dsp)[a]};
  return hp;
}

struct Evaluation {
  double latency_s = 0;
  double throughput = 0;  // ops/s
};

/// latency = makespan in seconds; throughput = batches * graph ops / latency.
inline Evaluation evaluate(const Schedule& sched, const Graph& g) {
  Evaluation ev;
  ev.latency_s = sched.makespan_seconds();
  double ops = 2.0 * double(total_macs(g)) * double(sched.n_batches);
  ev.throughput = ev.latency_s > 0 ? ops / ev.latency_s : 0.0;
  return ev;
}

}  // namespace ssr
