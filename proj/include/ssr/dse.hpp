#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "ssr/acc_dse.hpp"
#include "ssr/error.hpp"
#include "ssr/hw_profile.hpp"
#include "ssr/model_graph.hpp"
#include "ssr/perf_model.hpp"
#include "ssr/scheduler.hpp"

namespace ssr {

enum class SearchMode { Sequential, Spatial, Hybrid };

inline std::string_view to_string(SearchMode m) {
  switch (m) {
    case SearchMode::Sequential: return "sequential";
    case SearchMode::Spatial: return "spatial";
    case SearchMode::Hybrid: return "hybrid";
  }
  return "?";
}
inline SearchMode search_mode_from_string(std::string_view s) {
  if (s == "sequential") return SearchMode::Sequential;
  if (s == "spatial") return SearchMode::Spatial;
  if (s == "hybrid") return SearchMode::Hybrid;
  throw ValidationError("unknown mode '" + std::string(s) + "'");
}

struct EaParams {
  int n_acc = 6;
  int n_bat = 1;
  int n_pop = 16;
  int n_child = 16;
  int n_iter = 50;
  std::uint64_t seed = 0;
  double lat_cons = std::numeric_limits<double>::infinity();  // seconds
  bool inter_acc_flag = true;
  int threads = 1;
  AccDseOptions dse;

  void validate() const {
    if (n_acc < 1) throw ValidationError("n_acc must be >= 1");
    if (n_bat < 1) throw ValidationError("n_bat must be >= 1");
    if (n_pop < 2) throw ValidationError("n_pop must be >= 2");
    if (n_child < 2 || n_child % 2 != 0) throw ValidationError("n_child must be even and >= 2");
    if (n_iter < 1) throw ValidationError("n_iter must be >= 1");
    if (threads < 1) throw ValidationError("threads must be >= 1");
  }
};

/// One evaluated design: the assignment, per-accelerator configurations and
/// the timed schedule they produce.
struct DesignPoint {
  Assignment assignment;
  std::vector<AccDesign> accs;
  HwPartition partition;
  Schedule schedule;
  std::vector<CommEdge> edges;
  std::vector<double> edge_overhead_s;
  double latency_s = 0;
  double throughput = 0;  // ops/s
  bool realizable = false;  // every accelerator found a configuration
  bool feasible = false;    // realizable and within the latency constraint
  std::string reason;
  std::int64_t evaluated = 0;
  std::string mode = "hybrid";

  bool operator==(const DesignPoint&) const = default;

  int n_acc() const { return assignment.n_acc; }
  int n_batches() const { return schedule.n_batches; }

  std::vector<AccLayout> layouts() const {
    std::vector<AccLayout> out;
    for (const auto& a : accs) out.push_back(a.has_hmm ? AccLayout(a.cfg) : std::nullopt);
    return out;
  }
};

/// Per-layer durations in ticks for a configured design: matrix cycles plus
/// every priced edge charged to the layer that waits on it (serialized copies
/// and loads to the consumer, stores to the producer).
inline std::vector<std::int64_t> design_durations(const Graph& g, const Assignment& assign,
                                                  std::span<const AccDesign> accs,
                                                  std::span<const CommEdge> edges,
                                                  const HardwareProfile& p, const TimeBase& tb) {
  std::vector<std::int64_t> dur(g.size(), 0);
  std::vector<AccLayout> layouts;
  for (const auto& a : accs) layouts.push_back(a.has_hmm ? AccLayout(a.cfg) : std::nullopt);
  for (std::size_t i = 0; i < g.size(); ++i)
    if (is_hmm(g[i].kind)) dur[i] = layer_ticks(g[i], accs[std::size_t(assign.acc_of[i])].cfg, p, tb);
  for (const auto& e : edges) {
    std::int64_t t = edge_overhead_ticks(e, layouts, p, tb);
    int owner = e.kind == EdgeKind::Store ? e.producer_layer : e.consumer_layer;
    dur[g.index_of(owner)] += t;
  }
  return dur;
}

/// One candidate's full evaluation: greedy schedule -> memory plan ->
/// resource partition -> per-accelerator customization -> timed schedule.
inline DesignPoint ssr_dse(const Assignment& assign, const Graph& g, const HardwareProfile& p,
                           const EaParams& params) {
  assign.validate(g);
  DesignPoint dp;
  dp.assignment = assign;
  const TimeBase tb = TimeBase::of(p);

  // Provisional pass: MAC counts as durations fix the search order.
  std::vector<std::int64_t> provisional(g.size(), 0);
  for (std::size_t i = 0; i < g.size(); ++i) provisional[i] = macs(g[i]);
  auto first = layer_acc_schedule(assign, g, params.n_bat, provisional);
  auto mem = mem_allocation(first.edges, g, assign, p);
  try {
    dp.partition = hw_partition(mem, first.schedule, g, assign, p);
  } catch (const InfeasibleError& e) {
    dp.reason = e.what();
    dp.schedule = first.schedule;
    dp.schedule.time = tb;
    dp.edges = first.edges;
    return dp;
  }
  auto acc = acc_dse(dp.partition, mem, first.schedule, assign, first.edges,
                     params.inter_acc_flag, g, p, params.dse);
  dp.accs = acc.accs;
  dp.edges = acc.edges;
  dp.edge_overhead_s = acc.edge_overhead_s;
  dp.evaluated = acc.evaluated;
  if (!acc.feasible) {
    dp.reason = acc.reason;
    dp.schedule = first.schedule;
    dp.schedule.time = tb;
    return dp;
  }
  auto dur = design_durations(g, assign, dp.accs, dp.edges, p, tb);
  dp.schedule = layer_acc_schedule(assign, g, params.n_bat, dur, tb).schedule;
  auto ev = evaluate(dp.schedule, g);
  dp.latency_s = ev.latency_s;
  dp.throughput = ev.throughput;
  dp.realizable = true;
  dp.feasible = dp.latency_s <= params.lat_cons;
  if (!dp.feasible) dp.reason = "latency constraint violated";
  return dp;
}

inline Assignment sequential_assignment(const Graph& g) {
  return Assignment(std::vector<int>(g.size(), 0), 1);
}

/// Matrix layers cycle through `pattern` by their ordinal (pattern[o mod P]);
/// each fabric-side layer rides on the accelerator of its first dependency.
inline Assignment hmm_pattern_assignment(const Graph& g, const std::vector<int>& pattern) {
  if (pattern.empty()) throw ValidationError("empty accelerator pattern");
  std::vector<int> acc(g.size(), 0);
  const auto order = topo_order(g);
  std::vector<std::int64_t> ordinal(g.size(), -1);
  std::int64_t o = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (is_hmm(g[i].kind)) ordinal[i] = o++;
  for (int id : order) {
    std::size_t i = g.index_of(id);
    if (is_hmm(g[i].kind))
      acc[i] = pattern[std::size_t(ordinal[i] % std::int64_t(pattern.size()))];
    else if (!g[i].deps.empty())
      acc[i] = acc[g.index_of(g[i].deps.front())];
  }
  int n = *std::max_element(pattern.begin(), pattern.end()) + 1;
  return Assignment(std::move(acc), n).normalized();
}

/// One accelerator per matrix layer, modulo n_acc.
inline Assignment spatial_assignment(const Graph& g, int n_acc) {
  std::vector<int> pattern(static_cast<std::size_t>(n_acc));
  for (int i = 0; i < n_acc; ++i) pattern[std::size_t(i)] = i;
  return hmm_pattern_assignment(g, pattern);
}

/// Non-dominated designs under (min latency, max throughput), by latency.
inline std::vector<DesignPoint> pareto_front(const std::vector<DesignPoint>& archive) {
  std::vector<const DesignPoint*> pts;
  for (const auto& d : archive)
    if (d.realizable) pts.push_back(&d);
  std::stable_sort(pts.begin(), pts.end(), [](const DesignPoint* x, const DesignPoint* y) {
    if (x->latency_s != y->latency_s) return x->latency_s < y->latency_s;
    return x->throughput > y->throughput;
  });
  std::vector<DesignPoint> front;
  double best_thr = -1;
  for (const auto* d : pts) {
    if (d->throughput > best_thr) {
      front.push_back(*d);
      best_thr = d->throughput;
    }
  }
  return front;
}

inline bool dominates(const DesignPoint& x, const DesignPoint& y) {
  return x.latency_s <= y.latency_s && x.throughput >= y.throughput &&
         (x.latency_s < y.latency_s || x.throughput > y.throughput);
}

/// Highest throughput among realizable archive points with latency <= limit.
inline std::optional<DesignPoint> best_under(const std::vector<DesignPoint>& archive,
                                             double latency_limit_s) {
  const DesignPoint* best = nullptr;
  for (const auto& d : archive)
    if (d.realizable && d.latency_s <= latency_limit_s &&
        (!best || d.throughput > best->throughput))
      best = &d;
  if (!best) return std::nullopt;
  return *best;
}

struct SearchResult {
  std::optional<DesignPoint> best;  // nullopt: no solution under the constraint
  std::vector<DesignPoint> archive;
  int generations = 0;
};

namespace detail {

template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t workers = std::min<std::size_t>(std::size_t(threads), n);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) f(i);
    });
  for (auto& t : pool) t.join();
}

inline double fitness(const DesignPoint& d) { return d.feasible ? d.throughput : 0.0; }

}  // namespace detail

/// Evolutionary Layer->Acc search. The initial population holds the
/// sequential and spatial assignments plus random ones; each generation
/// breeds n_child children by fitness-proportional selection and single-point
/// crossover, mutates each child by exchanging the accelerators of two
/// layers, and keeps the n_pop fittest of parents and children. Fitness is
/// throughput, zero for designs that violate the latency constraint.
inline SearchResult ea_search(const Graph& g, const HardwareProfile& p, const EaParams& params,
                              const std::vector<Assignment>& extra_seeds = {}) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  const std::size_t L = g.size();
  SearchResult res;

  std::map<std::vector<int>, std::size_t> cache;  // normalized acc_of -> archive index
  auto evaluate_all = [&](std::vector<Assignment>& cands) {
    std::vector<std::size_t> idx(cands.size());
    std::vector<Assignment> fresh;
    std::map<std::vector<int>, std::size_t> pending;
    for (auto& c : cands) {
      c = c.normalized();
      if (!cache.count(c.acc_of) && !pending.count(c.acc_of)) {
        pending.emplace(c.acc_of, fresh.size());
        fresh.push_back(c);
      }
    }
    std::vector<DesignPoint> pts(fresh.size());
    detail::parallel_for(fresh.size(), params.threads,
                         [&](std::size_t i) { pts[i] = ssr_dse(fresh[i], g, p, params); });
    for (auto& d : pts) {
      cache.emplace(d.assignment.acc_of, res.archive.size());
      res.archive.push_back(std::move(d));
    }
    for (std::size_t i = 0; i < cands.size(); ++i) idx[i] = cache.at(cands[i].acc_of);
    return idx;
  };
  auto consider = [&](std::size_t ai) {
    const DesignPoint& d = res.archive[ai];
    if (d.feasible && (!res.best || d.throughput > res.best->throughput)) res.best = d;
  };

  std::vector<Assignment> pop;
  pop.push_back(sequential_assignment(g));
  if (params.n_acc > 1 && L > 0) pop.push_back(spatial_assignment(g, params.n_acc));
  for (const auto& s : extra_seeds)
    if (int(pop.size()) < params.n_pop) pop.push_back(s);
  std::uniform_int_distribution<int> acc_dist(0, params.n_acc - 1);
  while (int(pop.size()) < params.n_pop) {
    std::vector<int> a(L);
    for (auto& x : a) x = acc_dist(rng);
    pop.emplace_back(std::move(a), params.n_acc);
  }
  auto pop_idx = evaluate_all(pop);
  for (auto i : pop_idx) consider(i);

  for (int it = 0; it < params.n_iter; ++it) {
    // Roulette over fitness; uniform while nothing is feasible.
    std::vector<double> weights;
    for (auto i : pop_idx) weights.push_back(detail::fitness(res.archive[i]));
    if (std::all_of(weights.begin(), weights.end(), [](double w) { return w <= 0; }))
      std::fill(weights.begin(), weights.end(), 1.0);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    auto select = [&]() -> const Assignment& { return pop[pick(rng)]; };
    std::vector<Assignment> kids;
    for (int k = 0; k < params.n_child / 2; ++k) {
      std::vector<int> p1 = select().acc_of, p2 = select().acc_of;
      p1.resize(L, 0);
      p2.resize(L, 0);
      if (L >= 2) {
        std::size_t cut = std::uniform_int_distribution<std::size_t>(1, L - 1)(rng);
        for (std::size_t i = cut; i < L; ++i) std::swap(p1[i], p2[i]);
      }
      kids.emplace_back(std::move(p1), params.n_acc);
      kids.emplace_back(std::move(p2), params.n_acc);
    }
    if (L >= 2) {
      std::uniform_int_distribution<std::size_t> layer(0, L - 1);
      for (auto& kid : kids) {
        std::size_t i = layer(rng), j = layer(rng);
        std::swap(kid.acc_of[i], kid.acc_of[j]);
      }
    }
    auto kid_idx = evaluate_all(kids);
    for (auto i : kid_idx) consider(i);

    // Elitist truncation over parents followed by children.
    std::vector<std::pair<Assignment, std::size_t>> all;
    for (std::size_t i = 0; i < pop.size(); ++i) all.emplace_back(pop[i], pop_idx[i]);
    for (std::size_t i = 0; i < kids.size(); ++i) all.emplace_back(kids[i], kid_idx[i]);
    std::stable_sort(all.begin(), all.end(), [&](const auto& x, const auto& y) {
      return detail::fitness(res.archive[x.second]) > detail::fitness(res.archive[y.second]);
    });
    all.resize(std::size_t(params.n_pop));
    pop.clear();
    pop_idx.clear();
    for (auto& [a, i] : all) {
      pop.push_back(std::move(a));
      pop_idx.push_back(i);
    }
    res.generations = it + 1;
  }
  return res;
}

/// Sequential and spatial modes evaluate their single assignment; hybrid
/// runs the evolutionary search.
inline SearchResult run_search(const Graph& g, const HardwareProfile& p, const EaParams& params,
                               SearchMode mode) {
  params.validate();
  if (mode == SearchMode::Hybrid) {
    auto r = ea_search(g, p, params);
    for (auto& d : r.archive) d.mode = "hybrid";
    if (r.best) r.best->mode = "hybrid";
    return r;
  }
  Assignment a = mode == SearchMode::Sequential ? sequential_assignment(g)
                                                : spatial_assignment(g, params.n_acc);
  SearchResult r;
  DesignPoint d = ssr_dse(a, g, p, params);
  d.mode = std::string(to_string(mode));
  if (d.feasible) r.best = d;
  r.archive.push_back(std::move(d));
  return r;
}

}  // namespace ssr
