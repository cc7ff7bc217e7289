#pragma once

// Independent reference implementations used by the tests.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "ssr/ssr.hpp"

namespace oracle {

// Time-stepped replay of greedy list scheduling with integer durations:
// at every tick, finished work is retired, then each idle accelerator takes
// its smallest ready (batch, topo position). Fabric kinds run unexclusively.
inline std::int64_t stepped_makespan(const ssr::Graph& g, const ssr::Assignment& a, int nb,
                                     const std::vector<std::int64_t>& dur) {
  const std::size_t L = g.size();
  auto order = ssr::topo_order(g);
  std::vector<std::size_t> pos_of_rank;
  for (int id : order) pos_of_rank.push_back(g.index_of(id));
  std::vector<std::int64_t> end(L * nb, -1);
  std::vector<bool> started(L * nb, false);
  std::vector<std::int64_t> acc_free(std::size_t(a.n_acc), 0);
  std::size_t done = 0;
  std::int64_t mk = 0;
  for (std::int64_t t = 0; done < L * std::size_t(nb); ++t) {
    bool progress = true;
    while (progress) {
      progress = false;
      for (int b = 0; b < nb; ++b)
        for (std::size_t p : pos_of_rank) {
          std::size_t k = std::size_t(b) * L + p;
          if (started[k]) continue;
          bool ok = true;
          for (int d : g[p].deps) {
            std::int64_t e = end[std::size_t(b) * L + g.index_of(d)];
            if (e < 0 || e > t) ok = false;
          }
          if (!ok) continue;
          if (ssr::is_hmm(g[p].kind)) continue;
          started[k] = true;
          end[k] = t + dur[p];
          mk = std::max(mk, end[k]);
          ++done;
          progress = true;
        }
    }
    for (int acc = 0; acc < a.n_acc; ++acc) {
      if (acc_free[std::size_t(acc)] > t) continue;
      bool taken = false;
      for (int b = 0; b < nb && !taken; ++b)
        for (std::size_t p : pos_of_rank) {
          std::size_t k = std::size_t(b) * L + p;
          if (started[k] || a.acc_of[p] != acc || !ssr::is_hmm(g[p].kind)) continue;
          bool ok = true;
          for (int d : g[p].deps) {
            std::int64_t e = end[std::size_t(b) * L + g.index_of(d)];
            if (e < 0 || e > t) ok = false;
          }
          if (!ok) continue;
          started[k] = true;
          end[k] = t + dur[p];
          acc_free[std::size_t(acc)] = end[k];
          mk = std::max(mk, end[k]);
          ++done;
          taken = true;
          break;
        }
    }
    if (t > 1'000'000) return -1;
  }
  return mk;
}

// Enumerates every map of n layers onto at most k accelerators.
inline void for_each_assignment(std::size_t n, int k,
                                const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> acc(n, 0);
  for (;;) {
    f(acc);
    std::size_t i = 0;
    while (i < n && ++acc[i] == k) acc[i++] = 0;
    if (i == n) return;
  }
}

// Cycles of an m x k x n GEMM by walking the tile grid.
inline double tiled_cycles(std::int64_t m, std::int64_t k, std::int64_t n,
                           const ssr::AccConfig& c, const ssr::HardwareProfile& p) {
  std::int64_t steps = 0;
  for (std::int64_t i = 0; i < m; i += c.h1 * c.a)
    for (std::int64_t j = 0; j < k; j += c.w1 * c.b)
      for (std::int64_t l = 0; l < n; l += c.w2 * c.c) ++steps;
  return double(steps) * double(c.h1 * c.w1 * c.w2) /
         (double(p.mac_per_aie_per_cycle) * p.eff);
}

// Random DAG of matrix layers; each layer depends on up to two earlier ones.
inline ssr::Graph random_mm_graph(std::mt19937_64& rng, int n_layers, bool pow2_dims) {
  std::vector<ssr::Layer> ls;
  auto dim = [&](int lo_exp, int hi_exp) -> std::int64_t {
    if (pow2_dims) return std::int64_t(1) << std::uniform_int_distribution<int>(lo_exp, hi_exp)(rng);
    return std::uniform_int_distribution<std::int64_t>(1 << lo_exp, 1 << hi_exp)(rng);
  };
  for (int i = 0; i < n_layers; ++i) {
    ssr::Layer l;
    l.id = i;
    l.kind = ssr::LayerKind::MatMul;
    l.m = dim(4, 7);
    l.k = dim(4, 7);
    l.n = dim(4, 7);
    l.name = "mm" + std::to_string(i);
    if (i > 0) {
      l.deps.push_back(std::uniform_int_distribution<int>(0, i - 1)(rng));
      if (i > 1 && std::bernoulli_distribution(0.3)(rng)) {
        int d = std::uniform_int_distribution<int>(0, i - 1)(rng);
        if (d != l.deps[0]) l.deps.push_back(d);
      }
    }
    ls.push_back(l);
  }
  return ssr::Graph(ls);
}

}  // namespace oracle

namespace oracle {

// Design with hand-picked configurations, timed by the analytical model.
inline ssr::DesignPoint make_design(const ssr::Graph& g, const ssr::Assignment& a,
                                    const std::vector<ssr::AccConfig>& cfgs, int nb,
                                    const ssr::HardwareProfile& p, bool with_edges = true) {
  using namespace ssr;
  DesignPoint d;
  d.assignment = a;
  d.realizable = d.feasible = true;
  auto per_acc = a.layers_per_acc();
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    AccDesign ad;
    ad.cfg = cfgs[i];
    ad.kinds = fused_kinds(g, per_acc[i]);
    for (std::size_t l : per_acc[i]) ad.has_hmm = ad.has_hmm || is_hmm(g[l].kind);
    ad.util = utilization(ad.cfg, ad.kinds, p);
    d.accs.push_back(ad);
  }
  if (with_edges) d.edges = extract_edges(a, g);
  d.edge_overhead_s = comm_overhead(d.edges, d.layouts(), p);
  TimeBase tb = TimeBase::of(p);
  auto dur = design_durations(g, a, d.accs, d.edges, p, tb);
  d.schedule = layer_acc_schedule(a, g, nb, dur, tb).schedule;
  auto ev = evaluate(d.schedule, g);
  d.latency_s = ev.latency_s;
  d.throughput = ev.throughput;
  return d;
}

}  // namespace oracle
