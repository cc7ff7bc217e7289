#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ssr/hw_profile.hpp"
#include "ssr/model_graph.hpp"
#include "ssr/perf_model.hpp"
#include "ssr/scheduler.hpp"

namespace ssr {

struct AccDseOptions {
  // Largest single-AIE tile edge considered.
  std::int64_t tile_cap = 256;
  // Smallest tile edge considered (clamped to the layer dimension).
  std::int64_t tile_min = 8;
  // Candidates scored per accelerator before the search stops; 0 = no limit.
  std::int64_t max_evaluations_per_acc = 0;
};

/// Chosen design of one accelerator.
struct AccDesign {
  bool has_hmm = false;
  AccConfig cfg;
  std::set<LayerKind> kinds;
  Utilization util;
  double cycles_per_batch = 0;  // sum of layer_cycles over assigned layers
  std::int64_t evaluated = 0;

  bool operator==(const AccDesign&) const = default;
};

struct AccDseResult {
  bool feasible = true;
  std::string reason;
  std::vector<AccDesign> accs;
  std::vector<int> search_order;
  std::vector<CommEdge> edges;  // patterns filled in
  std::vector<double> edge_overhead_s;
  std::int64_t evaluated = 0;

  std::vector<AccLayout> layouts() const {
    std::vector<AccLayout> out;
    out.reserve(accs.size());
    for (const auto& a : accs) out.push_back(a.has_hmm ? AccLayout(a.cfg) : std::nullopt);
    return out;
  }
};

/// Accelerators in order of their first scheduled execution.
inline std::vector<int> trace_assignment(const Schedule& sched, int n_acc) {
  std::vector<std::int64_t> first(std::size_t(n_acc), std::numeric_limits<std::int64_t>::max());
  std::vector<std::size_t> seen(std::size_t(n_acc), std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < sched.entries.size(); ++i) {
    const auto& e = sched.entries[i];
    auto a = std::size_t(e.acc);
    if (e.start < first[a] || (e.start == first[a] && i < seen[a])) {
      first[a] = e.start;
      seen[a] = i;
    }
  }
  std::vector<int> order;
  for (int a = 0; a < n_acc; ++a)
    if (seen[std::size_t(a)] != std::numeric_limits<std::size_t>::max()) order.push_back(a);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return std::tie(first[std::size_t(x)], seen[std::size_t(x)]) <
           std::tie(first[std::size_t(y)], seen[std::size_t(y)]);
  });
  return order;
}

/// Candidate tile edges for a dimension: powers of two and divisors of the
/// dimension inside [min(tile_min, dim), min(tile_cap, next_pow2(dim))].
inline std::vector<std::int64_t> tile_candidates(std::int64_t dim, std::int64_t tile_cap,
                                                 std::int64_t tile_min) {
  std::int64_t pow2 = 1;
  while (pow2 < dim) pow2 *= 2;
  std::int64_t hi = std::min(tile_cap, pow2);
  std::int64_t lo = std::min(tile_min, dim);
  std::set<std::int64_t> out;
  for (std::int64_t v = 1; v <= hi; v *= 2)
    if (v >= lo) out.insert(v);
  for (std::int64_t d = lo; d <= std::min(hi, dim); ++d)
    if (dim % d == 0) out.insert(d);
  return {out.begin(), out.end()};
}

namespace detail {

struct Shape {
  std::int64_t m, k, n;
  std::int64_t weight;  // count * heads
  bool pinned;          // carries resident weights under Type0
  std::int64_t count;
};

inline std::vector<Shape> collect_shapes(const Graph& g, std::span<const std::size_t> layers) {
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t, int, bool>, std::int64_t> m;
  for (std::size_t i : layers) {
    const Layer& l = g[i];
    if (!is_hmm(l.kind)) continue;
    ++m[{l.m, l.k, l.n, l.heads, weight_bytes(l) > 0}];
  }
  std::vector<Shape> out;
  for (auto& [key, cnt] : m) {
    auto [mm, kk, nn, heads, pinned] = key;
    out.push_back({mm, kk, nn, cnt * heads, pinned, cnt});
  }
  return out;
}

// A fixed neighbour whose layout constrains the accelerator being searched.
struct Partner {
  int acc;
  bool is_producer;  // partner writes into the searched accelerator
};

}  // namespace detail

/// Per-accelerator exhaustive customization. Accelerators are configured in
/// first-appearance order; each enumerates every (h1, w1, w2, a, b, c) whose
/// tile fits AIE local memory and whose utilization fits its budget, and keeps
/// the one with the fewest cycles over its layers. With `inter_acc_aware`,
/// parallelism values that cannot align with already-configured partners are
/// never generated and the consumer RAM partition is forced to the lcm layout,
/// so every forwarded edge overlaps with compute.
inline AccDseResult acc_dse(const HwPartition& part, const MemPlan& mem, const Schedule& sched,
                            const Assignment& assign, std::span<const CommEdge> edges,
                            bool inter_acc_aware, const Graph& g, const HardwareProfile& p,
                            const AccDseOptions& opt = {}) {
  const std::size_t n = std::size_t(assign.n_acc);
  AccDseResult res;
  res.accs.resize(n);
  res.edges.assign(edges.begin(), edges.end());
  res.search_order = trace_assignment(sched, assign.n_acc);
  auto per_acc = assign.layers_per_acc();
  std::vector<bool> fixed(n, false);

  for (std::size_t a = 0; a < n; ++a) {
    res.accs[a].kinds = fused_kinds(g, per_acc[a]);
    for (std::size_t i : per_acc[a])
      if (is_hmm(g[i].kind)) res.accs[a].has_hmm = true;
  }

  auto ram_of = [&](const AccConfig& c) {
    return c.part_a * c.part_b * c.part_c * ram_util(c, p);
  };

  for (int acc : res.search_order) {
    const auto ai = std::size_t(acc);
    AccDesign& d = res.accs[ai];
    const Utilization& budget = part.budgets[ai];
    const std::int64_t ram_reserved = mem.accs[ai].ram_banks_min;
    fixed[ai] = true;
    if (!d.has_hmm) {
      d.util = {0, 0, 0, dsp_need(d.kinds, p)};
      continue;
    }

    const auto shapes = detail::collect_shapes(g, per_acc[ai]);
    const HmmType type = required_hmm_type(g, per_acc[ai]);
    const std::int64_t need_dsp = dsp_need(d.kinds, p);
    std::int64_t maxM = 1, maxK = 1, maxN = 1;
    for (const auto& s : shapes) {
      maxM = std::max(maxM, s.m);
      maxK = std::max(maxK, s.k);
      maxN = std::max(maxN, s.n);
    }

    // Partners already configured, deduplicated.
    std::vector<detail::Partner> partners;
    if (inter_acc_aware) {
      std::set<std::pair<int, bool>> seen;
      for (const auto& e : edges) {
        if (e.kind != EdgeKind::Internal) continue;
        if (e.consumer_acc == acc && fixed[std::size_t(e.producer_acc)] &&
            res.accs[std::size_t(e.producer_acc)].has_hmm)
          seen.insert({e.producer_acc, true});
        if (e.producer_acc == acc && fixed[std::size_t(e.consumer_acc)] &&
            res.accs[std::size_t(e.consumer_acc)].has_hmm)
          seen.insert({e.consumer_acc, false});
      }
      for (auto [pa, prod] : seen) partners.push_back({pa, prod});
    }
    auto allowed = [&](std::int64_t v, int axis) {
      for (const auto& pt : partners) {
        const AccConfig& o = res.accs[std::size_t(pt.acc)].cfg;
        if (axis == 0 && !divides_either(v, o.a)) return false;
        if (axis == 1 && pt.is_producer && !divides_either(v, o.c)) return false;
        if (axis == 2 && !pt.is_producer && !divides_either(v, o.b)) return false;
      }
      return true;
    };

    const auto hc = tile_candidates(maxM, opt.tile_cap, opt.tile_min);
    const auto kc = tile_candidates(maxK, opt.tile_cap, opt.tile_min);
    const auto nc = tile_candidates(maxN, opt.tile_cap, opt.tile_min);
    const std::int64_t local = p.aie_local_mem_bytes;
    const std::int64_t bpe = p.bytes_per_elem;

    std::int64_t best_work = std::numeric_limits<std::int64_t>::max();
    std::optional<AccConfig> best;
    std::int64_t evaluated = 0;
    const std::int64_t limit = opt.max_evaluations_per_acc;
    bool stop = false;

    std::vector<std::int64_t> av, bv, cv;
    for (std::int64_t h1 : hc) {
      if (stop) break;
      for (std::int64_t w1 : kc) {
        if (stop) break;
        for (std::int64_t w2 : nc) {
          if (stop) break;
          // Tile-only part of the footprint; Type0 adds resident weights below.
          std::int64_t tile_bytes =
              type == HmmType::Type1
                  ? 2 * (h1 * w1 + w1 * w2 + h1 * w2) * bpe
                  : 2 * (h1 * w1 + h1 * w2) * bpe;
          if (tile_bytes > local) continue;
          const std::int64_t ru = ceil_div(2 * h1 * w2 * bpe, p.bank_bytes);

          auto axis_values = [&](std::int64_t maxdim, std::int64_t tile, int axis,
                                 std::vector<std::int64_t>& out) {
            out.clear();
            std::int64_t hi = std::min(ceil_div(maxdim, tile), budget.aie);
            for (std::int64_t v = 1; v <= hi; ++v)
              if (partners.empty() || allowed(v, axis)) out.push_back(v);
          };
          axis_values(maxM, h1, 0, av);
          axis_values(maxK, w1, 1, bv);
          axis_values(maxN, w2, 2, cv);
          const std::int64_t tile_work = h1 * w1 * w2;

          for (std::int64_t a : av) {
            if (stop) break;
            for (std::int64_t b : bv) {
              if (a * b > budget.aie) break;
              if (stop) break;
              for (std::int64_t c : cv) {
                if (a * b * c > budget.aie) break;
                AccConfig cfg{h1, w1, w2, a, b, c, a, b, c, type};
                if (plio_count(cfg) > budget.plio) continue;
                std::int64_t lanes = a * c;
                if (lanes * ceil_div(need_dsp, lanes) > budget.dsp) continue;
                if (type == HmmType::Type0) {
                  // Only the running layer's weight slice sits in local memory.
                  std::int64_t pinned = 0;
                  for (const auto& s : shapes)
                    if (s.pinned)
                      pinned = std::max(pinned, ceil_div(s.k, b) * ceil_div(s.n, c) * bpe);
                  if (tile_bytes + pinned > local) continue;
                }
                // Consumer-side partition forced by configured producers.
                bool ok = true;
                for (const auto& pt : partners) {
                  const AccConfig& o = res.accs[std::size_t(pt.acc)].cfg;
                  if (pt.is_producer) {
                    cfg.part_a = std::lcm(cfg.part_a, o.a);
                    cfg.part_b = std::lcm(cfg.part_b, o.c);
                  } else {
                    // Growing a configured consumer's partition must still fit its RAM.
                    const auto& ob = part.budgets[std::size_t(pt.acc)];
                    AccConfig grown = o;
                    grown.part_a = std::lcm(o.part_a, a);
                    grown.part_b = std::lcm(o.part_b, c);
                    if (ram_of(grown) + mem.accs[std::size_t(pt.acc)].ram_banks_min >
                        ob.ram_banks) {
                      ok = false;
                      break;
                    }
                  }
                }
                if (!ok) continue;
                if (cfg.part_a * cfg.part_b * cfg.part_c * ru + ram_reserved > budget.ram_banks)
                  continue;

                ++evaluated;
                std::int64_t work = 0;
                for (const auto& s : shapes)
                  work += s.weight * ceil_div(s.m, h1 * a) * ceil_div(s.k, w1 * b) *
                          ceil_div(s.n, w2 * c);
                work *= tile_work;
                if (work < best_work) {
                  best_work = work;
                  best = cfg;
                }
                if (limit > 0 && evaluated >= limit) stop = true;
                if (stop) break;
              }
            }
          }
        }
      }
    }

    d.evaluated = evaluated;
    res.evaluated += evaluated;
    if (!best) {
      res.feasible = false;
      res.reason = "accelerator " + std::to_string(acc) + " has no configuration within budget";
      fixed[ai] = false;
      continue;
    }
    d.cfg = *best;
    if (inter_acc_aware) {
      for (const auto& pt : partners) {
        if (pt.is_producer) continue;
        AccConfig& o = res.accs[std::size_t(pt.acc)].cfg;
        o.part_a = std::lcm(o.part_a, d.cfg.a);
        o.part_b = std::lcm(o.part_b, d.cfg.c);
        res.accs[std::size_t(pt.acc)].util = utilization(o, res.accs[std::size_t(pt.acc)].kinds, p);
      }
    }
    d.util = utilization(d.cfg, d.kinds, p);
  }

  for (std::size_t a = 0; a < n; ++a) {
    AccDesign& d = res.accs[a];
    d.cycles_per_batch = 0;
    if (!d.has_hmm) continue;
    for (std::size_t i : per_acc[a]) d.cycles_per_batch += layer_cycles(g[i], d.cfg, p);
  }

  // Record the patterns of every forwarded edge, then price the edges.
  auto layouts = res.layouts();
  for (auto& e : res.edges) {
    if (e.kind != EdgeKind::Internal) continue;
    if (const auto& pc = layouts[std::size_t(e.producer_acc)]) e.producer_write_pattern = WritePattern{pc->a, pc->c};
    if (const auto& cc = layouts[std::size_t(e.consumer_acc)]) e.consumer_read_pattern = ReadPattern{cc->a, cc->b};
  }
  res.edge_overhead_s = comm_overhead(res.edges, layouts, p);
  return res;
}

}  // namespace ssr
