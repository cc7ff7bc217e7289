#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ssr/error.hpp"
#include "ssr/hw_profile.hpp"
#include "ssr/model_graph.hpp"

namespace ssr {

// Type0 pins weights in AIE local memory and streams one operand; Type1
// streams both operands and is required for attention BatchMatMuls.
enum class HmmType { Type0, Type1 };

inline std::string_view to_string(HmmType t) {
  return t == HmmType::Type0 ? "Type0" : "Type1";
}
inline HmmType hmm_type_from_string(std::string_view s) {
  if (s == "Type0") return HmmType::Type0;
  if (s == "Type1") return HmmType::Type1;
  throw ValidationError("unknown hmm type '" + std::string(s) + "'");
}

/// Per-accelerator configuration vector: single-AIE tile (h1 x w1 x w2),
/// array parallelism (a, b, c) on M/K/N and RAM bank partition factors.
struct AccConfig {
  std::int64_t h1 = 1, w1 = 1, w2 = 1;
  std::int64_t a = 1, b = 1, c = 1;
  std::int64_t part_a = 1, part_b = 1, part_c = 1;
  HmmType hmm_type = HmmType::Type0;

  bool operator==(const AccConfig&) const = default;

  std::int64_t aies() const { return a * b * c; }

  void validate() const {
    if (h1 < 1 || w1 < 1 || w2 < 1 || a < 1 || b < 1 || c < 1 || part_a < 1 ||
        part_b < 1 || part_c < 1)
      throw ValidationError("AccConfig fields must be positive");
    if (part_a < a || part_c < c)
      throw ValidationError("AccConfig partition must cover the array parallelism");
  }
};

inline AccConfig make_config(std::int64_t h1, std::int64_t w1, std::int64_t w2,
                             std::int64_t a, std::int64_t b, std::int64_t c,
                             HmmType t = HmmType::Type0) {
  return AccConfig{h1, w1, w2, a, b, c, a, b, c, t};
}

inline void to_json(nlohmann::json& j, const AccConfig& c) {
  j = nlohmann::json{{"h1", c.h1},         {"w1", c.w1},         {"w2", c.w2},
                     {"a", c.a},           {"b", c.b},           {"c", c.c},
                     {"part_a", c.part_a}, {"part_b", c.part_b}, {"part_c", c.part_c},
                     {"hmm_type", std::string(to_string(c.hmm_type))}};
}
inline void from_json(const nlohmann::json& j, AccConfig& c) {
  c.h1 = j.at("h1").get<std::int64_t>();
  c.w1 = j.at("w1").get<std::int64_t>();
  c.w2 = j.at("w2").get<std::int64_t>();
  c.a = j.at("a").get<std::int64_t>();
  c.b = j.at("b").get<std::int64_t>();
  c.c = j.at("c").get<std::int64_t>();
  c.part_a = j.at("part_a").get<std::int64_t>();
  c.part_b = j.at("part_b").get<std::int64_t>();
  c.part_c = j.at("part_c").get<std::int64_t>();
  c.hmm_type = hmm_type_from_string(j.at("hmm_type").get<std::string>());
}

struct Utilization {
  std::int64_t aie = 0;
  std::int64_t plio = 0;
  std::int64_t ram_banks = 0;
  std::int64_t dsp = 0;

  bool operator==(const Utilization&) const = default;

  bool fits(const Utilization& budget) const {
    return aie <= budget.aie && plio <= budget.plio &&
           ram_banks <= budget.ram_banks && dsp <= budget.dsp;
  }
};

inline void to_json(nlohmann::json& j, const Utilization& u) {
  j = nlohmann::json{{"aie", u.aie}, {"plio", u.plio}, {"ram_banks", u.ram_banks}, {"dsp", u.dsp}};
}
inline void from_json(const nlohmann::json& j, Utilization& u) {
  u.aie = j.at("aie").get<std::int64_t>();
  u.plio = j.at("plio").get<std::int64_t>();
  u.ram_banks = j.at("ram_banks").get<std::int64_t>();
  u.dsp = j.at("dsp").get<std::int64_t>();
}

inline std::int64_t ceil_div(std::int64_t x, std::int64_t y) { return (x + y - 1) / y; }

// RAM banks per partition: one double-buffered h1 x w2 output tile.
inline std::int64_t ram_util(const AccConfig& cfg, const HardwareProfile& p) {
  return ceil_div(2 * cfg.h1 * cfg.w2 * p.bytes_per_elem, p.bank_bytes);
}

// DSPs required by the distinct fabric kernels fused into one accelerator.
inline std::int64_t dsp_need(const std::set<LayerKind>& kinds, const HardwareProfile& p) {
  std::int64_t s = 0;
  for (LayerKind k : kinds)
    if (is_hce(k)) s += p.dsp_cost(k);
  return s;
}

inline std::int64_t plio_count(const AccConfig& cfg) {
  std::int64_t plio = (cfg.a + cfg.c) * cfg.b;
  if (cfg.hmm_type == HmmType::Type1) plio += cfg.a * cfg.c;
  return plio;
}

/// Resource usage of one accelerator. DSP_util is the fused kernels' DSP
/// demand spread over the a x c output lanes, rounded up.
inline Utilization utilization(const AccConfig& cfg, const std::set<LayerKind>& kinds,
                               const HardwareProfile& p) {
  Utilization u;
  u.aie = cfg.a * cfg.b * cfg.c;
  u.plio = plio_count(cfg);
  u.ram_banks = cfg.part_a * cfg.part_b * cfg.part_c * ram_util(cfg, p);
  std::int64_t lanes = cfg.a * cfg.c;
  u.dsp = lanes * ceil_div(dsp_need(kinds, p), lanes);
  return u;
}

/// Cycles for one m x k x n GEMM:
///   ceil(m/(h1 a)) * ceil(k/(w1 b)) * ceil(n/(w2 c)) * h1 w1 w2 / (mac * eff)
inline double mm_cycles(std::int64_t m, std::int64_t k, std::int64_t n,
                        const AccConfig& cfg, const HardwareProfile& p) {
  std::int64_t tiles = ceil_div(m, cfg.h1 * cfg.a) * ceil_div(k, cfg.w1 * cfg.b) *
                       ceil_div(n, cfg.w2 * cfg.c);
  double work = double(tiles) * double(cfg.h1 * cfg.w1 * cfg.w2);
  return work / (double(p.mac_per_aie_per_cycle) * p.eff);
}

// Heads of a BatchMatMul run back to back on the array.
inline double layer_cycles(const Layer& l, const AccConfig& cfg, const HardwareProfile& p) {
  if (!is_hmm(l.kind)) return 0.0;
  return double(l.heads) * mm_cycles(l.m, l.k, l.n, cfg, p);
}

inline std::int64_t cycles_to_ticks(double cycles, std::int64_t ticks_per_cycle) {
  if (cycles <= 0) return 0;
  long double t = (long double)cycles * ticks_per_cycle;
  return std::int64_t(std::ceil(t * (1.0L - 1e-15L)));
}

inline std::int64_t layer_ticks(const Layer& l, const AccConfig& cfg,
                                const HardwareProfile& p, const TimeBase& tb) {
  return cycles_to_ticks(layer_cycles(l, cfg, p), tb.ticks_per_aie_cycle);
}

/// ops / (cycles / freq_aie), ordered to stay exact on round numbers.
inline double throughput(double ops, double cycles, const HardwareProfile& p) {
  if (ops <= 0) return 0.0;
  return ops * double(p.freq_aie_hz) / cycles;
}

/// Bytes of AIE local memory one tile needs. Type1 ping-pongs all three
/// tiles; Type0 ping-pongs the activation and output tiles and keeps its
/// slice of the weights resident.
inline std::int64_t aie_footprint(const AccConfig& cfg, std::int64_t pinned_weight_bytes,
                                  std::int64_t bytes_per_elem = 1) {
  if (cfg.hmm_type == HmmType::Type1)
    return 2 * (cfg.h1 * cfg.w1 + cfg.w1 * cfg.w2 + cfg.h1 * cfg.w2) * bytes_per_elem;
  return 2 * (cfg.h1 * cfg.w1 + cfg.h1 * cfg.w2) * bytes_per_elem + pinned_weight_bytes;
}

inline std::int64_t pinned_weight_bytes(const AccConfig& cfg, std::int64_t layer_k,
                                        std::int64_t layer_n, std::int64_t bytes_per_elem = 1) {
  return ceil_div(layer_k, cfg.b) * ceil_div(layer_n, cfg.c) * bytes_per_elem;
}

// Footprint for one layer of shape (., layer_k, layer_n).
inline std::int64_t layer_footprint(const AccConfig& cfg, std::int64_t layer_k,
                                    std::int64_t layer_n) {
  std::int64_t pinned =
      cfg.hmm_type == HmmType::Type0 ? pinned_weight_bytes(cfg, layer_k, layer_n) : 0;
  return aie_footprint(cfg, pinned);
}

// Output write pattern of a producer (a x c) and input read pattern of a
// consumer (a x b).
struct WritePattern {
  std::int64_t a = 1, c = 1;
  bool operator==(const WritePattern&) const = default;
};
struct ReadPattern {
  std::int64_t a = 1, b = 1;
  bool operator==(const ReadPattern&) const = default;
};

struct BankPartition {
  std::int64_t rows = 1, cols = 1;
  bool operator==(const BankPartition&) const = default;
};

inline bool divides_either(std::int64_t x, std::int64_t y) {
  return x % y == 0 || y % x == 0;
}

inline bool divisible_parallelism(WritePattern prod, ReadPattern cons) {
  return divides_either(prod.a, cons.a) && divides_either(prod.c, cons.b);
}

/// Consumer RAM layout that both the producer's writes and the consumer's
/// reads hit without bank conflicts; nullopt when the patterns cannot align.
inline std::optional<BankPartition> force_partition(WritePattern prod, ReadPattern cons) {
  if (!divisible_parallelism(prod, cons)) return std::nullopt;
  return BankPartition{std::lcm(prod.a, cons.a), std::lcm(prod.c, cons.b)};
}

/// Fabric-side kernel latency in PL cycles. Row reductions (LayerNorm,
/// Softmax) need two passes unless the bypass line buffer lets the second
/// pass trail the first by one row; pointwise kernels stream in one pass.
inline std::int64_t nonlinear_latency(LayerKind kind, std::int64_t rows, std::int64_t row_len,
                                      std::int64_t lanes, bool bypass) {
  if (is_hmm(kind))
    throw ValidationError("nonlinear_latency called on matrix kind " +
                          std::string(to_string(kind)));
  if (!is_reduction(kind)) return ceil_div(rows * row_len, lanes);
  if (bypass) return ceil_div((rows + 1) * row_len, lanes);
  return ceil_div(2 * rows * row_len, lanes);
}

// Per-row streaming time of a fabric kernel, PL cycles.
inline std::int64_t nonlinear_row_cycles(std::int64_t row_len, std::int64_t lanes) {
  return ceil_div(row_len, lanes);
}

enum class EdgeKind { Internal, Load, Store };

inline std::string_view to_string(EdgeKind k) {
  switch (k) {
    case EdgeKind::Internal: return "internal";
    case EdgeKind::Load: return "load";
    case EdgeKind::Store: return "store";
  }
  return "?";
}

/// One data transfer: a cross-accelerator dependency, or a DDR load/store at
/// the graph boundary (acc index -1 stands for off-chip memory).
struct CommEdge {
  int producer_layer = -1;
  int consumer_layer = -1;
  int producer_acc = -1;
  int consumer_acc = -1;
  std::int64_t bytes = 0;
  EdgeKind kind = EdgeKind::Internal;
  // Filled in once the endpoint accelerators are configured.
  std::optional<WritePattern> producer_write_pattern;
  std::optional<ReadPattern> consumer_read_pattern;

  bool operator==(const CommEdge&) const = default;
};

// Accelerators without matrix layers impose no bank layout (nullopt).
using AccLayout = std::optional<AccConfig>;

inline bool conflict_free(const AccConfig& prod, const AccConfig& cons) {
  return cons.part_a % prod.a == 0 && cons.part_a % cons.a == 0 &&
         cons.part_b % prod.c == 0 && cons.part_b % cons.b == 0;
}

inline bool edge_conflict_free(const CommEdge& e, std::span<const AccLayout> cfgs) {
  if (e.kind != EdgeKind::Internal) return true;
  const AccLayout& prod = cfgs[std::size_t(e.producer_acc)];
  const AccLayout& cons = cfgs[std::size_t(e.consumer_acc)];
  if (!prod || !cons) return true;
  return conflict_free(*prod, *cons);
}

// Banks available to a serialized RAM-to-RAM copy.
inline std::int64_t copy_banks(const AccConfig& prod, const AccConfig& cons) {
  return std::max<std::int64_t>(1, std::min(prod.a * prod.c, cons.part_a * cons.part_b));
}

// Cost of one edge in ticks of `tb`; integer-exact.
inline std::int64_t edge_overhead_ticks(const CommEdge& e, std::span<const AccLayout> cfgs,
                                        const HardwareProfile& p, const TimeBase& tb) {
  if (e.kind != EdgeKind::Internal) return tb.transfer_ticks(e.bytes, p.offchip_bw_bytes_per_s);
  if (edge_conflict_free(e, cfgs)) return 0;
  std::int64_t banks = copy_banks(*cfgs[std::size_t(e.producer_acc)],
                                  *cfgs[std::size_t(e.consumer_acc)]);
  return tb.transfer_ticks(e.bytes, std::uint64_t(banks * p.bank_word_bytes) * p.freq_pl_hz);
}

/// Seconds of overhead per edge: off-chip DMA time for boundary edges, zero
/// for conflict-free forwarding, otherwise a serialized bank-to-bank copy.
inline std::vector<double> comm_overhead(std::span<const CommEdge> edges,
                                         std::span<const AccLayout> cfgs,
                                         const HardwareProfile& p) {
  std::vector<double> out;
  out.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.kind != EdgeKind::Internal) {
      out.push_back(double(e.bytes) / double(p.offchip_bw_bytes_per_s));
    } else if (edge_conflict_free(e, cfgs)) {
      out.push_back(0.0);
    } else {
      std::int64_t banks = copy_banks(*cfgs[std::size_t(e.producer_acc)],
                                      *cfgs[std::size_t(e.consumer_acc)]);
      out.push_back(double(e.bytes) /
                    (double(banks * p.bank_word_bytes) * double(p.freq_pl_hz)));
    }
  }
  return out;
}

}  // namespace ssr
