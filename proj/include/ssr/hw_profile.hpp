#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ssr/error.hpp"
#include "ssr/model_graph.hpp"

namespace ssr {

/// Resource budgets and rate constants of one target device.
struct HardwareProfile {
  std::string name = "custom";
  std::int64_t aie_total = 0;
  std::int64_t plio_budget = 0;
  std::int64_t bram_total = 0;
  std::int64_t uram_total = 0;
  std::int64_t dsp_total = 0;
  std::int64_t aie_local_mem_bytes = 0;
  std::int64_t mac_per_aie_per_cycle = 0;
  std::uint64_t freq_aie_hz = 0;
  std::uint64_t freq_pl_hz = 0;
  std::uint64_t offchip_bw_bytes_per_s = 0;
  std::int64_t bank_bytes = 0;
  double eff = 1.0;
  std::map<LayerKind, std::int64_t> nonlinear_dsp_cost;

  // Not part of the core budget list but needed by the cost model.
  std::int64_t uram_bank_bytes = 36864;
  std::int64_t bank_word_bytes = 8;
  // Elements per PL cycle a fabric kernel consumes from one output stream.
  std::int64_t hce_lanes = 16;
  std::int64_t bytes_per_elem = 1;

  bool operator==(const HardwareProfile&) const = default;

  // RAM capacity expressed in bank_bytes-sized banks.
  std::int64_t ram_banks_total() const {
    return bram_total + uram_total * (uram_bank_bytes / bank_bytes);
  }

  std::int64_t dsp_cost(LayerKind k) const {
    auto it = nonlinear_dsp_cost.find(k);
    return it == nonlinear_dsp_cost.end() ? 0 : it->second;
  }

  void validate() const {
    auto fail = [&](const std::string& what) {
      throw ValidationError("hardware profile '" + name + "': " + what);
    };
    if (aie_total <= 0) fail("aie_total must be > 0");
    if (plio_budget <= 0) fail("plio_budget must be > 0");
    if (bram_total <= 0) fail("bram_total must be > 0");
    if (uram_total < 0) fail("uram_total must be >= 0");
    if (dsp_total <= 0) fail("dsp_total must be > 0");
    if (aie_local_mem_bytes <= 0) fail("aie_local_mem_bytes must be > 0");
    if (mac_per_aie_per_cycle <= 0) fail("mac_per_aie_per_cycle must be > 0");
    if (freq_aie_hz == 0) fail("freq_aie_hz must be > 0");
    if (freq_pl_hz == 0) fail("freq_pl_hz must be > 0");
    if (offchip_bw_bytes_per_s == 0) fail("offchip_bw_bytes_per_s must be > 0");
    if (bank_bytes <= 0) fail("bank_bytes must be > 0");
    if (uram_bank_bytes <= 0) fail("uram_bank_bytes must be > 0");
    if (bank_word_bytes <= 0) fail("bank_word_bytes must be > 0");
    if (hce_lanes <= 0) fail("hce_lanes must be > 0");
    if (bytes_per_elem <= 0) fail("bytes_per_elem must be > 0");
    if (!(eff > 0.0 && eff <= 1.0)) fail("eff must lie in (0, 1]");
    for (auto [k, v] : nonlinear_dsp_cost) {
      if (is_hmm(k)) fail("nonlinear_dsp_cost keyed by a matrix kind");
      if (v < 0) fail("nonlinear_dsp_cost must be >= 0");
    }
  }
};

/// ops/s at full MAC rate: aie_total * mac * 2 * freq_aie.
inline double peak_tops(const HardwareProfile& p) {
  return double(p.aie_total) * double(p.mac_per_aie_per_cycle) * 2.0 *
         double(p.freq_aie_hz);
}

inline HardwareProfile vck190_profile() {
  HardwareProfile p;
  p.name = "vck190";
  p.aie_total = 400;
  p.plio_budget = 220;
  p.bram_total = 967;
  p.uram_total = 462;
  p.dsp_total = 1968;
  p.aie_local_mem_bytes = 32768;
  p.mac_per_aie_per_cycle = 128;
  p.freq_aie_hz = 1'000'000'000;
  p.freq_pl_hz = 230'000'000;
  p.offchip_bw_bytes_per_s = 25'600'000'000;
  p.bank_bytes = 4608;
  p.uram_bank_bytes = 36864;
  p.eff = 0.8;
  p.nonlinear_dsp_cost = {{LayerKind::LayerNorm, 512},
                          {LayerKind::Softmax, 336},
                          {LayerKind::GeLU, 0},
                          {LayerKind::Transpose, 0}};
  return p;
}

// Tensor-block FPGA: 3960 blocks x 30 INT8 MAC at 600 MHz, M20K memory, HBM.
inline HardwareProfile stratix10nx_profile() {
  HardwareProfile p;
  p.name = "stratix10nx";
  p.aie_total = 3960;
  p.plio_budget = 4000;
  p.bram_total = 6554;
  p.uram_total = 0;
  p.dsp_total = 3960;
  p.aie_local_mem_bytes = 32768;
  p.mac_per_aie_per_cycle = 30;
  p.freq_aie_hz = 600'000'000;
  p.freq_pl_hz = 300'000'000;
  p.offchip_bw_bytes_per_s = 512'000'000'000;
  p.bank_bytes = 2560;
  p.uram_bank_bytes = 2560;
  p.eff = 0.8;
  p.nonlinear_dsp_cost = {{LayerKind::LayerNorm, 512},
                          {LayerKind::Softmax, 336},
                          {LayerKind::GeLU, 0},
                          {LayerKind::Transpose, 0}};
  return p;
}

inline std::optional<HardwareProfile> builtin_profile(std::string_view name) {
  if (name == "vck190") return vck190_profile();
  if (name == "stratix10nx") return stratix10nx_profile();
  return std::nullopt;
}

inline void to_json(nlohmann::json& j, const HardwareProfile& p) {
  nlohmann::json costs = nlohmann::json::object();
  for (auto [k, v] : p.nonlinear_dsp_cost) costs[std::string(to_string(k))] = v;
  j = nlohmann::json{{"name", p.name},
                     {"aie_total", p.aie_total},
                     {"plio_budget", p.plio_budget},
                     {"bram_total", p.bram_total},
                     {"uram_total", p.uram_total},
                     {"dsp_total", p.dsp_total},
                     {"aie_local_mem_bytes", p.aie_local_mem_bytes},
                     {"mac_per_aie_per_cycle", p.mac_per_aie_per_cycle},
                     {"freq_aie_hz", p.freq_aie_hz},
                     {"freq_pl_hz", p.freq_pl_hz},
                     {"offchip_bw_bytes_per_s", p.offchip_bw_bytes_per_s},
                     {"bank_bytes", p.bank_bytes},
                     {"eff", p.eff},
                     {"nonlinear_dsp_cost", costs},
                     {"uram_bank_bytes", p.uram_bank_bytes},
                     {"bank_word_bytes", p.bank_word_bytes},
                     {"hce_lanes", p.hce_lanes},
                     {"bytes_per_elem", p.bytes_per_elem}};
}

inline void from_json(const nlohmann::json& j, HardwareProfile& p) {
  if (!j.is_object()) throw ValidationError("hardware profile must be an object");
  HardwareProfile d;
  try {
    p.name = j.value("name", d.name);
    p.aie_total = j.at("aie_total").get<std::int64_t>();
    p.plio_budget = j.at("plio_budget").get<std::int64_t>();
    p.bram_total = j.at("bram_total").get<std::int64_t>();
    p.uram_total = j.at("uram_total").get<std::int64_t>();
    p.dsp_total = j.at("dsp_total").get<std::int64_t>();
    p.aie_local_mem_bytes = j.at("aie_local_mem_bytes").get<std::int64_t>();
    p.mac_per_aie_per_cycle = j.at("mac_per_aie_per_cycle").get<std::int64_t>();
    p.freq_aie_hz = j.at("freq_aie_hz").get<std::uint64_t>();
    p.freq_pl_hz = j.at("freq_pl_hz").get<std::uint64_t>();
    p.offchip_bw_bytes_per_s = j.at("offchip_bw_bytes_per_s").get<std::uint64_t>();
    p.bank_bytes = j.at("bank_bytes").get<std::int64_t>();
    p.eff = j.at("eff").get<double>();
    p.nonlinear_dsp_cost.clear();
    const auto costs = j.value("nonlinear_dsp_cost", nlohmann::json::object());
    for (auto& [k, v] : costs.items())
      p.nonlinear_dsp_cost[layer_kind_from_string(k)] = v.get<std::int64_t>();
    p.uram_bank_bytes = j.value("uram_bank_bytes", d.uram_bank_bytes);
    p.bank_word_bytes = j.value("bank_word_bytes", d.bank_word_bytes);
    p.hce_lanes = j.value("hce_lanes", d.hce_lanes);
    p.bytes_per_elem = j.value("bytes_per_elem", d.bytes_per_elem);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("hardware profile schema: ") + e.what());
  }
}

inline HardwareProfile profile_from_json(const nlohmann::json& j) {
  HardwareProfile p = j.get<HardwareProfile>();
  p.validate();
  return p;
}

/// Built-in name or path to a JSON profile.
inline HardwareProfile load_profile(const std::string& name_or_path) {
  if (auto p = builtin_profile(name_or_path)) return *p;
  std::ifstream in(name_or_path);
  if (!in)
    throw ValidationError("no built-in profile or readable file named '" +
                          name_or_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("hardware profile parse error: " + std::string(e.what()));
  }
  return profile_from_json(j);
}

/// Integer time base shared by the schedule and the simulator. One tick is
/// 1 / lcm(freq_aie, freq_pl) seconds, so both clock domains advance by a
/// whole number of ticks per cycle.
struct TimeBase {
  std::uint64_t tick_hz = 1;
  std::int64_t ticks_per_aie_cycle = 1;
  std::int64_t ticks_per_pl_cycle = 1;

  static TimeBase unit() { return {}; }

  static TimeBase of(const HardwareProfile& p) {
    TimeBase t;
    t.tick_hz = std::lcm(p.freq_aie_hz, p.freq_pl_hz);
    t.ticks_per_aie_cycle = std::int64_t(t.tick_hz / p.freq_aie_hz);
    t.ticks_per_pl_cycle = std::int64_t(t.tick_hz / p.freq_pl_hz);
    return t;
  }

  double seconds(std::int64_t ticks) const { return double(ticks) / double(tick_hz); }

  // ceil(bytes / bw) in ticks, exact.
  std::int64_t transfer_ticks(std::int64_t bytes, std::uint64_t bytes_per_s) const {
    if (bytes <= 0) return 0;
    unsigned __int128 num = (unsigned __int128)bytes * tick_hz;
    return std::int64_t((num + bytes_per_s - 1) / bytes_per_s);
  }

  std::int64_t from_seconds(double s) const {
    return s <= 0 ? 0 : std::int64_t(std::ceil(s * double(tick_hz) * (1 - 1e-12)));
  }

  bool operator==(const TimeBase&) const = default;
};

}  // namespace ssr
