#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "ssr/perf_model.hpp"

using namespace ssr;

TEST(PerfModel, UtilizationByDirectSubstitution) {
  auto p = vck190_profile();
  AccConfig c = make_config(32, 32, 32, 4, 2, 4);
  Utilization u = utilization(c, {}, p);
  EXPECT_EQ(u.aie, 32);
  EXPECT_EQ(u.plio, 16);
  EXPECT_EQ(u.ram_banks, 4 * 2 * 4 * ram_util(c, p));
  EXPECT_EQ(u.dsp, 0);
  c.hmm_type = HmmType::Type1;
  EXPECT_EQ(plio_count(c), 16 + 16);
}

TEST(PerfModel, DspSpreadOverOutputLanes) {
  auto p = vck190_profile();
  AccConfig c = make_config(8, 8, 8, 3, 1, 5);
  Utilization u = utilization(c, {LayerKind::LayerNorm, LayerKind::MatMul}, p);
  EXPECT_EQ(u.dsp, 15 * ceil_div(512, 15));
  EXPECT_GE(u.dsp, 512);
}

TEST(PerfModel, RamUtilDoubleBuffersOutputTile) {
  auto p = vck190_profile();
  EXPECT_EQ(ram_util(make_config(48, 8, 48, 1, 1, 1), p), 1);   // 4608 bytes
  EXPECT_EQ(ram_util(make_config(48, 8, 49, 1, 1, 1), p), 2);
}

TEST(PerfModel, FullArrayAtUnitEfficiencyHitsPeak) {
  auto p = vck190_profile();
  p.eff = 1.0;
  AccConfig c = make_config(32, 32, 32, 8, 5, 10);
  ASSERT_EQ(c.aies(), 400);
  std::int64_t m = 32 * 8 * 3, k = 32 * 5 * 2, n = 32 * 10 * 4;
  double cycles = mm_cycles(m, k, n, c, p);
  double ops = 2.0 * double(m * k * n);
  EXPECT_EQ(throughput(ops, cycles, p), 102.4e12);
}

TEST(PerfModel, CyclesMatchTileWalk) {
  std::mt19937_64 rng(11);
  auto p = vck190_profile();
  std::uniform_int_distribution<std::int64_t> dim(1, 300), t(1, 40), par(1, 6);
  for (int i = 0; i < 200; ++i) {
    AccConfig c = make_config(t(rng), t(rng), t(rng), par(rng), par(rng), par(rng));
    std::int64_t m = dim(rng), k = dim(rng), n = dim(rng);
    EXPECT_DOUBLE_EQ(mm_cycles(m, k, n, c, p), oracle::tiled_cycles(m, k, n, c, p));
  }
}

TEST(PerfModel, BatchMatMulScalesWithHeads) {
  auto p = vck190_profile();
  Layer l;
  l.kind = LayerKind::BatchMatMul;
  l.m = 197;
  l.k = 64;
  l.n = 197;
  l.heads = 3;
  AccConfig c = make_config(8, 8, 8, 2, 2, 2, HmmType::Type1);
  EXPECT_DOUBLE_EQ(layer_cycles(l, c, p), 3 * mm_cycles(197, 64, 197, c, p));
  l.kind = LayerKind::Softmax;
  EXPECT_EQ(layer_cycles(l, c, p), 0.0);
}

TEST(PerfModel, FootprintPerType) {
  AccConfig c = make_config(16, 32, 8, 1, 4, 2);
  EXPECT_EQ(aie_footprint(c, 0), 2 * (16 * 32 + 16 * 8));
  EXPECT_EQ(layer_footprint(c, 192, 576), 2 * (16 * 32 + 16 * 8) + 48 * 288);
  c.hmm_type = HmmType::Type1;
  EXPECT_EQ(layer_footprint(c, 192, 576), 2 * (16 * 32 + 32 * 8 + 16 * 8));
}

TEST(PerfModel, ForcePartitionTakesLcm) {
  auto bp = force_partition({2, 2}, {4, 1});
  ASSERT_TRUE(bp.has_value());
  EXPECT_EQ(*bp, (BankPartition{4, 2}));
  EXPECT_FALSE(force_partition({2, 3}, {4, 2}).has_value());
  EXPECT_EQ(*force_partition({1, 1}, {1, 1}), (BankPartition{1, 1}));
}

TEST(PerfModel, ForcedLayoutIsConflictFree) {
  // Every divisible pair becomes conflict-free once the consumer takes the lcm layout.
  for (std::int64_t pa = 1; pa <= 8; ++pa)
    for (std::int64_t pc = 1; pc <= 8; ++pc)
      for (std::int64_t ca = 1; ca <= 8; ++ca)
        for (std::int64_t cb = 1; cb <= 8; ++cb) {
          auto bp = force_partition({pa, pc}, {ca, cb});
          EXPECT_EQ(bp.has_value(), divides_either(pa, ca) && divides_either(pc, cb));
          if (!bp) continue;
          AccConfig prod = make_config(8, 8, 8, pa, 1, pc);
          AccConfig cons = make_config(8, 8, 8, ca, cb, 1);
          cons.part_a = bp->rows;
          cons.part_b = bp->cols;
          EXPECT_TRUE(conflict_free(prod, cons));
        }
}

TEST(PerfModel, NonlinearLatency) {
  EXPECT_EQ(nonlinear_latency(LayerKind::GeLU, 10, 64, 16, false), 40);
  EXPECT_EQ(nonlinear_latency(LayerKind::Softmax, 10, 64, 16, true), 44);
  EXPECT_EQ(nonlinear_latency(LayerKind::Softmax, 10, 64, 16, false), 80);
  EXPECT_LE(nonlinear_latency(LayerKind::LayerNorm, 197, 192, 16, true),
            nonlinear_latency(LayerKind::LayerNorm, 197, 192, 16, false));
  EXPECT_THROW(nonlinear_latency(LayerKind::MatMul, 1, 1, 1, true), ValidationError);
}

TEST(PerfModel, CommOverhead) {
  auto p = vck190_profile();
  std::vector<AccLayout> layouts{make_config(8, 8, 8, 2, 1, 2), make_config(8, 8, 8, 4, 1, 1),
                                 std::nullopt};
  CommEdge bad{0, 1, 0, 1, 4096, EdgeKind::Internal, {}, {}};
  CommEdge to_fabric{0, 2, 0, 2, 4096, EdgeKind::Internal, {}, {}};
  CommEdge load{-1, 0, -1, 0, 25600, EdgeKind::Load, {}, {}};
  auto s = comm_overhead(std::vector<CommEdge>{bad, to_fabric, load}, layouts, p);
  // min(2*2, 4*1) banks x 8 bytes per PL cycle.
  EXPECT_DOUBLE_EQ(s[0], 4096.0 / (4 * 8 * 230e6));
  EXPECT_EQ(s[1], 0.0);
  EXPECT_DOUBLE_EQ(s[2], 1e-6);
  layouts[1]->part_a = 4;
  layouts[1]->part_b = 2;
  EXPECT_EQ(comm_overhead(std::vector<CommEdge>{bad}, layouts, p)[0], 0.0);
  TimeBase tb = TimeBase::of(p);
  EXPECT_EQ(edge_overhead_ticks(load, layouts, p, tb), 23'000);
}

TEST(PerfModel, ConfigValidation) {
  AccConfig c = make_config(8, 8, 8, 2, 2, 2);
  EXPECT_NO_THROW(c.validate());
  c.part_a = 1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = make_config(0, 8, 8, 1, 1, 1);
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(PerfModel, ConfigJsonRoundTrip) {
  AccConfig c{16, 8, 32, 3, 2, 5, 6, 10, 5, HmmType::Type1};
  EXPECT_EQ(nlohmann::json(c).get<AccConfig>(), c);
}
