#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "ssr/scheduler.hpp"

using namespace ssr;

namespace {

Graph chain(int n, std::int64_t dim = 16) {
  std::vector<Layer> ls;
  for (int i = 0; i < n; ++i) {
    Layer l;
    l.id = i;
    l.m = l.k = l.n = dim;
    if (i > 0) l.deps = {i - 1};
    ls.push_back(l);
  }
  return Graph(ls);
}

std::int64_t makespan(const Graph& g, const Assignment& a, int nb,
                      const std::vector<std::int64_t>& d) {
  return layer_acc_schedule(a, g, nb, d).schedule.makespan;
}

void expect_well_formed(const Schedule& s, const Graph& g) {
  // Same-acc matrix intervals are disjoint; entries start after their deps.
  std::map<std::pair<int, int>, const ScheduleEntry*> by;
  for (const auto& e : s.entries) by[{e.batch, e.layer}] = &e;
  for (const auto& e : s.entries) {
    for (int d : g[g.index_of(e.layer)].deps) EXPECT_GE(e.start, by.at({e.batch, d})->end);
    if (!is_hmm(g[g.index_of(e.layer)].kind)) continue;
    for (const auto& o : s.entries) {
      if (&o == &e || o.acc != e.acc || !is_hmm(g[g.index_of(o.layer)].kind)) continue;
      if (o.start == o.end || e.start == e.end) continue;
      EXPECT_TRUE(o.end <= e.start || e.end <= o.start);
    }
  }
}

}  // namespace

TEST(Scheduler, FourLayerChainStrategyZeroTakesSix) {
  Graph g = chain(4);
  std::vector<std::int64_t> unit(4, 1);
  EXPECT_EQ(makespan(g, Assignment({0, 1, 1, 0}, 2), 2, unit), 6);
}

TEST(Scheduler, FourLayerChainBestTakesFive) {
  Graph g = chain(4);
  std::vector<std::int64_t> unit(4, 1);
  EXPECT_EQ(makespan(g, Assignment({0, 1, 0, 1}, 2), 2, unit), 5);
  std::int64_t best = 1 << 30;
  int count = 0;
  oracle::for_each_assignment(4, 2, [&](const std::vector<int>& a) {
    ++count;
    Assignment as(a, 2);
    std::int64_t m = makespan(g, as, 2, unit);
    EXPECT_EQ(m, oracle::stepped_makespan(g, as, 2, unit));
    best = std::min(best, m);
  });
  EXPECT_EQ(count, 16);
  EXPECT_EQ(best, 5);
}

TEST(Scheduler, SingleAccSerializes) {
  std::mt19937_64 rng(3);
  for (int it = 0; it < 20; ++it) {
    Graph g = oracle::random_mm_graph(rng, 6, false);
    std::vector<std::int64_t> d(g.size());
    std::int64_t sum = 0;
    for (auto& x : d) sum += (x = std::uniform_int_distribution<int>(1, 9)(rng));
    int nb = std::uniform_int_distribution<int>(1, 4)(rng);
    EXPECT_EQ(makespan(g, Assignment(std::vector<int>(g.size(), 0), 1), nb, d), sum * nb);
  }
}

TEST(Scheduler, MatchesSteppedOracleOnRandomGraphs) {
  std::mt19937_64 rng(5);
  for (int it = 0; it < 200; ++it) {
    int n = std::uniform_int_distribution<int>(1, 8)(rng);
    Graph g = oracle::random_mm_graph(rng, n, false);
    int k = std::uniform_int_distribution<int>(1, 3)(rng);
    std::vector<int> acc(g.size());
    for (auto& a : acc) a = std::uniform_int_distribution<int>(0, k - 1)(rng);
    std::vector<std::int64_t> d(g.size());
    for (auto& x : d) x = std::uniform_int_distribution<int>(1, 7)(rng);
    int nb = std::uniform_int_distribution<int>(1, 3)(rng);
    Assignment as(acc, k);
    auto r = layer_acc_schedule(as, g, nb, d);
    EXPECT_EQ(r.schedule.makespan, oracle::stepped_makespan(g, as, nb, d));
    expect_well_formed(r.schedule, g);
  }
}

TEST(Scheduler, TransformerScheduleIsWellFormed) {
  Graph g = build_transformer(deit_160());
  std::vector<int> acc(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) acc[i] = int(i % 3);
  std::vector<std::int64_t> d(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) d[i] = is_hmm(g[i].kind) ? 5 + std::int64_t(i % 7) : 0;
  auto r = layer_acc_schedule(Assignment(acc, 3), g, 2, d);
  EXPECT_EQ(r.schedule.entries.size(), 2 * g.size());
  expect_well_formed(r.schedule, g);
}

TEST(Scheduler, ShorterLayerNeverLengthensChain) {
  // Monotone cases only: a single batch, or one accelerator per layer (a flow
  // shop). Shared accelerators with several batches admit list-scheduling
  // anomalies.
  std::mt19937_64 rng(9);
  for (int it = 0; it < 200; ++it) {
    int n = std::uniform_int_distribution<int>(2, 7)(rng);
    Graph g = chain(n);
    bool pipeline = it % 2 == 1;
    std::vector<int> acc(g.size());
    for (std::size_t i = 0; i < acc.size(); ++i)
      acc[i] = pipeline ? int(i) : std::uniform_int_distribution<int>(0, 2)(rng);
    std::vector<std::int64_t> d(g.size());
    for (auto& x : d) x = std::uniform_int_distribution<int>(2, 9)(rng);
    Assignment as(acc, pipeline ? n : 3);
    int nb = pipeline ? std::uniform_int_distribution<int>(1, 4)(rng) : 1;
    std::int64_t base = makespan(g, as, nb, d);
    std::size_t i = std::uniform_int_distribution<std::size_t>(0, g.size() - 1)(rng);
    d[i] -= 1;
    EXPECT_LE(makespan(g, as, nb, d), base);
  }
}

TEST(Scheduler, EdgesCoverCrossingsAndBoundary) {
  Graph g = chain(4);
  auto edges = extract_edges(Assignment({0, 1, 1, 0}, 2), g);
  int load = 0, store = 0, internal = 0;
  for (const auto& e : edges) {
    if (e.kind == EdgeKind::Load) ++load;
    if (e.kind == EdgeKind::Store) ++store;
    if (e.kind == EdgeKind::Internal) {
      ++internal;
      EXPECT_NE(e.producer_acc, e.consumer_acc);
      EXPECT_EQ(e.bytes, 16 * 16);
    }
  }
  EXPECT_EQ(load, 1);
  EXPECT_EQ(store, 1);
  EXPECT_EQ(internal, 2);
}

TEST(Scheduler, AssignmentValidationAndNormalization) {
  Graph g = chain(3);
  EXPECT_THROW(Assignment({0, 1}, 2).validate(g), ValidationError);
  EXPECT_THROW(Assignment({0, 2, 1}, 2).validate(g), ValidationError);
  Assignment a({2, 0, 2}, 3);
  EXPECT_EQ(a.normalized(), Assignment({0, 1, 0}, 2));
}

TEST(Scheduler, MemAllocationIsAssignmentLocal) {
  Graph g = build_transformer(deit_tiny());
  auto p = vck190_profile();
  std::mt19937_64 rng(1);
  std::vector<int> acc(g.size());
  for (auto& a : acc) a = std::uniform_int_distribution<int>(0, 2)(rng);
  Assignment a1(acc, 3);
  auto m1 = mem_allocation(extract_edges(a1, g), g, a1, p);
  // Move layers between accs 1 and 2 only; acc 0 must not notice.
  for (auto& x : acc)
    if (x != 0) x = 3 - x;
  Assignment a2(acc, 3);
  auto m2 = mem_allocation(extract_edges(a2, g), g, a2, p);
  EXPECT_EQ(m1.accs[0], m2.accs[0]);
  std::int64_t w = 0;
  for (const auto& m : m1.accs) {
    w += m.weight_bytes;
    EXPECT_GE(m.ram_banks_min, ceil_div(m.weight_bytes + m.activation_bytes, p.bank_bytes));
  }
  EXPECT_EQ(w, total_weight_bytes(g));
}

TEST(Scheduler, PartitionIsProportional) {
  auto p = vck190_profile();
  auto part_for = [&](std::vector<std::int64_t> dims) {
    std::vector<Layer> ls;
    std::vector<int> acc;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      Layer l;
      l.id = int(i);
      l.m = dims[i];
      l.k = 4;
      l.n = 4;
      ls.push_back(l);
      acc.push_back(int(i));
    }
    Graph g(ls);
    Assignment a(acc, int(acc.size()));
    auto r = layer_acc_schedule(a, g, 1, std::vector<std::int64_t>(g.size(), 1));
    return hw_partition(mem_allocation(r.edges, g, a, p), r.schedule, g, a, p);
  };
  auto one = part_for({8});
  EXPECT_EQ(one.budgets[0].aie, 400);
  EXPECT_EQ(one.budgets[0].plio, 220);
  auto eq = part_for({8, 8});
  EXPECT_EQ(eq.budgets[0].aie, 200);
  EXPECT_EQ(eq.budgets[1].aie, 200);
  auto r31 = part_for({24, 8});
  EXPECT_EQ(r31.budgets[0].aie, 300);
  EXPECT_EQ(r31.budgets[1].aie, 100);
  auto skew = part_for({100000, 1, 1, 1});
  std::int64_t aie = 0, plio = 0, ram = 0, dsp = 0;
  for (const auto& b : skew.budgets) {
    EXPECT_GE(b.aie, 1);
    aie += b.aie;
    plio += b.plio;
    ram += b.ram_banks;
    dsp += b.dsp;
  }
  EXPECT_LE(aie, p.aie_total);
  EXPECT_LE(plio, p.plio_budget);
  EXPECT_LE(ram, p.ram_banks_total());
  EXPECT_LE(dsp, p.dsp_total);
}

TEST(Scheduler, PartitionRejectsOversizedMemory) {
  auto p = vck190_profile();
  p.bram_total = 1;
  p.uram_total = 0;
  Graph g = build_transformer(deit_tiny());
  Assignment a(std::vector<int>(g.size(), 0), 1);
  auto r = layer_acc_schedule(a, g, 1, std::vector<std::int64_t>(g.size(), 1));
  EXPECT_THROW(hw_partition(mem_allocation(r.edges, g, a, p), r.schedule, g, a, p),
               InfeasibleError);
}

TEST(Scheduler, Apportion) {
  std::vector<double> w{3, 1};
  std::vector<std::int64_t> mins{0, 0};
  EXPECT_EQ(*apportion(400, w, mins), (std::vector<std::int64_t>{300, 100}));
  std::vector<std::int64_t> big{0, 150};
  EXPECT_EQ(*apportion(400, w, big), (std::vector<std::int64_t>{250, 150}));
  std::vector<std::int64_t> over{300, 150};
  EXPECT_FALSE(apportion(400, w, over).has_value());
  std::vector<double> w3{1, 1, 1};
  std::vector<std::int64_t> z3{0, 0, 0};
  auto r = *apportion(10, w3, z3);
  EXPECT_EQ(r[0] + r[1] + r[2], 10);
}
