// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "priomap/error.hpp"
#include "priomap/platform.hpp"
#include "test_support.hpp"

using namespace priomap;
using priomap::testing::bundled_platform;
using priomap::testing::bundled_zoo;

namespace {

ComponentSpec flat_component(std::string name, double rate, double overhead) {
    ComponentSpec c;
    c.name = std::move(name);
    c.rate.fill(rate);
    c.per_layer_overhead = overhead;
    return c;
}

Platform flat_platform(int d, double rate, double overhead, double bw) {
    std::vector<ComponentSpec> comps;
    for (int c = 0; c < d; ++c) comps.push_back(flat_component("c" + std::to_string(c), rate, overhead));
    std::vector<std::vector<double>> m(static_cast<std::size_t>(d), std::vector<double>(static_cast<std::size_t>(d), bw));
    return Platform("flat", std::move(comps), std::move(m), 0);
}

// A pooling layer whose output volume is `macs` elements (pool cost = ofm volume).
LayerDescriptor pool_layer(int index, std::int64_t macs) {
    LayerDescriptor l;
    l.index = index;
    l.type = LayerType::Pool;
    l.ifm = {1, macs, 1, 1};
    l.ofm = {1, macs, 1, 1};
    return l;
}

DnnDescriptor chain(std::string name, std::vector<std::int64_t> macs) {
    std::vector<LayerDescriptor> layers;
    for (std::size_t j = 0; j < macs.size(); ++j) layers.push_back(pool_layer(static_cast<int>(j), macs[j]));
    return DnnDescriptor(std::move(name), std::move(layers));
}

// Run-length encoding written independently of derive_stages.
std::vector<std::tuple<int, int, int>> rle(const std::vector<int>& a) {
    std::vector<std::tuple<int, int, int>> out;
    std::size_t i = 0;
    while (i < a.size()) {
        std::size_t j = i;
        while (j < a.size() && a[j] == a[i]) ++j;
        out.emplace_back(static_cast<int>(i), static_cast<int>(j), a[i]);
        i = j;
    }
    return out;
}

}  // namespace

TEST(DeriveStages, MergesRuns) {
    const auto d = chain("c3", {1, 1, 1});
    EXPECT_EQ(derive_stages(d, std::vector<int>{0, 0, 0}), (std::vector<Stage>{{0, 3, 0}}));
    EXPECT_EQ(derive_stages(d, std::vector<int>{0, 1, 0}).size(), 3u);
    const auto d5 = chain("c5", {1, 1, 1, 1, 1});
    EXPECT_EQ(derive_stages(d5, std::vector<int>{2, 2, 1, 1, 1}),
              (std::vector<Stage>{{0, 2, 2}, {2, 5, 1}}));
    EXPECT_THROW(derive_stages(d5, std::vector<int>{0, 0}), StructuralError);
}

TEST(DeriveStages, MatchesRunLengthOracle) {
    std::mt19937_64 rng(3);
    const auto d = chain("c12", std::vector<std::int64_t>(12, 1));
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<int> a(12);
        for (int& c : a) c = static_cast<int>(rng() % 3);
        const auto stages = derive_stages(d, a);
        const auto expect = rle(a);
        ASSERT_EQ(stages.size(), expect.size());
        for (std::size_t s = 0; s < stages.size(); ++s) {
            EXPECT_EQ(stages[s].first_unit, std::get<0>(expect[s]));
            EXPECT_EQ(stages[s].end_unit, std::get<1>(expect[s]));
            EXPECT_EQ(stages[s].component, std::get<2>(expect[s]));
            if (s > 0) EXPECT_NE(stages[s].component, stages[s - 1].component);
        }
    }
}

TEST(StageWork, DivisionAndTransfer) {
    const auto p = flat_platform(2, 1e7, 0.0, 4e6);
    const auto one = chain("one", {1'000'000});
    const Stage s{0, 1, 0};
    EXPECT_DOUBLE_EQ(stage_work(one, s, nullptr, p), 0.1);

    // Boundary ofm volume 1e6 elements = 4e6 bytes over 4e6 B/s.
    const auto two = chain("two", {1'000'000, 1'000'000});
    const auto stages = derive_stages(two, std::vector<int>{0, 1});
    ASSERT_EQ(stages.size(), 2u);
    EXPECT_DOUBLE_EQ(stage_work(two, stages[0], nullptr, p), 0.1);
    EXPECT_DOUBLE_EQ(stage_work(two, stages[1], &stages[0], p), 0.1 + 1.0);
}

TEST(StageWork, OverheadPerLayer) {
    const auto p = flat_platform(1, 1e6, 0.01, 1.0);
    const auto d = chain("three", {1000, 2000, 3000});
    EXPECT_DOUBLE_EQ(stage_work(d, Stage{0, 3, 0}, nullptr, p), 0.006 + 0.03);
}

TEST(Simulate, ClosedFormCases) {
    const auto p = flat_platform(3, 1e6, 0.0, 1e9);
    const Workload one{chain("a", {250'000})};
    EXPECT_DOUBLE_EQ(simulate_throughput(one, Mapping{{{0}}}, p).throughput[0], 4.0);

    const Workload two{chain("a", {100'000}), chain("b", {100'000})};
    const auto r = simulate_throughput(two, Mapping{{{1}, {1}}}, p);
    EXPECT_DOUBLE_EQ(r.throughput[0], 5.0);
    EXPECT_DOUBLE_EQ(r.throughput[1], 5.0);
    EXPECT_EQ(r.residents, (std::vector<int>{0, 2, 0}));
}

TEST(Simulate, IsolatedDnnsMatchStandaloneRuns) {
    const auto& p = bundled_platform();
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const auto w = priomap::testing::random_zoo_workload(3, rng);
        std::vector<int> comps{0, 1, 2};
        std::shuffle(comps.begin(), comps.end(), rng);
        Mapping m;
        for (std::size_t i = 0; i < 3; ++i) {
            m.assignments.emplace_back(static_cast<std::size_t>(w[i].partition_units()), comps[i]);
        }
        const auto r = simulate_throughput(w, m, p);
        for (std::size_t i = 0; i < 3; ++i) {
            const Workload alone{w[i]};
            const auto ri = simulate_throughput(alone, Mapping{{m.assignments[i]}}, p);
            EXPECT_EQ(r.throughput[i], ri.throughput[0]);
            // Single stage: 1 / w exactly.
            const auto st = derive_stages(w[i], m.assignments[i]);
            EXPECT_EQ(r.throughput[i], 1.0 / stage_work(w[i], st[0], nullptr, p));
        }
    }
}

TEST(Simulate, EmptyWorkload) {
    const auto r = simulate_throughput({}, Mapping{}, bundled_platform());
    EXPECT_TRUE(r.throughput.empty());
}

TEST(IdealThroughput, CalibratedZooMatchesPublishedValues) {
    const auto& p = bundled_platform();
    const std::vector<std::pair<const char*, double>> published{
        {"inception-resnet-like", 4.0}, {"alexnet-like", 43.0}, {"squeezenet-like", 67.0}, {"resnet50-like", 20.0}};
    for (const auto& [name, value] : published) {
        const double t = ideal_throughput(find_dnn(bundled_zoo(), name), p);
        EXPECT_NEAR(t, value, 0.01 * value) << name;
    }
}

TEST(IdealThroughput, BundledPlatformHasPositiveOverheads) {
    for (const auto& c : bundled_platform().component_specs()) EXPECT_GT(c.per_layer_overhead, 0.0) << c.name;
}

TEST(IdealThroughput, MissingReferenceIsConfigError) {
    Platform p("noref", {flat_component("a", 1e9, 1e-4)}, {{0.0}}, std::nullopt);
    EXPECT_THROW(ideal_throughput(bundled_zoo().front(), p), ConfigError);
    EXPECT_THROW(baseline_all_gpu(Workload{bundled_zoo().front()}, p), ConfigError);
}

TEST(IdealThroughput, ConcurrentMappingsNeverBeatIdeal) {
    const auto& p = bundled_platform();
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto w = priomap::testing::random_zoo_workload(2 + rng() % 4, rng);
        const auto m = priomap::testing::random_mapping(w, p.components(), rng);
        const auto r = simulate_throughput(w, m, p);
        const auto ideals = ideal_throughputs(w, p);
        for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(r.throughput[i], ideals[i]) << trial << " " << w[i].name();
    }
}

TEST(Baseline, EqualShareOnReference) {
    const auto p = flat_platform(3, 1e6, 0.0, 1e9);
    for (int n = 1; n <= 5; ++n) {
        Workload w(static_cast<std::size_t>(n), chain("a", {200'000}));
        const auto b = baseline_all_gpu(w, p);
        for (double t : b.report.throughput) EXPECT_DOUBLE_EQ(t, 1.0 / (n * 0.2));
    }
    const Workload single{find_dnn(bundled_zoo(), "vgg16-like")};
    EXPECT_EQ(baseline_all_gpu(single, bundled_platform()).report.throughput[0],
              ideal_throughput(single[0], bundled_platform()));
}

TEST(SolutionSpace, Counts) {
    const auto w = priomap::testing::zoo_workload({"alexnet-like", "mobilenet-like", "resnet50-like", "shufflenet-like"});
    const auto n = count_solution_space(w, bundled_platform());
    EXPECT_EQ(n.str(), "3433683820292512484657849089281");  // 3^64
    EXPECT_EQ(count_solution_space(Workload{chain("a", {1})}, bundled_platform()), 3);
    EXPECT_EQ(count_solution_space({}, bundled_platform()), 1);
}

TEST(PlatformJson, RoundTripAndValidation) {
    const auto& p = bundled_platform();
    const auto again = parse_platform(platform_to_json(p));
    EXPECT_EQ(again.components(), 3);
    EXPECT_EQ(again.reference_component(), p.reference_component());
    for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(again.component(c).rate, p.component(c).rate);
        for (int e = 0; e < 3; ++e) EXPECT_EQ(again.bandwidth(c, e), p.bandwidth(c, e));
    }
    EXPECT_THROW(parse_platform(R"({"components":[{"name":"a","rates":{"default":0}}],"bandwidth":[[0]]})"), ConfigError);
    EXPECT_THROW(parse_platform(R"({"components":[{"name":"a","rates":{"default":1}},{"name":"b","rates":{"default":1}}],"bandwidth":[[0,1],[2,0]]})"),
                 ConfigError);
    EXPECT_THROW(parse_platform(R"({"components":[{"name":"a","rates":{"warp":1}}],"bandwidth":[[0]]})"), ConfigError);
}
