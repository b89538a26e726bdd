// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "priomap/error.hpp"
#include "priomap/workload.hpp"
#include "test_support.hpp"

using namespace priomap;
using priomap::testing::bundled_zoo;

namespace {

LayerDescriptor conv_layer(int index, Shape4 ifm, Shape4 ofm, Shape4 w, std::int64_t b) {
    LayerDescriptor l;
    l.index = index;
    l.type = LayerType::Conv;
    l.ifm = ifm;
    l.ofm = ofm;
    l.weights = w;
    l.biases = b;
    l.activation = Activation::Relu;
    l.pad_stride = {1, 1, 1, 1, 1, 1};
    return l;
}

LayerDescriptor random_layer(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::int64_t> v(0, 300);
    LayerDescriptor l;
    l.index = static_cast<int>(v(rng) % 60);
    l.type = static_cast<LayerType>(v(rng) % kLayerTypeCount);
    for (auto& x : l.ifm) x = v(rng);
    for (auto& x : l.ofm) x = v(rng);
    for (auto& x : l.weights) x = v(rng);
    l.ifm[0] = 1 + v(rng) % 4;
    l.ofm[0] = l.ifm[0];
    l.biases = v(rng);
    l.activation = static_cast<Activation>(v(rng) % 5);
    for (auto& x : l.pad_stride) x = v(rng) % 5;
    return l;
}

}  // namespace

TEST(EncodeLayer, DegenerateLayer) {
    LayerDescriptor l;  // index 0, type other, minibatch 1, everything else zero
    const auto v = encode_layer(l);
    ASSERT_EQ(v.size(), 22u);
    const LayerVector expected{0, 7, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    EXPECT_EQ(v, expected);
}

TEST(EncodeLayer, ConvFlattensInFieldOrder) {
    LayerDescriptor l = conv_layer(0, {1, 3, 224, 224}, {1, 64, 112, 112}, {64, 3, 7, 7}, 64);
    l.pad_stride = {3, 3, 3, 3, 2, 2};
    // Hand-flattened: j, t, ifm[4], ofm[4], w[4], b, a, ps[6].
    const LayerVector expected{0,  0,  1, 3, 224, 224, 1, 64, 112, 112, 64,
                               3,  7,  7, 64, 1,  3,   3, 3,  3,   2,   2};
    EXPECT_EQ(encode_layer(l), expected);
}

TEST(EncodeLayer, IndexOnlyAffectsPositionZero) {
    auto a = conv_layer(0, {1, 3, 8, 8}, {1, 4, 8, 8}, {4, 3, 3, 3}, 4);
    auto b = a;
    b.index = 5;
    const auto va = encode_layer(a);
    const auto vb = encode_layer(b);
    EXPECT_NE(va[0], vb[0]);
    for (std::size_t k = 1; k < va.size(); ++k) EXPECT_EQ(va[k], vb[k]) << k;
}

TEST(EncodeLayer, InjectiveUnderSingleFieldChanges) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        const auto base = random_layer(rng);
        const auto vb = encode_layer(base);
        // Each position of the flattened vector is owned by exactly one field.
        for (int pos = 0; pos < kLayerFeatures; ++pos) {
            auto l = base;
            auto bump = [](auto& x) { x = x + 1; };
            if (pos == 0) bump(l.index);
            else if (pos == 1) l.type = static_cast<LayerType>((static_cast<int>(l.type) + 1) % kLayerTypeCount);
            else if (pos < 6) bump(l.ifm[static_cast<std::size_t>(pos - 2)]);
            else if (pos < 10) bump(l.ofm[static_cast<std::size_t>(pos - 6)]);
            else if (pos < 14) bump(l.weights[static_cast<std::size_t>(pos - 10)]);
            else if (pos == 14) bump(l.biases);
            else if (pos == 15) l.activation = static_cast<Activation>((static_cast<int>(l.activation) + 1) % 5);
            else bump(l.pad_stride[static_cast<std::size_t>(pos - 16)]);
            const auto v = encode_layer(l);
            for (int k = 0; k < kLayerFeatures; ++k) {
                if (k == pos) EXPECT_NE(v[static_cast<std::size_t>(k)], vb[static_cast<std::size_t>(k)]);
                else EXPECT_EQ(v[static_cast<std::size_t>(k)], vb[static_cast<std::size_t>(k)]);
            }
        }
    }
}

TEST(Macs, FullyConnected) {
    LayerDescriptor l;
    l.type = LayerType::FullyConnected;
    l.ifm = {1, 256, 6, 6};  // volume 9216
    l.ofm = {1, 4096, 1, 1};
    l.weights = {4096, 9216, 1, 1};
    EXPECT_EQ(macs_of_layer(l), std::int64_t{9216} * 4096);
    EXPECT_EQ(macs_of_layer(l), 37'748'736);
}

TEST(Macs, PoolIsOutputVolume) {
    LayerDescriptor l;
    l.type = LayerType::Pool;
    l.ifm = {1, 64, 112, 112};
    l.ofm = {1, 64, 56, 56};
    EXPECT_EQ(macs_of_layer(l), 200'704);
}

TEST(Macs, SmallConvBruteCount) {
    const auto l = conv_layer(0, {1, 1, 4, 4}, {1, 1, 4, 4}, {1, 1, 3, 3}, 1);
    // Brute force: every output pixel touches every kernel tap once.
    std::int64_t count = 0;
    for (int oy = 0; oy < 4; ++oy)
        for (int ox = 0; ox < 4; ++ox)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) ++count;
    EXPECT_EQ(macs_of_layer(l), count);
    EXPECT_EQ(macs_of_layer(l), 144);
}

TEST(DnnDescriptor, RejectsBrokenInvariants) {
    auto l0 = conv_layer(0, {1, 3, 8, 8}, {1, 4, 8, 8}, {4, 3, 3, 3}, 4);
    auto l1 = conv_layer(1, {1, 4, 8, 8}, {1, 4, 8, 8}, {4, 4, 3, 3}, 4);
    EXPECT_NO_THROW(DnnDescriptor("ok", {l0, l1}));
    EXPECT_EQ(DnnDescriptor("ok", {l0, l1}).partition_units(), 2);
    EXPECT_EQ(DnnDescriptor("ok", {l0, l1}, {0}).partition_units(), 1);

    auto gap = l1;
    gap.index = 2;
    EXPECT_THROW(DnnDescriptor("gap", {l0, gap}), ConfigError);
    EXPECT_THROW(DnnDescriptor("start", {l0, l1}, {1}), ConfigError);
    EXPECT_THROW(DnnDescriptor("order", {l0, l1}, {0, 0}), ConfigError);
    EXPECT_THROW(DnnDescriptor("beyond", {l0, l1}, {0, 2}), ConfigError);
    EXPECT_THROW(DnnDescriptor("empty", {}), ConfigError);
    auto neg = l1;
    neg.ofm[2] = -1;
    EXPECT_THROW(DnnDescriptor("neg", {l0, neg}), ConfigError);
    auto mb = l1;
    mb.ifm[0] = 0;
    EXPECT_THROW(DnnDescriptor("mb", {l0, mb}), ConfigError);
}

TEST(WorkloadTensor, EmptyWorkloadIsZero) {
    RawLayerEmbedding raw;
    const auto q = build_workload_tensor({}, Mapping{}, raw, 3);
    EXPECT_TRUE(std::all_of(q.data().begin(), q.data().end(), [](double v) { return v == 0.0; }));
}

TEST(WorkloadTensor, SingleComponentMapping) {
    RawLayerEmbedding raw;
    auto l0 = conv_layer(0, {1, 3, 8, 8}, {1, 4, 8, 8}, {4, 3, 3, 3}, 4);
    auto l1 = conv_layer(1, {1, 4, 8, 8}, {1, 4, 8, 8}, {4, 4, 3, 3}, 4);
    Workload w{DnnDescriptor("two", {l0, l1})};
    const auto q = build_workload_tensor(w, Mapping{{{0, 0}}}, raw, 3);
    for (int ch = 0; ch < kMaxSlots; ++ch) {
        for (int r = 0; r < kMaxLayers; ++r) {
            if (ch == 0 && r < 2) {
                EXPECT_EQ(q.nonzero_block(ch, r), 0);
                const auto enc = encode_layer(r == 0 ? l0 : l1);
                auto row = q.row(ch, r);
                EXPECT_TRUE(std::equal(enc.begin(), enc.end(), row.begin()));
            } else {
                EXPECT_TRUE(q.row_is_zero(ch, r)) << ch << "," << r;
            }
        }
    }
}

TEST(WorkloadTensor, AtMostOneBlockPerRowAndEmptySlotsZero) {
    std::mt19937_64 rng(11);
    RawLayerEmbedding raw;
    for (int trial = 0; trial < 50; ++trial) {
        const auto n = 1 + rng() % kMaxSlots;
        const auto w = priomap::testing::random_zoo_workload(n, rng);
        const auto m = priomap::testing::random_mapping(w, 3, rng);
        const auto q = build_workload_tensor(w, m, raw, 3);
        for (int ch = 0; ch < kMaxSlots; ++ch) {
            EXPECT_EQ(q.channel_is_zero(ch), ch >= static_cast<int>(n));
            for (int r = 0; r < kMaxLayers; ++r) {
                int nonzero_blocks = 0;
                auto row = q.row(ch, r);
                for (int b = 0; b < 3; ++b) {
                    auto blk = row.subspan(static_cast<std::size_t>(b * kLayerFeatures), kLayerFeatures);
                    nonzero_blocks += std::any_of(blk.begin(), blk.end(), [](double v) { return v != 0.0; });
                }
                EXPECT_LE(nonzero_blocks, 1);
                if (ch < static_cast<int>(n) && r < w[static_cast<std::size_t>(ch)].layer_count()) {
                    const auto& dnn = w[static_cast<std::size_t>(ch)];
                    EXPECT_EQ(q.nonzero_block(ch, r),
                              m.assignments[static_cast<std::size_t>(ch)][static_cast<std::size_t>(dnn.unit_of_layer(r))]);
                }
            }
        }
    }
}

TEST(WorkloadTensor, SlotPermutationPermutesChannels) {
    std::mt19937_64 rng(5);
    RawLayerEmbedding raw;
    for (int trial = 0; trial < 30; ++trial) {
        const auto w = priomap::testing::random_zoo_workload(4, rng);
        const auto m = priomap::testing::random_mapping(w, 3, rng);
        std::vector<std::size_t> perm(4);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Workload pw;
        Mapping pm;
        for (auto k : perm) {
            pw.push_back(w[k]);
            pm.assignments.push_back(m.assignments[k]);
        }
        const auto q = build_workload_tensor(w, m, raw, 3);
        const auto pq = build_workload_tensor(pw, pm, raw, 3);
        for (std::size_t i = 0; i < 4; ++i) {
            auto a = pq.channel_data(static_cast<int>(i));
            auto b = q.channel_data(static_cast<int>(perm[i]));
            EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
        }
        EXPECT_TRUE(pq.channel_is_zero(4));
    }
}

TEST(WorkloadTensor, StructuralErrors) {
    RawLayerEmbedding raw;
    const auto w = priomap::testing::zoo_workload({"alexnet-like"});
    EXPECT_THROW(build_workload_tensor(w, Mapping{}, raw, 3), StructuralError);
    EXPECT_THROW(build_workload_tensor(w, Mapping{{std::vector<int>(3, 0)}}, raw, 3), StructuralError);
    EXPECT_THROW(build_workload_tensor(w, Mapping{{std::vector<int>(8, 3)}}, raw, 3), StructuralError);
    Workload six(6, w.front());
    EXPECT_THROW(build_workload_tensor(six, uniform_mapping(six, 0), raw, 3), StructuralError);
}

TEST(ModelZoo, BundledZooInvariants) {
    const auto& zoo = bundled_zoo();
    ASSERT_GE(zoo.size(), 8u);
    EXPECT_EQ(find_dnn(zoo, "alexnet-like").partition_units(), 8);
    for (const auto& d : zoo) {
        EXPECT_GE(d.partition_units(), 1);
        EXPECT_LE(d.partition_units(), d.layer_count());
        EXPECT_LE(d.layer_count(), kMaxLayers) << d.name();
        std::int64_t by_unit = 0;
        for (int u = 0; u < d.partition_units(); ++u) by_unit += d.unit_macs(u);
        EXPECT_EQ(by_unit, d.total_macs()) << d.name();
        for (int j = 0; j < d.layer_count(); ++j) {
            EXPECT_EQ(d.layers()[static_cast<std::size_t>(j)].index, j);
        }
    }
    // Units of the example mix in the mapping-space discussion.
    EXPECT_EQ(find_dnn(zoo, "mobilenet-like").partition_units(), 20);
    EXPECT_EQ(find_dnn(zoo, "resnet50-like").partition_units(), 18);
    EXPECT_EQ(find_dnn(zoo, "shufflenet-like").partition_units(), 18);
}

TEST(ModelZoo, RoundTripsThroughJson) {
    const auto& zoo = bundled_zoo();
    const auto again = parse_model_zoo(model_zoo_to_json(zoo));
    EXPECT_EQ(again, zoo);
}

TEST(ModelZoo, DuplicateNamesRejected) {
    const std::string doc = R"({"dnns":[
      {"name":"a","layers":[{"index":0,"type":"pool","ifm":[1,1,2,2],"ofm":[1,1,1,1]}]},
      {"name":"a","layers":[{"index":0,"type":"pool","ifm":[1,1,2,2],"ofm":[1,1,1,1]}]}]})";
    EXPECT_THROW(parse_model_zoo(doc), ConfigError);
}

TEST(ModelZoo, ParseErrorsCarryLineContext) {
    const std::string doc = "{\"dnns\": [\n  {\"name\": \"a\",\n   \"layers\": [ oops ]}]}";
    try {
        parse_model_zoo(doc, "zoo.json");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("zoo.json:3"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_model_zoo(R"({"dnns":[{"name":"a","layers":[{"index":0,"type":"warp","ifm":[1,1,1,1],"ofm":[1,1,1,1]}]}]})"),
                 ConfigError);
    EXPECT_THROW(load_model_zoo("/nonexistent/zoo.json"), ConfigError);
}

TEST(SyntheticDnn, DeterministicUnderSeed) {
    EXPECT_EQ(generate_synthetic_dnn(42, {2, 12}, {4, 64}), generate_synthetic_dnn(42, {2, 12}, {4, 64}));
    EXPECT_EQ(generate_synthetic_dnn(3, {3, 3}, {8, 8}).layer_count(), 3);
    const auto d = generate_synthetic_dnn(9, {2, 9}, {4, 16});
    EXPECT_EQ(d.partition_units(), d.layer_count());
    EXPECT_THROW(generate_synthetic_dnn(1, {3, 2}, {1, 1}), InvalidArgument);
}

namespace {

// Independent MAC total of the synthetic template for one choice of depth and
// conv widths: 3x3 same-padding convs on a 32x32 input, 2x2 pooling between.
std::int64_t template_macs(int depth, const std::vector<std::int64_t>& widths) {
    std::int64_t total = 0;
    std::int64_t c = 3, s = 32;
    std::size_t next = 0;
    for (int j = 0; j < depth; ++j) {
        if (j % 2 == 0) {
            const std::int64_t out = widths[next++];
            total += s * s * out * c * 9;
            c = out;
        } else {
            if (s >= 2) s /= 2;
            total += c * s * s;
        }
    }
    return total;
}

}  // namespace

TEST(SyntheticDnn, MacTotalsWithinEnumeratedTemplateBounds) {
    const IntRange depth{1, 7};
    const IntRange width{2, 5};
    std::int64_t lo = std::numeric_limits<std::int64_t>::max(), hi = 0;
    for (int n = depth.lo; n <= depth.hi; ++n) {
        const int convs = (n + 1) / 2;
        std::vector<std::int64_t> widths(static_cast<std::size_t>(convs), width.lo);
        // Odometer over every width tuple.
        while (true) {
            const auto m = template_macs(n, widths);
            lo = std::min(lo, m);
            hi = std::max(hi, m);
            std::size_t k = 0;
            while (k < widths.size() && widths[k] == width.hi) widths[k++] = width.lo;
            if (k == widths.size()) break;
            ++widths[k];
        }
    }
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto total = generate_synthetic_dnn(seed, depth, width).total_macs();
        EXPECT_GE(total, lo) << seed;
        EXPECT_LE(total, hi) << seed;
    }
}
