// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "priomap/dataset.hpp"
#include "priomap/embedding.hpp"
#include "priomap/error.hpp"
#include "test_support.hpp"

using namespace priomap;
using priomap::testing::bundled_platform;
using priomap::testing::bundled_zoo;

namespace {

const std::vector<Sample>& dataset() {
    static const auto ds = generate_dataset(bundled_zoo(), bundled_platform(), 2000, 21);
    return ds;
}

std::string key(const Sample& s) {
    std::string k;
    for (std::size_t i = 0; i < kMaxSlots; ++i) {
        k += s.dnn[i] + ":";
        for (int c : s.assignment[i]) k += std::to_string(c);
        k += "|";
    }
    return k;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("priomap_" + name);
}

}  // namespace

TEST(GenerateDataset, UniqueAndDeterministic) {
    const auto ten = generate_dataset(bundled_zoo(), bundled_platform(), 10, 1);
    ASSERT_EQ(ten.size(), 10u);
    std::set<std::string> keys;
    for (const auto& s : dataset()) keys.insert(key(s));
    EXPECT_EQ(keys.size(), dataset().size());
    EXPECT_EQ(generate_dataset(bundled_zoo(), bundled_platform(), 10, 1), ten);
    EXPECT_NE(generate_dataset(bundled_zoo(), bundled_platform(), 10, 2), ten);
    // Sample k depends only on (seed, k) unless it collides with an earlier one.
    const auto five = generate_dataset(bundled_zoo(), bundled_platform(), 5, 1);
    EXPECT_TRUE(std::equal(five.begin(), five.end(), ten.begin()));
    EXPECT_TRUE(generate_dataset(bundled_zoo(), bundled_platform(), 0, 1).empty());
    EXPECT_THROW(generate_dataset(bundled_zoo(), bundled_platform(), -1, 1), InvalidArgument);
}

TEST(GenerateDataset, SampleStructure) {
    std::array<int, kMaxSlots + 1> by_count{};
    std::array<int, kMaxSlots> by_slot{};
    for (const auto& s : dataset()) {
        const int n = s.populated();
        ASSERT_GE(n, 1);
        ASSERT_LE(n, kMaxSlots);
        ++by_count[static_cast<std::size_t>(n)];
        for (std::size_t i = 0; i < kMaxSlots; ++i) {
            if (!s.mask[i]) {
                EXPECT_TRUE(s.dnn[i].empty());
                EXPECT_TRUE(s.assignment[i].empty());
                EXPECT_EQ(s.target[i], 0.0);
                continue;
            }
            ++by_slot[i];
            const auto& dnn = find_dnn(bundled_zoo(), s.dnn[i]);
            ASSERT_EQ(static_cast<int>(s.assignment[i].size()), dnn.partition_units());
            for (int c : s.assignment[i]) {
                EXPECT_GE(c, 0);
                EXPECT_LT(c, 3);
            }
        }
    }
    for (int n = 1; n <= kMaxSlots; ++n) EXPECT_GT(by_count[static_cast<std::size_t>(n)], 300);
    for (int c : by_slot) EXPECT_GT(c, 900);
}

TEST(GenerateDataset, TargetsReproduceBitExactly) {
    for (const auto& s : dataset()) EXPECT_EQ(simulate_targets(s, bundled_zoo(), bundled_platform()), s.target);
}

TEST(GenerateDataset, TargetRange) {
    for (const auto& s : dataset()) {
        for (std::size_t i = 0; i < kMaxSlots; ++i) {
            EXPECT_GE(s.target[i], 0.0);
            EXPECT_LE(s.target[i], 3.0);
            // Concurrent DNNs never beat their isolated reference throughput.
            if (s.populated() >= 2) EXPECT_LE(s.target[i], 1.0);
        }
    }
}

TEST(ShuffleAugment, IdentityAndInvolution) {
    const auto& s = dataset()[3];
    const std::array<int, kMaxSlots> identity{0, 1, 2, 3, 4};
    EXPECT_EQ(shuffle_augment(s, identity), s);
    const std::array<int, kMaxSlots> swap{1, 0, 2, 3, 4};
    const auto once = shuffle_augment(s, swap);
    EXPECT_EQ(once.dnn[0], s.dnn[1]);
    EXPECT_EQ(once.target[1], s.target[0]);
    EXPECT_EQ(shuffle_augment(once, swap), s);
}

TEST(ShuffleAugment, RejectsInvalidPermutations) {
    const auto& s = dataset()[0];
    EXPECT_THROW(shuffle_augment(s, std::vector<int>{0, 1, 2, 3}), InvalidArgument);
    EXPECT_THROW(shuffle_augment(s, std::vector<int>{0, 0, 2, 3, 4}), InvalidArgument);
    EXPECT_THROW(shuffle_augment(s, std::vector<int>{0, 1, 2, 3, 5}), InvalidArgument);
}

TEST(ShuffleAugment, PermutedTargetsMatchFreshSimulation) {
    std::mt19937_64 rng(8);
    std::array<int, kMaxSlots> perm{0, 1, 2, 3, 4};
    for (std::size_t i = 0; i < 200; ++i) {
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto p = shuffle_augment(dataset()[i], perm);
        const auto fresh = simulate_targets(p, bundled_zoo(), bundled_platform());
        for (std::size_t k = 0; k < kMaxSlots; ++k) EXPECT_NEAR(p.target[k], fresh[k], 1e-12);
    }
}

TEST(ShuffleAugment, AppendsPermutedCopies) {
    const std::span<const Sample> head(dataset().data(), 50);
    const auto aug = augment_with_shuffles(head, 2, 4);
    ASSERT_EQ(aug.size(), 150u);
    EXPECT_TRUE(std::equal(head.begin(), head.end(), aug.begin()));
    for (std::size_t i = 50; i < aug.size(); ++i) {
        const auto& src = head[i % 50];
        EXPECT_EQ(aug[i].populated(), src.populated());
        std::multiset<double> a(aug[i].target.begin(), aug[i].target.end());
        std::multiset<double> b(src.target.begin(), src.target.end());
        EXPECT_EQ(a, b);
    }
    EXPECT_EQ(augment_with_shuffles(head, 2, 4), aug);
    EXPECT_THROW(augment_with_shuffles(head, -1, 4), InvalidArgument);
}

TEST(SplitDataset, NinetyTenPartition) {
    const auto split = split_dataset(dataset(), 0.9, 3);
    EXPECT_EQ(split.train.size(), 1800u);
    EXPECT_EQ(split.validation.size(), 200u);
    std::set<std::string> all;
    for (const auto& s : split.train) all.insert(key(s));
    for (const auto& s : split.validation) all.insert(key(s));
    EXPECT_EQ(all.size(), 2000u);
    EXPECT_EQ(split_dataset(dataset(), 0.9, 3).validation, split.validation);
    EXPECT_THROW(split_dataset(dataset(), 1.5, 3), InvalidArgument);
}

TEST(DatasetFile, RoundTrip) {
    const auto path = temp_file("dataset_roundtrip.jsonl");
    const std::span<const Sample> head(dataset().data(), 100);
    write_dataset(path, {bundled_platform().name(), 3, 21, 0}, head);
    DatasetHeader h;
    const auto back = read_dataset(path, &h);
    EXPECT_EQ(h.platform, bundled_platform().name());
    EXPECT_EQ(h.components, 3);
    EXPECT_EQ(h.seed, 21u);
    EXPECT_EQ(h.count, 100);
    ASSERT_EQ(back.size(), 100u);
    EXPECT_TRUE(std::equal(back.begin(), back.end(), head.begin()));
    std::filesystem::remove(path);
    EXPECT_THROW(read_dataset(temp_file("missing.jsonl")), ConfigError);
}

TEST(DatasetFile, RejectsCorruptFiles) {
    const auto path = temp_file("dataset_corrupt.jsonl");
    {
        std::ofstream out(path);
        out << R"({"format":"priomap-dataset","version":1,"platform":"p","components":3,"seed":0,"count":2})" << '\n'
            << R"({"slots":[{"slot":0,"dnn":"alexnet-like","assignment":[0],"target":0.5}]})" << '\n';
    }
    EXPECT_THROW(read_dataset(path), ConfigError);
    {
        std::ofstream out(path);
        out << R"({"format":"priomap-dataset","version":1,"platform":"p","components":3,"seed":0,"count":1})" << '\n'
            << R"({"slots":[{"slot":7,"dnn":"alexnet-like","assignment":[0],"target":0.5}]})" << '\n';
    }
    EXPECT_THROW(read_dataset(path), ConfigError);
    {
        std::ofstream out(path);
        out << "not json\n";
    }
    EXPECT_THROW(read_dataset(path), ConfigError);
    std::filesystem::remove(path);
}

TEST(EmbeddingCache, MatchesWorkloadTensorRows) {
    const StandardizedLayerEmbedding emb(LayerStandardizer::fit(bundled_zoo()));
    const EmbeddingCache cache(bundled_zoo(), emb);
    const SurrogateShape shape{3, kLayerFeatures, 32};
    for (std::size_t i = 0; i < 50; ++i) {
        const auto& s = dataset()[i];
        const auto from_tensor = surrogate_input(sample_tensor(s, bundled_zoo(), emb, 3), shape);
        const auto from_cache = training_example(s, cache);
        for (std::size_t k = 0; k < kMaxSlots; ++k) {
            ASSERT_EQ(from_tensor[k].empty(), !s.mask[k]);
            EXPECT_EQ(from_tensor[k].component, from_cache.input[k].component);
            if (!s.mask[k]) continue;
            EXPECT_EQ(*from_tensor[k].rows, *from_cache.input[k].rows);
        }
    }
    EXPECT_THROW(cache.entry("no-such-net"), ConfigError);
}
