// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "priomap/estimator.hpp"
#include "priomap/platform.hpp"
#include "priomap/workload.hpp"

namespace priomap {

/// Non-negative per-slot weights summing to 1.
using PriorityVector = std::vector<double>;

/// `slot` gets `high`; the remaining mass is split equally. Requires
/// 1/n <= high < 1, or high == 1 when n == 1.
PriorityVector static_priorities(int slot, double high, int n);

/// Proportional to each DNN's total MACs; uniform when every DNN has none.
PriorityVector dynamic_priorities(const Workload& workload);

/// Rescales non-negative weights to sum to 1.
PriorityVector normalize_priorities(std::span<const double> weights);

enum class ThresholdMode { absolute, fraction };

/// Order in which unit assignments are decided.
enum class DecisionOrder {
    dnn_major,   // all units of slot 0, then slot 1, ...
    interleaved  // unit 0 of every slot, then unit 1, ...
};

struct SearchConfig {
    ThresholdMode threshold_mode = ThresholdMode::fraction;
    /// Inferences/s in absolute mode, fraction of t_ideal in fraction mode.
    double threshold = 0.05;
    int budget = 2000;
    double uct_c = std::sqrt(2.0);
    std::uint64_t seed = 0;
    double fail_reward = -1.0;
    /// Fresh random mappings scored by the maximin fallback.
    int fallback_samples = 500;
    DecisionOrder order = DecisionOrder::dnn_major;
    /// Probability that a random completion keeps a unit on the component of
    /// the previous unit of the same DNN; 0 gives uniform completions.
    double rollout_stickiness = 0.98;

    void validate() const;
};

/// Per-slot minimum throughput in inferences/s.
std::vector<double> slot_thresholds(const SearchConfig& config, std::span<const double> ideals);

struct RewardResult {
    double value = 0.0;
    bool qualified = false;
};

/// Disqualified (fail_reward) if any slot's throughput is <= its threshold,
/// otherwise sum of p_i * t_i / t_ideal_i.
RewardResult reward(const ThroughputReport& report, std::span<const double> priorities,
                    std::span<const double> ideals, std::span<const double> thresholds,
                    double fail_reward = -1.0);

struct SearchResult {
    Mapping mapping;
    ThroughputReport report;
    double reward = 0.0;
    bool qualified = false;
    bool fallback = false;
    /// Mappings scored by the estimator.
    std::int64_t evaluations = 0;
    /// Best reward seen after each iteration (MCTS only).
    std::vector<double> trace;
    /// Tree size at the end of the search (MCTS only).
    std::int64_t tree_nodes = 0;
};

/// Final search tree: node 0 is the root, children[node * branching + c] is
/// the child for component c or -1.
struct SearchTree {
    int branching = 0;
    std::vector<std::int64_t> visits;
    std::vector<double> totals;
    std::vector<std::int32_t> children;
};

/// UCT tree search over unit assignments. Every iteration selects, expands
/// one new node, completes the mapping at random and scores it; the rollout
/// path is kept in the tree so no complete mapping is scored twice. Returns
/// the best qualified mapping seen, or the maximin fallback when none
/// qualified. Stops early once every mapping has been scored.
SearchResult mcts_search(const Workload& workload, const ThroughputEstimator& estimator,
                         std::span<const double> priorities, const SearchConfig& config,
                         SearchTree* tree = nullptr);

inline constexpr std::int64_t kExhaustiveLimit = 1'000'000;

/// Scores every mapping; qualified mappings win over disqualified ones and
/// ties go to the lexicographically smallest assignment. Throws
/// InvalidArgument when the space exceeds kExhaustiveLimit.
SearchResult exhaustive_search(const Workload& workload, const ThroughputEstimator& estimator,
                               std::span<const double> priorities, const SearchConfig& config);

/// Maximizes the smallest t_i / t_ideal_i over `candidates` plus
/// config.fallback_samples seeded random mappings. The result is flagged.
SearchResult maximin_fallback(const Workload& workload, const ThroughputEstimator& estimator,
                              const SearchConfig& config, std::span<const Mapping> candidates = {});

/// Scores one fixed mapping (estimate plus reward) as a search result.
SearchResult evaluate_mapping(const Workload& workload, const ThroughputEstimator& estimator,
                              std::span<const double> priorities, const SearchConfig& config,
                              Mapping mapping);

/// Baseline: one seeded uniformly random component per unit.
Mapping uniform_random_mapping(const Workload& workload, int components, std::uint64_t seed);

/// Baseline: coordinate ascent on mean throughput starting from all units on
/// the reference component. Each pass tries every component for every unit
/// and keeps strict improvements; stops after a pass without change. The
/// reward is reported but not optimized.
SearchResult greedy_throughput_search(const Workload& workload, const ThroughputEstimator& estimator,
                                      std::span<const double> priorities, const SearchConfig& config);

/// Smallest t_i / t_ideal_i; +inf for an empty workload.
double min_normalized(const ThroughputReport& report, std::span<const double> ideals);

}  // namespace priomap
