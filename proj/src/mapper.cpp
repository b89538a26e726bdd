// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include "priomap/mapper.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include "priomap/error.hpp"

namespace priomap {

PriorityVector normalize_priorities(std::span<const double> weights) {
    if (weights.empty()) throw InvalidArgument("priority vector is empty");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("priorities must be finite and >= 0");
        sum += w;
    }
    if (!(sum > 0.0)) throw InvalidArgument("priorities sum to zero");
    PriorityVector p(weights.begin(), weights.end());
    for (double& x : p) x /= sum;
    return p;
}

PriorityVector static_priorities(int slot, double high, int n) {
    if (n < 1) throw InvalidArgument("workload is empty");
    if (slot < 0 || slot >= n) throw InvalidArgument("slot " + std::to_string(slot) + " out of range");
    if (n == 1) {
        if (high != 1.0) throw InvalidArgument("a single DNN must have priority 1");
        return {1.0};
    }
    if (!(high >= 1.0 / n) || !(high < 1.0)) {
        throw InvalidArgument("high priority must lie in [1/n, 1)");
    }
    PriorityVector p(static_cast<std::size_t>(n), (1.0 - high) / (n - 1));
    p[static_cast<std::size_t>(slot)] = high;
    return p;
}

PriorityVector dynamic_priorities(const Workload& workload) {
    if (workload.empty()) throw InvalidArgument("workload is empty");
    std::vector<double> macs;
    for (const auto& d : workload) macs.push_back(static_cast<double>(d.total_macs()));
    if (std::all_of(macs.begin(), macs.end(), [](double m) { return m == 0.0; })) {
        return PriorityVector(workload.size(), 1.0 / static_cast<double>(workload.size()));
    }
    return normalize_priorities(macs);
}

void SearchConfig::validate() const {
    if (budget < 1) throw InvalidArgument("budget must be >= 1");
    if (!(threshold >= 0.0)) throw InvalidArgument("threshold must be >= 0");
    if (!(uct_c >= 0.0)) throw InvalidArgument("uct_c must be >= 0");
    if (fallback_samples < 0) throw InvalidArgument("fallback_samples must be >= 0");
    if (!(rollout_stickiness >= 0.0 && rollout_stickiness < 1.0)) {
        throw InvalidArgument("rollout_stickiness must lie in [0, 1)");
    }
}

std::vector<double> slot_thresholds(const SearchConfig& config, std::span<const double> ideals) {
    std::vector<double> th(ideals.size(), config.threshold);
    if (config.threshold_mode == ThresholdMode::fraction) {
        for (std::size_t i = 0; i < th.size(); ++i) th[i] = config.threshold * ideals[i];
    }
    return th;
}

RewardResult reward(const ThroughputReport& report, std::span<const double> priorities,
                    std::span<const double> ideals, std::span<const double> thresholds,
                    double fail_reward) {
    const auto n = report.throughput.size();
    if (priorities.size() != n || ideals.size() != n || thresholds.size() != n) {
        throw StructuralError("reward inputs disagree on slot count");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (report.throughput[i] <= thresholds[i]) return {fail_reward, false};
        sum += priorities[i] * report.throughput[i] / ideals[i];
    }
    return {sum, true};
}

double min_normalized(const ThroughputReport& report, std::span<const double> ideals) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < report.throughput.size(); ++i) {
        m = std::min(m, report.throughput[i] / ideals[i]);
    }
    return m;
}

namespace {

struct Decision {
    int slot;
    int unit;
};

std::vector<Decision> decision_sequence(const Workload& workload, DecisionOrder order) {
    std::vector<Decision> seq;
    if (order == DecisionOrder::dnn_major) {
        for (std::size_t i = 0; i < workload.size(); ++i) {
            for (int u = 0; u < workload[i].partition_units(); ++u) seq.push_back({static_cast<int>(i), u});
        }
        return seq;
    }
    int deepest = 0;
    for (const auto& d : workload) deepest = std::max(deepest, d.partition_units());
    for (int u = 0; u < deepest; ++u) {
        for (std::size_t i = 0; i < workload.size(); ++i) {
            if (u < workload[i].partition_units()) seq.push_back({static_cast<int>(i), u});
        }
    }
    return seq;
}

// Scores mappings and remembers the best qualified one and the best by
// smallest normalized throughput.
class Scorer {
public:
    Scorer(const Workload& workload, const ThroughputEstimator& estimator,
           std::span<const double> priorities, const SearchConfig& config)
        : workload_(workload),
          estimator_(estimator),
          priorities_(priorities.begin(), priorities.end()),
          config_(config),
          ideals_(ideal_throughputs(workload, estimator.platform())),
          thresholds_(slot_thresholds(config, ideals_)) {
        if (priorities_.size() != workload.size()) {
            throw StructuralError("priority vector length does not match the workload");
        }
    }

    RewardResult score(const Mapping& mapping) {
        auto report = estimator_.estimate(workload_, mapping);
        ++evaluations_;
        const auto r = reward(report, priorities_, ideals_, thresholds_, config_.fail_reward);
        best_seen_ = std::max(best_seen_, r.value);
        if (r.qualified && (!best_ || r.value > best_->reward)) {
            best_ = SearchResult{mapping, report, r.value, true, false, 0, {}, 0};
        }
        const double m = min_normalized(report, ideals_);
        if (!maximin_ || m > maximin_score_) {
            maximin_ = mapping;
            maximin_score_ = m;
        }
        return r;
    }

    const std::vector<double>& ideals() const { return ideals_; }
    const std::vector<double>& thresholds() const { return thresholds_; }
    std::int64_t evaluations() const { return evaluations_; }
    double best_seen() const { return best_seen_; }
    std::optional<SearchResult>& best() { return best_; }
    const std::optional<Mapping>& maximin() const { return maximin_; }

private:
    const Workload& workload_;
    const ThroughputEstimator& estimator_;
    std::vector<double> priorities_;
    const SearchConfig& config_;
    std::vector<double> ideals_;
    std::vector<double> thresholds_;
    std::int64_t evaluations_ = 0;
    double best_seen_ = -std::numeric_limits<double>::infinity();
    std::optional<SearchResult> best_;
    std::optional<Mapping> maximin_;
    double maximin_score_ = 0.0;
};

struct Node {
    std::int64_t visits = 0;
    double total = 0.0;
    bool exhausted = false;
};

}  // namespace

SearchResult mcts_search(const Workload& workload, const ThroughputEstimator& estimator,
                         std::span<const double> priorities, const SearchConfig& config,
                         SearchTree* tree) {
    config.validate();
    if (workload.empty()) throw InvalidArgument("workload is empty");
    const int d = estimator.platform().components();
    const auto seq = decision_sequence(workload, config.order);
    const auto depth_max = seq.size();

    Scorer scorer(workload, estimator, priorities, config);
    std::mt19937_64 rng(config.seed);
    std::uniform_int_distribution<int> pick_component(0, d - 1);
    std::bernoulli_distribution stick(config.rollout_stickiness);

    std::vector<Node> nodes(1);
    std::vector<std::int32_t> children(static_cast<std::size_t>(d), -1);
    auto child_slot = [&](std::int32_t node, int c) -> std::int32_t& {
        return children[static_cast<std::size_t>(node) * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
    };
    auto add_child = [&](std::int32_t parent, int c) {
        const auto id = static_cast<std::int32_t>(nodes.size());
        nodes.emplace_back();
        children.resize(children.size() + static_cast<std::size_t>(d), -1);
        child_slot(parent, c) = id;
        return id;
    };

    Mapping mapping = uniform_mapping(workload, 0);
    std::vector<std::int32_t> path;
    SearchResult result;
    result.trace.reserve(static_cast<std::size_t>(config.budget));

    for (int iter = 0; iter < config.budget && !nodes[0].exhausted; ++iter) {
        path.assign(1, 0);
        std::int32_t node = 0;
        std::size_t depth = 0;
        auto assign = [&](int c) {
            const auto& dec = seq[depth];
            mapping.assignments[static_cast<std::size_t>(dec.slot)][static_cast<std::size_t>(dec.unit)] = c;
        };

        // Selection down to the first node with an unexpanded child.
        bool expanded = false;
        while (depth < depth_max && !expanded) {
            int choice = -1;
            for (int c = 0; c < d; ++c) {
                if (child_slot(node, c) < 0) {
                    choice = c;
                    break;
                }
            }
            if (choice >= 0) {
                node = add_child(node, choice);
                expanded = true;
            } else {
                const double log_parent = std::log(static_cast<double>(nodes[static_cast<std::size_t>(node)].visits));
                double best = -std::numeric_limits<double>::infinity();
                for (int c = 0; c < d; ++c) {
                    const auto& ch = nodes[static_cast<std::size_t>(child_slot(node, c))];
                    if (ch.exhausted) continue;
                    const double n = static_cast<double>(ch.visits);
                    const double value = ch.total / n + config.uct_c * std::sqrt(log_parent / n);
                    if (value > best) {
                        best = value;
                        choice = c;
                    }
                }
                node = child_slot(node, choice);
            }
            assign(choice);
            path.push_back(node);
            ++depth;
        }

        // Random completion, recorded in the tree.
        while (depth < depth_max) {
            const auto& dec = seq[depth];
            int c = 0;
            if (dec.unit > 0 && config.rollout_stickiness > 0.0 && stick(rng)) {
                c = mapping.assignments[static_cast<std::size_t>(dec.slot)][static_cast<std::size_t>(dec.unit - 1)];
            } else {
                c = pick_component(rng);
            }
            node = add_child(node, c);
            assign(c);
            path.push_back(node);
            ++depth;
        }

        const double r = scorer.score(mapping).value;
        for (auto id : path) {
            auto& n = nodes[static_cast<std::size_t>(id)];
            ++n.visits;
            n.total += r;
        }
        nodes[static_cast<std::size_t>(path.back())].exhausted = true;
        for (auto it = path.rbegin() + 1; it != path.rend(); ++it) {
            bool all = true;
            for (int c = 0; c < d && all; ++c) {
                const auto ch = child_slot(*it, c);
                all = ch >= 0 && nodes[static_cast<std::size_t>(ch)].exhausted;
            }
            if (!all) break;
            nodes[static_cast<std::size_t>(*it)].exhausted = true;
        }
        result.trace.push_back(scorer.best_seen());
    }
    if (tree) {
        tree->branching = d;
        tree->visits.clear();
        tree->totals.clear();
        for (const auto& n : nodes) {
            tree->visits.push_back(n.visits);
            tree->totals.push_back(n.total);
        }
        tree->children = children;
    }

    if (scorer.best()) {
        auto trace = std::move(result.trace);
        result = std::move(*scorer.best());
        result.trace = std::move(trace);
        result.evaluations = scorer.evaluations();
        result.tree_nodes = static_cast<std::int64_t>(nodes.size());
        return result;
    }
    std::vector<Mapping> seen;
    if (scorer.maximin()) seen.push_back(*scorer.maximin());
    auto fb = maximin_fallback(workload, estimator, config, seen);
    const auto r = reward(fb.report, priorities, scorer.ideals(), scorer.thresholds(), config.fail_reward);
    fb.reward = r.value;
    fb.qualified = r.qualified;
    fb.trace = std::move(result.trace);
    fb.evaluations += scorer.evaluations();
    fb.tree_nodes = static_cast<std::int64_t>(nodes.size());
    return fb;
}

SearchResult exhaustive_search(const Workload& workload, const ThroughputEstimator& estimator,
                               std::span<const double> priorities, const SearchConfig& config) {
    config.validate();
    if (workload.empty()) throw InvalidArgument("workload is empty");
    const auto space = count_solution_space(workload, estimator.platform());
    if (space > kExhaustiveLimit) {
        throw InvalidArgument("solution space has " + space.str() + " mappings; exhaustive search is limited to " +
                              std::to_string(kExhaustiveLimit));
    }
    const int d = estimator.platform().components();
    const auto seq = decision_sequence(workload, DecisionOrder::dnn_major);
    Scorer scorer(workload, estimator, priorities, config);

    Mapping mapping = uniform_mapping(workload, 0);
    std::optional<SearchResult> best;
    std::vector<int> digits(seq.size(), 0);
    while (true) {
        const auto r = scorer.score(mapping);
        if (!best || (r.qualified && !best->qualified) || (r.qualified == best->qualified && r.value > best->reward)) {
            best = SearchResult{mapping, {}, r.value, r.qualified, false, 0, {}, 0};
        }
        // Odometer with the first decision most significant keeps the scan
        // in lexicographic order, so strict improvement keeps the smallest.
        std::size_t k = seq.size();
        while (k > 0) {
            --k;
            auto& a = mapping.assignments[static_cast<std::size_t>(seq[k].slot)][static_cast<std::size_t>(seq[k].unit)];
            if (++digits[k] < d) {
                a = digits[k];
                break;
            }
            digits[k] = 0;
            a = 0;
            if (k == 0) {
                k = seq.size() + 1;
                break;
            }
        }
        if (k == seq.size() + 1) break;
    }
    best->report = estimator.estimate(workload, best->mapping);
    best->evaluations = scorer.evaluations();
    return *best;
}

SearchResult maximin_fallback(const Workload& workload, const ThroughputEstimator& estimator,
                              const SearchConfig& config, std::span<const Mapping> candidates) {
    config.validate();
    if (workload.empty()) throw InvalidArgument("workload is empty");
    const int d = estimator.platform().components();
    const auto ideals = ideal_throughputs(workload, estimator.platform());
    const auto thresholds = slot_thresholds(config, ideals);
    const PriorityVector uniform(workload.size(), 1.0 / static_cast<double>(workload.size()));

    std::optional<SearchResult> best;
    double best_min = 0.0;
    std::int64_t evaluations = 0;
    auto consider = [&](const Mapping& m) {
        auto report = estimator.estimate(workload, m);
        ++evaluations;
        const double score = min_normalized(report, ideals);
        if (!best || score > best_min) {
            best = SearchResult{m, std::move(report), 0.0, false, true, 0, {}, 0};
            best_min = score;
        }
    };
    for (const auto& m : candidates) consider(m);

    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_int_distribution<int> pick_component(0, d - 1);
    Mapping m = uniform_mapping(workload, 0);
    for (int s = 0; s < config.fallback_samples; ++s) {
        for (auto& a : m.assignments) {
            for (auto& c : a) c = pick_component(rng);
        }
        consider(m);
    }
    if (!best) consider(uniform_mapping(workload, estimator.platform().reference()
                                                      ? estimator.platform().reference_component()
                                                      : 0));

    const auto r = reward(best->report, uniform, ideals, thresholds, config.fail_reward);
    best->reward = r.value;
    best->qualified = r.qualified;
    best->report.fallback = true;
    best->evaluations = evaluations;
    return *best;
}

SearchResult evaluate_mapping(const Workload& workload, const ThroughputEstimator& estimator,
                              std::span<const double> priorities, const SearchConfig& config,
                              Mapping mapping) {
    config.validate();
    if (priorities.size() != workload.size()) throw StructuralError("priority vector length does not match the workload");
    const auto ideals = ideal_throughputs(workload, estimator.platform());
    SearchResult r;
    r.report = estimator.estimate(workload, mapping);
    const auto score = reward(r.report, priorities, ideals, slot_thresholds(config, ideals), config.fail_reward);
    r.mapping = std::move(mapping);
    r.reward = score.value;
    r.qualified = score.qualified;
    r.evaluations = 1;
    return r;
}

Mapping uniform_random_mapping(const Workload& workload, int components, std::uint64_t seed) {
    if (components < 1) throw InvalidArgument("need at least one component");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, components - 1);
    Mapping m = uniform_mapping(workload, 0);
    for (auto& a : m.assignments) {
        for (auto& c : a) c = pick(rng);
    }
    return m;
}

SearchResult greedy_throughput_search(const Workload& workload, const ThroughputEstimator& estimator,
                                      std::span<const double> priorities, const SearchConfig& config) {
    if (workload.empty()) throw InvalidArgument("workload is empty");
    const int d = estimator.platform().components();
    auto total = [](const ThroughputReport& r) { return std::accumulate(r.throughput.begin(), r.throughput.end(), 0.0); };
    Mapping m = uniform_mapping(workload, estimator.platform().reference_component());
    double best = total(estimator.estimate(workload, m));
    std::int64_t evaluations = 1;
    for (bool changed = true; changed;) {
        changed = false;
        for (auto& a : m.assignments) {
            for (auto& unit : a) {
                const int kept = unit;
                int choice = kept;
                for (int c = 0; c < d; ++c) {
                    if (c == kept) continue;
                    unit = c;
                    const double t = total(estimator.estimate(workload, m));
                    ++evaluations;
                    if (t > best) {
                        best = t;
                        choice = c;
                    }
                }
                unit = choice;
                changed = changed || choice != kept;
            }
        }
    }
    auto r = evaluate_mapping(workload, estimator, priorities, config, std::move(m));
    r.evaluations = evaluations + 1;
    return r;
}

}  // namespace priomap
