// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "priomap/estimator.hpp"
#include "priomap/mapper.hpp"
#include "priomap/metrics.hpp"
#include "priomap/surrogate.hpp"
#include "priomap/workload.hpp"

namespace priomap {

enum class PriorityMode {
    dynamic,         // MAC-proportional
    uniform,         // 1/n each
    static_high,     // `slot` gets `high`, the rest split equally
    static_weights,  // per-slot weights, renormalized over active slots
};

struct PrioritySetting {
    PriorityMode mode = PriorityMode::dynamic;
    int slot = 0;
    double high = 0.7;
    SlotValues weights{};

    bool operator==(const PrioritySetting&) const = default;
};

struct ScenarioEvent {
    enum class Kind { arrive, depart, set_priorities, set_threshold };

    double time = 0.0;
    Kind kind = Kind::arrive;
    std::string dnn;  // arrive
    int slot = -1;    // arrive, depart
    PrioritySetting priorities;
    ThresholdMode threshold_mode = ThresholdMode::fraction;
    double threshold = 0.0;

    bool operator==(const ScenarioEvent&) const = default;
};

/// Events sorted by time; events sharing a time take effect together.
struct ScenarioScript {
    std::string name;
    PrioritySetting initial_priorities;
    /// End of the last interval; the last event time when absent.
    std::optional<double> end;
    std::vector<ScenarioEvent> events;

    bool operator==(const ScenarioScript&) const = default;
};

/// Throws ScriptError (with the event index) for malformed events, unknown
/// kinds, out-of-range slots or decreasing times, ConfigError otherwise.
ScenarioScript parse_scenario(std::string_view json_text);
ScenarioScript load_scenario(const std::filesystem::path& path);
nlohmann::json to_json(const ScenarioScript& script);

/// Copy of `script` whose every priority setting is uniform.
ScenarioScript with_uniform_priorities(const ScenarioScript& script);

/// One steady-state interval between two event times. Slot-indexed arrays
/// are empty/zero for inactive slots.
struct IntervalRecord {
    double start = 0.0;
    double end = 0.0;
    std::array<std::string, kMaxSlots> dnn;
    SlotMask active{};
    std::array<std::vector<int>, kMaxSlots> assignment;
    SlotValues priority{};
    SlotValues throughput{};  // inferences/s, simulated
    SlotValues potential{};   // throughput / t_ideal
    SlotMask starved{};
    double reward = 0.0;
    bool qualified = false;
    bool fallback = false;
    std::int64_t evaluations = 0;
    /// Wall-clock search time; informational, excluded from replay equality.
    double search_seconds = 0.0;

    int active_count() const;
    Workload workload(std::span<const DnnDescriptor> zoo) const;
    Mapping mapping() const;
    /// Equality of everything except search_seconds.
    bool same_outcome(const IntervalRecord& other) const;
    bool operator==(const IntervalRecord&) const = default;
};

struct ScenarioTrace {
    std::string name;
    std::vector<IntervalRecord> intervals;

    bool same_outcome(const ScenarioTrace& other) const;
    bool operator==(const ScenarioTrace&) const = default;
};

struct ManagerConfig {
    SearchConfig search;
    double starvation_eps = kStarvationEps;
};

/// Replays `script`: after every group of same-time events the active
/// workload is rebuilt, priorities recomputed, a mapping searched with
/// `estimator`, and that mapping simulated on the estimator's platform.
/// Interval k searches with seed search.seed + k. Remapping is
/// instantaneous; event times only label the intervals.
ScenarioTrace run_scenario(const ScenarioScript& script, std::span<const DnnDescriptor> zoo,
                           const ThroughputEstimator& estimator, const ManagerConfig& config);

enum class ReportFormat { csv, json };

/// One row per interval; slot columns dnn0..4, prio0..4, tput0..4, pot0..4,
/// starved0..4, map0..4 (one assignment digit per unit).
void write_trace_csv(std::ostream& out, const ScenarioTrace& trace);
nlohmann::json to_json(const ScenarioTrace& trace);
ScenarioTrace scenario_trace_from_json(const nlohmann::json& j);

/// Writes the report and returns `path`. Throws ConfigError on I/O failure.
std::filesystem::path emit_report(const ScenarioTrace& trace, ReportFormat format,
                                  const std::filesystem::path& path);
std::filesystem::path emit_report(std::span<const MetricsRow> rows, ReportFormat format,
                                  const std::filesystem::path& path);

nlohmann::json to_json(const MetricsRow& row);

}  // namespace priomap
