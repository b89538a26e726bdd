// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "priomap/platform.hpp"

namespace priomap {

inline constexpr double kStarvationEps = 0.01;

struct ThroughputSummary {
    double raw = 0.0;         // mean inferences/s over slots
    double normalized = 0.0;  // raw / baseline raw
};

/// Throws StructuralError on a slot-count mismatch and InvalidArgument on a
/// zero baseline.
ThroughputSummary normalized_throughput(const ThroughputReport& report, const ThroughputReport& baseline);

/// t_current / t_ideal per slot.
std::vector<double> potential_throughput(const ThroughputReport& report, std::span<const double> ideals);

struct Starvation {
    std::vector<bool> flags;
    int count = 0;
};

/// A slot is starved when its potential throughput is below `eps`.
Starvation starvation_count(std::span<const double> potential, double eps = kStarvationEps);

/// Sample Pearson correlation; nullopt when either vector is constant.
/// Throws InvalidArgument for fewer than two pairs or unequal lengths.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct MetricsReport {
    double t_raw = 0.0;
    double t_norm = 0.0;
    std::vector<double> potential;
    std::vector<bool> starved;
    std::optional<double> pearson_r;
};

/// Pearson r is left undefined for single-DNN workloads.
MetricsReport compute_metrics(const ThroughputReport& report, const ThroughputReport& baseline,
                              std::span<const double> ideals, std::span<const double> priorities,
                              double eps = kStarvationEps);

struct MetricsRow {
    std::string mix;
    std::string manager;
    MetricsReport metrics;
};

/// Columns: mix, manager, t_raw, t_norm, p0..p4, starved0..starved4,
/// pearson_r. Unused slots and undefined r are empty cells.
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

}  // namespace priomap
