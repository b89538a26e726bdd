// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include "priomap/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "priomap/error.hpp"
#include "priomap/estimator.hpp"

namespace priomap {

namespace {

double mean_throughput(const ThroughputReport& r) {
    double sum = 0.0;
    for (double t : r.throughput) sum += t;
    return r.throughput.empty() ? 0.0 : sum / static_cast<double>(r.throughput.size());
}

}  // namespace

ThroughputSummary normalized_throughput(const ThroughputReport& report, const ThroughputReport& baseline) {
    if (report.size() != baseline.size()) throw StructuralError("report and baseline disagree on slot count");
    const double base = mean_throughput(baseline);
    if (!(base > 0.0)) throw InvalidArgument("baseline throughput is zero");
    const double raw = mean_throughput(report);
    return {raw, raw / base};
}

std::vector<double> potential_throughput(const ThroughputReport& report, std::span<const double> ideals) {
    return normalize_targets(report, ideals);
}

Starvation starvation_count(std::span<const double> potential, double eps) {
    if (!(eps >= 0.0)) throw InvalidArgument("eps must be >= 0");
    Starvation s;
    for (double p : potential) {
        s.flags.push_back(p < eps);
        s.count += p < eps ? 1 : 0;
    }
    return s;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("pearson inputs differ in length");
    if (x.size() < 2) throw InvalidArgument("pearson needs at least two pairs");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

MetricsReport compute_metrics(const ThroughputReport& report, const ThroughputReport& baseline,
                              std::span<const double> ideals, std::span<const double> priorities,
                              double eps) {
    MetricsReport m;
    const auto t = normalized_throughput(report, baseline);
    m.t_raw = t.raw;
    m.t_norm = t.normalized;
    m.potential = potential_throughput(report, ideals);
    m.starved = starvation_count(m.potential, eps).flags;
    if (m.potential.size() >= 2) m.pearson_r = pearson(m.potential, priorities);
    return m;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
    out << "mix,manager,t_raw,t_norm";
    for (int i = 0; i < kMaxSlots; ++i) out << ",p" << i;
    for (int i = 0; i < kMaxSlots; ++i) out << ",starved" << i;
    out << ",pearson_r\n";
    const auto old_precision = out.precision(17);
    for (const auto& row : rows) {
        const auto& m = row.metrics;
        out << row.mix << ',' << row.manager << ',' << m.t_raw << ',' << m.t_norm;
        for (std::size_t i = 0; i < static_cast<std::size_t>(kMaxSlots); ++i) {
            out << ',';
            if (i < m.potential.size()) out << m.potential[i];
        }
        for (std::size_t i = 0; i < static_cast<std::size_t>(kMaxSlots); ++i) {
            out << ',';
            if (i < m.starved.size()) out << (m.starved[i] ? 1 : 0);
        }
        out << ',';
        if (m.pearson_r) out << *m.pearson_r;
        out << '\n';
    }
    out.precision(old_precision);
}

}  // namespace priomap
