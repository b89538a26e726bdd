// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "priomap/platform.hpp"
#include "priomap/workload.hpp"

namespace priomap {

/// Anything that predicts per-slot throughput of a mapped workload. Outputs
/// are finite, non-negative and one per workload slot.
class ThroughputEstimator {
public:
    virtual ~ThroughputEstimator() = default;
    virtual ThroughputReport estimate(const Workload& workload, const Mapping& mapping) const = 0;
    virtual const Platform& platform() const = 0;
};

/// Exact feedback path: the processor-sharing simulator itself.
class OracleEstimator final : public ThroughputEstimator {
public:
    explicit OracleEstimator(Platform platform) : platform_(std::move(platform)) {}
    ThroughputReport estimate(const Workload& workload, const Mapping& mapping) const override {
        return simulate_throughput(workload, mapping, platform_);
    }
    const Platform& platform() const override { return platform_; }

private:
    Platform platform_;
};

/// Elementwise t / t_ideal. Throws InvalidArgument on a non-positive ideal or
/// a length mismatch.
std::vector<double> normalize_targets(const ThroughputReport& report, std::span<const double> ideals);

}  // namespace priomap
