// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include "priomap/estimator.hpp"

#include "priomap/error.hpp"

namespace priomap {

std::vector<double> normalize_targets(const ThroughputReport& report, std::span<const double> ideals) {
    if (ideals.size() != report.throughput.size()) {
        throw StructuralError("ideal throughputs do not match the report's slot count");
    }
    std::vector<double> out(ideals.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(ideals[i] > 0.0)) throw InvalidArgument("ideal throughput of slot " + std::to_string(i) + " is not positive");
        out[i] = report.throughput[i] / ideals[i];
    }
    return out;
}

}  // namespace priomap
