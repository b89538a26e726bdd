// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "priomap/workload.hpp"

namespace priomap {

/// Bytes per activation element moved between components.
inline constexpr double kBytesPerElement = 4.0;

struct ComponentSpec {
    int id = 0;
    std::string name;
    /// MACs per second, indexed by LayerType code.
    std::array<double, kLayerTypeCount> rate{};
    /// Seconds added per layer executed on this component.
    double per_layer_overhead = 0.0;

    double rate_for(LayerType t) const { return rate[static_cast<std::size_t>(t)]; }
};

/// A heterogeneous device: d computing components plus the inter-component
/// bandwidth matrix (bytes/s). Diagonal entries are free transfers.
class Platform {
public:
    Platform(std::string name, std::vector<ComponentSpec> components,
             std::vector<std::vector<double>> bandwidth, std::optional<int> reference);

    const std::string& name() const { return name_; }
    int components() const { return static_cast<int>(components_.size()); }
    const ComponentSpec& component(int c) const { return components_[static_cast<std::size_t>(c)]; }
    std::span<const ComponentSpec> component_specs() const { return components_; }
    double bandwidth(int from, int to) const;
    const std::vector<std::vector<double>>& bandwidth_matrix() const { return bandwidth_; }

    /// Reference component used for t_ideal and the all-on-one baseline.
    /// Throws ConfigError when the platform has none.
    int reference_component() const;
    std::optional<int> reference() const { return reference_; }

    int component_index(std::string_view name) const;

    /// Same device running k times faster: rates and bandwidths times k,
    /// per-layer overheads divided by k.
    Platform scaled(double k) const;

private:
    std::string name_;
    std::vector<ComponentSpec> components_;
    std::vector<std::vector<double>> bandwidth_;
    std::optional<int> reference_;
};

Platform parse_platform(std::string_view json_text, std::string_view source = "<memory>");
Platform load_platform(const std::filesystem::path& path);
std::string platform_to_json(const Platform& platform);

/// Maximal run of consecutive partition units on one component; units are a
/// half-open range.
struct Stage {
    int first_unit = 0;
    int end_unit = 0;
    int component = 0;

    bool operator==(const Stage&) const = default;
};

std::vector<Stage> derive_stages(const DnnDescriptor& dnn, std::span<const int> assignment);

/// Seconds per inference of `stage`: compute plus per-layer overhead, plus the
/// inbound activation transfer when `previous` sits on another component.
double stage_work(const DnnDescriptor& dnn, const Stage& stage, const Stage* previous,
                  const Platform& platform);

struct StageLoad {
    int slot = 0;
    int stage = 0;
    int component = 0;
    double work = 0.0;   // seconds per inference at full component speed
    double share = 0.0;  // processor-sharing fraction of the component
    double rate = 0.0;   // share / work, inferences per second
};

struct ThroughputReport {
    /// Inferences per second per DNN slot.
    std::vector<double> throughput;
    /// Diagnostics; empty for estimates that do not model stages.
    std::vector<StageLoad> stages;
    /// Resident stage count per component.
    std::vector<int> residents;
    /// Set when the mapping came from the maximin fallback.
    bool fallback = false;

    std::size_t size() const { return throughput.size(); }
};

/// Closed-form processor-sharing steady state: every resident stage of a
/// component receives an equal share; a DNN runs at the rate of its slowest
/// stage.
ThroughputReport simulate_throughput(const Workload& workload, const Mapping& mapping,
                                     const Platform& platform);

/// Throughput of `dnn` alone, all units on the reference component.
double ideal_throughput(const DnnDescriptor& dnn, const Platform& platform);
std::vector<double> ideal_throughputs(const Workload& workload, const Platform& platform);

Mapping uniform_mapping(const Workload& workload, int component);

struct BaselineResult {
    Mapping mapping;
    ThroughputReport report;
};

BaselineResult baseline_all_gpu(const Workload& workload, const Platform& platform);

/// d ^ (total partition units), exact.
boost::multiprecision::cpp_int count_solution_space(const Workload& workload,
                                                    const Platform& platform);

}  // namespace priomap
