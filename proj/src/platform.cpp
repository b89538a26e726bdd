// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include "priomap/platform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "priomap/error.hpp"

namespace priomap {

Platform::Platform(std::string name, std::vector<ComponentSpec> components,
                   std::vector<std::vector<double>> bandwidth, std::optional<int> reference)
    : name_(std::move(name)),
      components_(std::move(components)),
      bandwidth_(std::move(bandwidth)),
      reference_(reference) {
    const auto d = components_.size();
    if (d < 1) throw ConfigError("platform needs at least one component");
    for (std::size_t c = 0; c < d; ++c) {
        auto& comp = components_[c];
        comp.id = static_cast<int>(c);
        for (double r : comp.rate) {
            if (!(r > 0.0) || !std::isfinite(r)) {
                throw ConfigError("component '" + comp.name + "': rates must be finite and > 0");
            }
        }
        if (!(comp.per_layer_overhead >= 0.0)) {
            throw ConfigError("component '" + comp.name + "': overhead must be >= 0");
        }
    }
    if (bandwidth_.size() != d) throw ConfigError("bandwidth matrix must be d x d");
    for (std::size_t a = 0; a < d; ++a) {
        if (bandwidth_[a].size() != d) throw ConfigError("bandwidth matrix must be d x d");
        bandwidth_[a][a] = 0.0;
        for (std::size_t b = 0; b < d; ++b) {
            if (a == b) continue;
            if (!(bandwidth_[a][b] > 0.0)) {
                throw ConfigError("off-diagonal bandwidth must be positive");
            }
        }
    }
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b < a; ++b) {
            if (bandwidth_[a][b] != bandwidth_[b][a]) {
                throw ConfigError("bandwidth matrix must be symmetric");
            }
        }
    }
    if (reference_ && (*reference_ < 0 || *reference_ >= static_cast<int>(d))) {
        throw ConfigError("reference component out of range");
    }
}

double Platform::bandwidth(int from, int to) const {
    if (from == to) return std::numeric_limits<double>::infinity();
    return bandwidth_[static_cast<std::size_t>(from)][static_cast<std::size_t>(to)];
}

int Platform::reference_component() const {
    if (!reference_) throw ConfigError("platform '" + name_ + "' has no reference component");
    return *reference_;
}

int Platform::component_index(std::string_view name) const {
    for (const auto& c : components_) {
        if (c.name == name) return c.id;
    }
    throw ConfigError("unknown component '" + std::string(name) + "'");
}

Platform Platform::scaled(double k) const {
    auto comps = components_;
    for (auto& c : comps) {
        for (double& r : c.rate) r *= k;
        c.per_layer_overhead /= k;
    }
    auto bw = bandwidth_;
    for (auto& row : bw) {
        for (double& b : row) b *= k;
    }
    return Platform(name_, std::move(comps), std::move(bw), reference_);
}

namespace {
using nlohmann::json;
}

Platform parse_platform(std::string_view text, std::string_view source) {
    const std::string src(source);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(src + ": " + e.what());
    }
    try {
        std::vector<ComponentSpec> comps;
        for (const auto& cj : doc.at("components")) {
            ComponentSpec c;
            c.name = cj.at("name").get<std::string>();
            c.per_layer_overhead = cj.value("per_layer_overhead", 0.0);
            const auto& rates = cj.at("rates");
            const double fallback = rates.value("default", 0.0);
            for (int t = 0; t < kLayerTypeCount; ++t) {
                const auto key = std::string(to_string(static_cast<LayerType>(t)));
                c.rate[static_cast<std::size_t>(t)] = rates.value(key, fallback);
            }
            for (auto it = rates.begin(); it != rates.end(); ++it) {
                if (it.key() != "default" && !parse_layer_type(it.key())) {
                    throw ConfigError("component '" + c.name + "': unknown layer type '" +
                                      it.key() + "' in rates");
                }
            }
            comps.push_back(std::move(c));
        }
        auto bw = doc.at("bandwidth").get<std::vector<std::vector<double>>>();
        std::optional<int> reference;
        if (doc.contains("reference")) {
            const auto ref = doc.at("reference").get<std::string>();
            for (std::size_t i = 0; i < comps.size(); ++i) {
                if (comps[i].name == ref) reference = static_cast<int>(i);
            }
            if (!reference) throw ConfigError("reference '" + ref + "' is not a component");
        }
        return Platform(doc.value("name", std::string("platform")), std::move(comps), std::move(bw),
                        reference);
    } catch (const json::exception& e) {
        throw ConfigError(src + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(src + ": " + e.what());
    }
}

Platform load_platform(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open platform '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_platform(ss.str(), path.string());
}

std::string platform_to_json(const Platform& p) {
    json comps = json::array();
    for (const auto& c : p.component_specs()) {
        json rates = json::object();
        for (int t = 0; t < kLayerTypeCount; ++t) {
            rates[std::string(to_string(static_cast<LayerType>(t)))] = c.rate[static_cast<std::size_t>(t)];
        }
        comps.push_back(json{{"name", c.name}, {"per_layer_overhead", c.per_layer_overhead}, {"rates", rates}});
    }
    json doc{{"name", p.name()}, {"components", comps}, {"bandwidth", p.bandwidth_matrix()}};
    if (p.reference()) doc["reference"] = p.component(*p.reference()).name;
    return doc.dump(2);
}

std::vector<Stage> derive_stages(const DnnDescriptor& dnn, std::span<const int> assignment) {
    if (static_cast<int>(assignment.size()) != dnn.partition_units()) {
        throw StructuralError("assignment length does not match partition units of '" +
                              dnn.name() + "'");
    }
    std::vector<Stage> stages;
    for (int u = 0; u < static_cast<int>(assignment.size()); ++u) {
        const int c = assignment[static_cast<std::size_t>(u)];
        if (!stages.empty() && stages.back().component == c) {
            stages.back().end_unit = u + 1;
        } else {
            stages.push_back(Stage{u, u + 1, c});
        }
    }
    return stages;
}

double stage_work(const DnnDescriptor& dnn, const Stage& stage, const Stage* previous,
                  const Platform& platform) {
    const auto& comp = platform.component(stage.component);
    const int first_layer = dnn.unit_range(stage.first_unit).first;
    const int end_layer = dnn.unit_range(stage.end_unit - 1).second;
    double w = 0.0;
    for (int j = first_layer; j < end_layer; ++j) {
        const auto& l = dnn.layers()[static_cast<std::size_t>(j)];
        w += static_cast<double>(macs_of_layer(l)) / comp.rate_for(l.type) + comp.per_layer_overhead;
    }
    if (previous != nullptr && previous->component != stage.component) {
        const auto& boundary = dnn.layers()[static_cast<std::size_t>(first_layer - 1)];
        const double bytes = kBytesPerElement * static_cast<double>(volume(boundary.ofm));
        w += bytes / platform.bandwidth(previous->component, stage.component);
    }
    return w;
}

ThroughputReport simulate_throughput(const Workload& workload, const Mapping& mapping,
                                     const Platform& platform) {
    check_mapping(workload, mapping, platform.components());
    ThroughputReport report;
    report.residents.assign(static_cast<std::size_t>(platform.components()), 0);

    for (std::size_t i = 0; i < workload.size(); ++i) {
        const auto stages = derive_stages(workload[i], mapping.assignments[i]);
        for (std::size_t s = 0; s < stages.size(); ++s) {
            StageLoad load;
            load.slot = static_cast<int>(i);
            load.stage = static_cast<int>(s);
            load.component = stages[s].component;
            load.work = stage_work(workload[i], stages[s], s > 0 ? &stages[s - 1] : nullptr, platform);
            if (!(load.work > 0.0)) {
                throw StructuralError("stage with zero work in '" + workload[i].name() +
                                      "'; the platform needs a positive per-layer overhead");
            }
            report.stages.push_back(load);
            ++report.residents[static_cast<std::size_t>(load.component)];
        }
    }

    report.throughput.assign(workload.size(), std::numeric_limits<double>::infinity());
    for (auto& load : report.stages) {
        load.share = 1.0 / static_cast<double>(report.residents[static_cast<std::size_t>(load.component)]);
        load.rate = load.share / load.work;
        auto& t = report.throughput[static_cast<std::size_t>(load.slot)];
        t = std::min(t, load.rate);
    }
    return report;
}

double ideal_throughput(const DnnDescriptor& dnn, const Platform& platform) {
    const int ref = platform.reference_component();
    const Workload alone{dnn};
    const auto report = simulate_throughput(alone, uniform_mapping(alone, ref), platform);
    return report.throughput.front();
}

std::vector<double> ideal_throughputs(const Workload& workload, const Platform& platform) {
    std::vector<double> out;
    out.reserve(workload.size());
    for (const auto& d : workload) out.push_back(ideal_throughput(d, platform));
    return out;
}

Mapping uniform_mapping(const Workload& workload, int component) {
    Mapping m;
    for (const auto& d : workload) {
        m.assignments.emplace_back(static_cast<std::size_t>(d.partition_units()), component);
    }
    return m;
}

BaselineResult baseline_all_gpu(const Workload& workload, const Platform& platform) {
    BaselineResult r{uniform_mapping(workload, platform.reference_component()), {}};
    r.report = simulate_throughput(workload, r.mapping, platform);
    return r;
}

boost::multiprecision::cpp_int count_solution_space(const Workload& workload,
                                                    const Platform& platform) {
    unsigned total_units = 0;
    for (const auto& d : workload) total_units += static_cast<unsigned>(d.partition_units());
    return boost::multiprecision::pow(boost::multiprecision::cpp_int(platform.components()),
                                      total_units);
}

}  // namespace priomap
