// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include "priomap/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "priomap/error.hpp"
#include "priomap/estimator.hpp"

namespace priomap {

namespace {

using nlohmann::json;

std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(attempt)};
    return std::mt19937_64(seq);
}

std::string sample_key(const Sample& s) {
    std::string key;
    for (std::size_t i = 0; i < kMaxSlots; ++i) {
        key += s.dnn[i];
        key += ':';
        for (int c : s.assignment[i]) key += static_cast<char>('0' + c);
        key += '|';
    }
    return key;
}

Sample draw_sample(std::span<const DnnDescriptor> zoo, int components, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(1, kMaxSlots);
    std::uniform_int_distribution<std::size_t> pick(0, zoo.size() - 1);
    std::uniform_int_distribution<int> comp(0, components - 1);
    Sample s;
    const int n = count(rng);
    std::array<std::size_t, kMaxSlots> slots{};
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    std::shuffle(slots.begin(), slots.end(), rng);
    for (std::size_t k = 0; k < static_cast<std::size_t>(n); ++k) {
        const std::size_t i = slots[k];
        const auto& dnn = zoo[pick(rng)];
        s.dnn[i] = dnn.name();
        s.assignment[i].resize(static_cast<std::size_t>(dnn.partition_units()));
        for (int& c : s.assignment[i]) c = comp(rng);
        s.mask[i] = true;
    }
    return s;
}

json sample_to_json(const Sample& s) {
    json slots = json::array();
    for (std::size_t i = 0; i < kMaxSlots; ++i) {
        if (!s.mask[i]) continue;
        slots.push_back({{"slot", i}, {"dnn", s.dnn[i]}, {"assignment", s.assignment[i]}, {"target", s.target[i]}});
    }
    return {{"slots", std::move(slots)}};
}

Sample sample_from_json(const json& j) {
    Sample s;
    for (const auto& slot : j.at("slots")) {
        const int i = slot.at("slot").get<int>();
        if (i < 0 || i >= kMaxSlots) throw ConfigError("dataset slot index out of range");
        const auto u = static_cast<std::size_t>(i);
        if (s.mask[u]) throw ConfigError("dataset sample repeats slot " + std::to_string(i));
        s.dnn[u] = slot.at("dnn").get<std::string>();
        s.assignment[u] = slot.at("assignment").get<std::vector<int>>();
        s.target[u] = slot.at("target").get<double>();
        s.mask[u] = true;
    }
    return s;
}

}  // namespace

int Sample::populated() const {
    return static_cast<int>(std::count(mask.begin(), mask.end(), true));
}

Workload Sample::workload(std::span<const DnnDescriptor> zoo) const {
    Workload w;
    for (std::size_t i = 0; i < kMaxSlots; ++i) {
        if (mask[i]) w.push_back(find_dnn(zoo, dnn[i]));
    }
    return w;
}

Mapping Sample::mapping() const {
    Mapping m;
    for (std::size_t i = 0; i < kMaxSlots; ++i) {
        if (mask[i]) m.assignments.push_back(assignment[i]);
    }
    return m;
}

SlotValues simulate_targets(const Sample& sample, std::span<const DnnDescriptor> zoo, const Platform& platform) {
    const auto w = sample.workload(zoo);
    const auto report = simulate_throughput(w, sample.mapping(), platform);
    const auto p = normalize_targets(report, ideal_throughputs(w, platform));
    SlotValues out{};
    std::size_t k = 0;
    for (std::size_t i = 0; i < kMaxSlots; ++i) {
        if (sample.mask[i]) out[i] = p[k++];
    }
    return out;
}

std::vector<Sample> generate_dataset(std::span<const DnnDescriptor> zoo, const Platform& platform,
                                     int count, std::uint64_t seed) {
    if (count < 0) throw InvalidArgument("dataset size must be >= 0");
    if (zoo.empty()) throw InvalidArgument("dataset needs a non-empty model zoo");
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(count));
    std::set<std::string> seen;
    for (int k = 0; k < count; ++k) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            auto rng = sample_rng(seed, static_cast<std::uint64_t>(k), attempt);
            Sample s = draw_sample(zoo, platform.components(), rng);
            if (!seen.insert(sample_key(s)).second) continue;
            s.target = simulate_targets(s, zoo, platform);
            out.push_back(std::move(s));
            break;
        }
    }
    return out;
}

Sample shuffle_augment(const Sample& sample, std::span<const int> permutation) {
    if (permutation.size() != kMaxSlots) throw InvalidArgument("slot permutation must have kMaxSlots entries");
    std::array<bool, kMaxSlots> used{};
    for (int p : permutation) {
        if (p < 0 || p >= kMaxSlots || used[static_cast<std::size_t>(p)]) {
            throw InvalidArgument("not a permutation of the DNN slots");
        }
        used[static_cast<std::size_t>(p)] = true;
    }
    Sample out;
    for (std::size_t i = 0; i < kMaxSlots; ++i) {
        const auto j = static_cast<std::size_t>(permutation[i]);
        out.dnn[j] = sample.dnn[i];
        out.assignment[j] = sample.assignment[i];
        out.target[j] = sample.target[i];
        out.mask[j] = sample.mask[i];
    }
    return out;
}

std::vector<Sample> augment_with_shuffles(std::span<const Sample> samples, int copies, std::uint64_t seed) {
    if (copies < 0) throw InvalidArgument("augmentation copies must be >= 0");
    std::vector<Sample> out(samples.begin(), samples.end());
    std::mt19937_64 rng(seed);
    std::array<int, kMaxSlots> perm{};
    for (int c = 0; c < copies; ++c) {
        for (const auto& s : samples) {
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            out.push_back(shuffle_augment(s, perm));
        }
    }
    return out;
}

DatasetSplit split_dataset(std::span<const Sample> samples, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw InvalidArgument("train fraction must be in [0, 1]");
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto cut = static_cast<std::size_t>(train_fraction * static_cast<double>(samples.size()) + 0.5);
    DatasetSplit split;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < cut ? split.train : split.validation).push_back(samples[order[i]]);
    }
    return split;
}

void write_dataset(const std::filesystem::path& path, const DatasetHeader& header, std::span<const Sample> samples) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write dataset '" + path.string() + "'");
    out << json{{"format", "priomap-dataset"},
                {"version", 1},
                {"platform", header.platform},
                {"components", header.components},
                {"seed", header.seed},
                {"count", samples.size()}}
               .dump()
        << '\n';
    for (const auto& s : samples) out << sample_to_json(s).dump() << '\n';
    if (!out) throw ConfigError("failed writing dataset '" + path.string() + "'");
}

std::vector<Sample> read_dataset(const std::filesystem::path& path, DatasetHeader* header) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read dataset '" + path.string() + "'");
    std::string line;
    std::vector<Sample> samples;
    int line_no = 0;
    DatasetHeader h;
    try {
        if (!std::getline(in, line)) throw ConfigError("dataset '" + path.string() + "' is empty");
        ++line_no;
        const auto head = json::parse(line);
        if (head.value("format", "") != "priomap-dataset") throw ConfigError("not a priomap dataset");
        if (head.value("version", 0) != 1) throw ConfigError("unsupported dataset version");
        h.platform = head.at("platform").get<std::string>();
        h.components = head.at("components").get<int>();
        h.seed = head.at("seed").get<std::uint64_t>();
        h.count = head.at("count").get<int>();
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            samples.push_back(sample_from_json(json::parse(line)));
        }
    } catch (const json::exception& e) {
        throw ConfigError("dataset '" + path.string() + "' line " + std::to_string(line_no) + ": " + e.what());
    }
    if (static_cast<int>(samples.size()) != h.count) {
        throw ConfigError("dataset '" + path.string() + "' header declares " + std::to_string(h.count) +
                          " samples, found " + std::to_string(samples.size()));
    }
    if (header) *header = h;
    return samples;
}

EmbeddingCache::EmbeddingCache(std::span<const DnnDescriptor> zoo, const LayerEmbedding& embedding)
    : width_(embedding.width()) {
    std::vector<double> row(static_cast<std::size_t>(width_));
    for (const auto& dnn : zoo) {
        Entry e;
        std::vector<std::vector<double>> kept;
        for (int l = 0; l < dnn.layer_count(); ++l) {
            embedding.embed(dnn.layers()[static_cast<std::size_t>(l)], row);
            if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) continue;
            kept.push_back(row);
            e.unit.push_back(dnn.unit_of_layer(l));
        }
        auto rows = std::make_shared<Eigen::MatrixXd>(static_cast<Eigen::Index>(kept.size()), width_);
        for (std::size_t i = 0; i < kept.size(); ++i) {
            for (int k = 0; k < width_; ++k) (*rows)(static_cast<Eigen::Index>(i), k) = kept[i][static_cast<std::size_t>(k)];
        }
        e.rows = std::move(rows);
        entries_.emplace(dnn.name(), std::move(e));
    }
}

const EmbeddingCache::Entry& EmbeddingCache::entry(std::string_view dnn) const {
    const auto it = entries_.find(dnn);
    if (it == entries_.end()) throw ConfigError("unknown DNN '" + std::string(dnn) + "'");
    return it->second;
}

TrainingExample training_example(const Sample& sample, const EmbeddingCache& cache) {
    TrainingExample ex;
    ex.target = sample.target;
    ex.mask = sample.mask;
    for (std::size_t i = 0; i < kMaxSlots; ++i) {
        if (!sample.mask[i]) continue;
        const auto& e = cache.entry(sample.dnn[i]);
        auto& ch = ex.input[i];
        ch.rows = e.rows;
        ch.component.reserve(e.unit.size());
        for (int u : e.unit) {
            if (u >= static_cast<int>(sample.assignment[i].size())) {
                throw StructuralError("assignment of '" + sample.dnn[i] + "' is too short");
            }
            ch.component.push_back(sample.assignment[i][static_cast<std::size_t>(u)]);
        }
    }
    return ex;
}

std::vector<TrainingExample> training_examples(std::span<const Sample> samples, const EmbeddingCache& cache) {
    std::vector<TrainingExample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(training_example(s, cache));
    return out;
}

WorkloadTensor sample_tensor(const Sample& sample, std::span<const DnnDescriptor> zoo,
                             const LayerEmbedding& embedding, int components) {
    WorkloadTensor t(components, embedding.width());
    for (std::size_t i = 0; i < kMaxSlots; ++i) {
        if (!sample.mask[i]) continue;
        write_channel(t, static_cast<int>(i), find_dnn(zoo, sample.dnn[i]), sample.assignment[i], embedding);
    }
    return t;
}

}  // namespace priomap
