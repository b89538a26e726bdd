// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "priomap/platform.hpp"
#include "priomap/surrogate.hpp"
#include "priomap/workload.hpp"

namespace priomap {

/// One simulated workload. Slots are indexed 0..kMaxSlots-1; an empty slot
/// has no DNN name, no assignment, target 0 and mask false.
struct Sample {
    std::array<std::string, kMaxSlots> dnn;
    std::array<std::vector<int>, kMaxSlots> assignment;
    SlotValues target{};  // t_current / t_ideal
    SlotMask mask{};

    int populated() const;
    /// Populated slots in slot order.
    Workload workload(std::span<const DnnDescriptor> zoo) const;
    Mapping mapping() const;

    bool operator==(const Sample&) const = default;
};

/// `count` distinct samples of 1..kMaxSlots zoo DNNs placed in distinct
/// random slots with a uniformly random component per partition unit. Sample k
/// depends only on (seed, k), and duplicates are redrawn.
std::vector<Sample> generate_dataset(std::span<const DnnDescriptor> zoo, const Platform& platform,
                                     int count, std::uint64_t seed);

/// Recomputes the targets of `sample` with the simulator.
SlotValues simulate_targets(const Sample& sample, std::span<const DnnDescriptor> zoo, const Platform& platform);

/// Moves slot s to slot permutation[s]. Throws InvalidArgument unless
/// `permutation` is a permutation of 0..kMaxSlots-1.
Sample shuffle_augment(const Sample& sample, std::span<const int> permutation);

/// Appends `copies` randomly slot-permuted duplicates of every sample.
std::vector<Sample> augment_with_shuffles(std::span<const Sample> samples, int copies, std::uint64_t seed);

struct DatasetSplit {
    std::vector<Sample> train;
    std::vector<Sample> validation;
};

/// Seeded shuffle, then the first `train_fraction` of the samples train.
DatasetSplit split_dataset(std::span<const Sample> samples, double train_fraction, std::uint64_t seed);

struct DatasetHeader {
    std::string platform;
    int components = 0;
    std::uint64_t seed = 0;
    int count = 0;
};

/// JSON lines: a header object, then one object per sample.
void write_dataset(const std::filesystem::path& path, const DatasetHeader& header, std::span<const Sample> samples);
std::vector<Sample> read_dataset(const std::filesystem::path& path, DatasetHeader* header = nullptr);

/// Embedded layer rows of every zoo DNN, computed once.
class EmbeddingCache {
public:
    EmbeddingCache(std::span<const DnnDescriptor> zoo, const LayerEmbedding& embedding);
    struct Entry {
        std::shared_ptr<const Eigen::MatrixXd> rows;  // nonzero embedded layers
        std::vector<int> unit;                        // partition unit per row
    };

    /// Throws ConfigError for a DNN missing from the zoo.
    const Entry& entry(std::string_view dnn) const;
    int width() const { return width_; }

private:
    std::map<std::string, Entry, std::less<>> entries_;
    int width_;
};

/// Network input equal to surrogate_input() of the sample's workload tensor.
TrainingExample training_example(const Sample& sample, const EmbeddingCache& cache);
std::vector<TrainingExample> training_examples(std::span<const Sample> samples, const EmbeddingCache& cache);

/// Workload tensor of a sample, channels in slot positions.
WorkloadTensor sample_tensor(const Sample& sample, std::span<const DnnDescriptor> zoo,
                             const LayerEmbedding& embedding, int components);

}  // namespace priomap
