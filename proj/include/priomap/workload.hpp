// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace priomap {

/// Maximum number of concurrently mapped DNNs (channels of the workload tensor).
inline constexpr int kMaxSlots = 5;
/// Maximum number of layers per DNN (rows of the workload tensor).
inline constexpr int kMaxLayers = 64;
/// Width of the flattened layer vector.
inline constexpr int kLayerFeatures = 22;

// Codes are part of the on-disk and tensor formats; never renumber.
enum class LayerType : int {
    Conv = 0,
    DepthwiseConv = 1,
    FullyConnected = 2,
    Pool = 3,
    Norm = 4,
    Concat = 5,
    Add = 6,
    Other = 7,
};
inline constexpr int kLayerTypeCount = 8;

enum class Activation : int {
    None = 0,
    Relu = 1,
    Sigmoid = 2,
    Tanh = 3,
    Other = 4,
};

std::string_view to_string(LayerType t);
std::string_view to_string(Activation a);
std::optional<LayerType> parse_layer_type(std::string_view s);
std::optional<Activation> parse_activation(std::string_view s);

/// (minibatch, channels, height, width). Weights use (out, in, kh, kw).
using Shape4 = std::array<std::int64_t, 4>;
/// (pad top, pad bottom, pad left, pad right, stride h, stride w).
using PadStride = std::array<std::int64_t, 6>;

std::int64_t volume(const Shape4& s);

struct LayerDescriptor {
    int index = 0;
    LayerType type = LayerType::Other;
    Shape4 ifm{1, 0, 0, 0};
    Shape4 ofm{1, 0, 0, 0};
    Shape4 weights{0, 0, 0, 0};
    std::int64_t biases = 0;
    Activation activation = Activation::None;
    PadStride pad_stride{0, 0, 0, 0, 0, 0};

    /// Throws ConfigError on negative shapes or a zero minibatch.
    void validate() const;

    bool operator==(const LayerDescriptor&) const = default;
};

using LayerVector = std::array<double, kLayerFeatures>;

/// Flattens a layer as (j, t, ifm, ofm, w, b, a, ps).
LayerVector encode_layer(const LayerDescriptor& layer);

/// Multiply-accumulate count used as the cost basis of the simulator.
///   conv / depthwise: ofm_c * ofm_h * ofm_w * w_in * w_h * w_w * minibatch
///   fully-connected:  minibatch * (ifm c*h*w) * (ofm c*h*w)
///   everything else:  ofm volume
std::int64_t macs_of_layer(const LayerDescriptor& layer);

/// An ordered layer list grouped into contiguous partition units.
class DnnDescriptor {
public:
    /// `unit_starts` lists the first layer of every unit; empty means one unit
    /// per layer. Throws ConfigError when any invariant is violated.
    DnnDescriptor(std::string name, std::vector<LayerDescriptor> layers,
                  std::vector<int> unit_starts = {});

    const std::string& name() const { return name_; }
    std::span<const LayerDescriptor> layers() const { return layers_; }
    int layer_count() const { return static_cast<int>(layers_.size()); }
    int partition_units() const { return static_cast<int>(unit_starts_.size()); }
    const std::vector<int>& unit_starts() const { return unit_starts_; }

    /// Layers of unit `u` as a half-open range [first, last).
    std::pair<int, int> unit_range(int u) const;
    int unit_of_layer(int layer) const { return unit_of_layer_[static_cast<std::size_t>(layer)]; }

    std::int64_t total_macs() const;
    std::int64_t unit_macs(int u) const;

    bool operator==(const DnnDescriptor& o) const {
        return name_ == o.name_ && layers_ == o.layers_ && unit_starts_ == o.unit_starts_;
    }

private:
    std::string name_;
    std::vector<LayerDescriptor> layers_;
    std::vector<int> unit_starts_;
    std::vector<int> unit_of_layer_;
};

using Workload = std::vector<DnnDescriptor>;

/// Per DNN slot, the component id of each partition unit.
struct Mapping {
    std::vector<std::vector<int>> assignments;

    std::size_t size() const { return assignments.size(); }
    bool operator==(const Mapping&) const = default;
};

/// Throws StructuralError unless `mapping` covers `workload` with ids in [0, components).
void check_mapping(const Workload& workload, const Mapping& mapping, int components);

/// Produces the per-layer row written into the workload tensor.
class LayerEmbedding {
public:
    virtual ~LayerEmbedding() = default;
    virtual int width() const = 0;
    virtual void embed(const LayerDescriptor& layer, std::span<double> out) const = 0;
};

/// Identity embedding: the raw 22-scalar layer vector.
class RawLayerEmbedding final : public LayerEmbedding {
public:
    int width() const override { return kLayerFeatures; }
    void embed(const LayerDescriptor& layer, std::span<double> out) const override;
};

/// Dense (channel, row, block, column) tensor; channel = DNN slot, row =
/// layer, block = computing component.
class WorkloadTensor {
public:
    WorkloadTensor(int components, int embedding_width);

    int channels() const { return kMaxSlots; }
    int rows() const { return kMaxLayers; }
    int components() const { return components_; }
    int embedding_width() const { return width_; }
    int row_width() const { return components_ * width_; }

    std::span<double> row(int channel, int layer);
    std::span<const double> row(int channel, int layer) const;
    std::span<const double> channel_data(int channel) const;
    std::span<const double> data() const { return data_; }

    bool channel_is_zero(int channel) const;
    bool row_is_zero(int channel, int layer) const;
    /// Index of the only nonzero block of a row, or -1 for an all-zero row.
    int nonzero_block(int channel, int layer) const;

    void clear_channel(int channel);

    bool operator==(const WorkloadTensor&) const = default;

private:
    std::size_t offset(int channel, int layer) const;

    int components_;
    int width_;
    std::vector<double> data_;
};

/// Writes `dnn` into `channel`, each layer's embedding in the block of the
/// component its unit is assigned to.
void write_channel(WorkloadTensor& tensor, int channel, const DnnDescriptor& dnn,
                   std::span<const int> assignment, const LayerEmbedding& embed);

/// Throws StructuralError on slot-count mismatch, more than kMaxSlots DNNs,
/// or a DNN deeper than kMaxLayers.
WorkloadTensor build_workload_tensor(const Workload& workload, const Mapping& mapping,
                                     const LayerEmbedding& embed, int components);

// Model zoo (JSON). See docs/formats.md.
std::vector<DnnDescriptor> parse_model_zoo(std::string_view json_text,
                                           std::string_view source = "<memory>");
std::vector<DnnDescriptor> load_model_zoo(const std::filesystem::path& path);
std::string model_zoo_to_json(std::span<const DnnDescriptor> zoo);
const DnnDescriptor& find_dnn(std::span<const DnnDescriptor> zoo, std::string_view name);

struct IntRange {
    int lo = 1;
    int hi = 1;
};

/// Seeded synthetic network on a (1, 3, 32, 32) input: conv 3x3 layers at
/// even positions, 2x2 pooling at odd positions; one partition unit per layer.
DnnDescriptor generate_synthetic_dnn(std::uint64_t seed, IntRange depth, IntRange width);

}  // namespace priomap
