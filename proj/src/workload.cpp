// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include "priomap/workload.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "priomap/error.hpp"

namespace priomap {

namespace {

constexpr std::array<std::string_view, kLayerTypeCount> kLayerTypeNames = {
    "conv", "depthwise_conv", "fully_connected", "pool", "norm", "concat", "add", "other"};
constexpr std::array<std::string_view, 5> kActivationNames = {"none", "relu", "sigmoid", "tanh",
                                                              "other"};

}  // namespace

std::string_view to_string(LayerType t) { return kLayerTypeNames[static_cast<std::size_t>(t)]; }

std::string_view to_string(Activation a) { return kActivationNames[static_cast<std::size_t>(a)]; }

std::optional<LayerType> parse_layer_type(std::string_view s) {
    for (std::size_t i = 0; i < kLayerTypeNames.size(); ++i) {
        if (kLayerTypeNames[i] == s) return static_cast<LayerType>(i);
    }
    return std::nullopt;
}

std::optional<Activation> parse_activation(std::string_view s) {
    for (std::size_t i = 0; i < kActivationNames.size(); ++i) {
        if (kActivationNames[i] == s) return static_cast<Activation>(i);
    }
    return std::nullopt;
}

std::int64_t volume(const Shape4& s) { return s[0] * s[1] * s[2] * s[3]; }

void LayerDescriptor::validate() const {
    auto non_negative = [](const auto& arr) {
        return std::all_of(arr.begin(), arr.end(), [](std::int64_t v) { return v >= 0; });
    };
    if (index < 0) throw ConfigError("layer index must be >= 0");
    if (!non_negative(ifm) || !non_negative(ofm) || !non_negative(weights) ||
        !non_negative(pad_stride) || biases < 0) {
        throw ConfigError("layer " + std::to_string(index) + ": negative shape entry");
    }
    if (ifm[0] < 1 || ofm[0] < 1) {
        throw ConfigError("layer " + std::to_string(index) + ": minibatch must be >= 1");
    }
}

LayerVector encode_layer(const LayerDescriptor& l) {
    LayerVector v{};
    std::size_t k = 0;
    v[k++] = static_cast<double>(l.index);
    v[k++] = static_cast<double>(static_cast<int>(l.type));
    for (auto x : l.ifm) v[k++] = static_cast<double>(x);
    for (auto x : l.ofm) v[k++] = static_cast<double>(x);
    for (auto x : l.weights) v[k++] = static_cast<double>(x);
    v[k++] = static_cast<double>(l.biases);
    v[k++] = static_cast<double>(static_cast<int>(l.activation));
    for (auto x : l.pad_stride) v[k++] = static_cast<double>(x);
    return v;
}

std::int64_t macs_of_layer(const LayerDescriptor& l) {
    switch (l.type) {
        case LayerType::Conv:
        case LayerType::DepthwiseConv:
            return l.ofm[1] * l.ofm[2] * l.ofm[3] * l.weights[1] * l.weights[2] * l.weights[3] *
                   l.ofm[0];
        case LayerType::FullyConnected:
            return l.ifm[0] * (l.ifm[1] * l.ifm[2] * l.ifm[3]) * (l.ofm[1] * l.ofm[2] * l.ofm[3]);
        default:
            return volume(l.ofm);
    }
}

DnnDescriptor::DnnDescriptor(std::string name, std::vector<LayerDescriptor> layers,
                             std::vector<int> unit_starts)
    : name_(std::move(name)), layers_(std::move(layers)), unit_starts_(std::move(unit_starts)) {
    if (name_.empty()) throw ConfigError("dnn name must not be empty");
    if (layers_.empty()) throw ConfigError("dnn '" + name_ + "' has no layers");
    for (std::size_t j = 0; j < layers_.size(); ++j) {
        if (layers_[j].index != static_cast<int>(j)) {
            throw ConfigError("dnn '" + name_ + "': layer indices must be contiguous from 0 (layer " +
                              std::to_string(j) + " has index " +
                              std::to_string(layers_[j].index) + ")");
        }
        try {
            layers_[j].validate();
        } catch (const ConfigError& e) {
            throw ConfigError("dnn '" + name_ + "': " + e.what());
        }
    }
    if (unit_starts_.empty()) {
        unit_starts_.resize(layers_.size());
        std::iota(unit_starts_.begin(), unit_starts_.end(), 0);
    }
    if (unit_starts_.front() != 0) {
        throw ConfigError("dnn '" + name_ + "': first partition unit must start at layer 0");
    }
    for (std::size_t u = 1; u < unit_starts_.size(); ++u) {
        if (unit_starts_[u] <= unit_starts_[u - 1]) {
            throw ConfigError("dnn '" + name_ + "': unit starts must be strictly increasing");
        }
    }
    if (unit_starts_.back() >= static_cast<int>(layers_.size())) {
        throw ConfigError("dnn '" + name_ + "': unit start beyond last layer");
    }
    unit_of_layer_.resize(layers_.size());
    for (int u = 0; u < partition_units(); ++u) {
        auto [first, last] = unit_range(u);
        for (int j = first; j < last; ++j) unit_of_layer_[static_cast<std::size_t>(j)] = u;
    }
}

std::pair<int, int> DnnDescriptor::unit_range(int u) const {
    const auto uu = static_cast<std::size_t>(u);
    const int first = unit_starts_[uu];
    const int last = uu + 1 < unit_starts_.size() ? unit_starts_[uu + 1] : layer_count();
    return {first, last};
}

std::int64_t DnnDescriptor::total_macs() const {
    std::int64_t total = 0;
    for (const auto& l : layers_) total += macs_of_layer(l);
    return total;
}

std::int64_t DnnDescriptor::unit_macs(int u) const {
    auto [first, last] = unit_range(u);
    std::int64_t total = 0;
    for (int j = first; j < last; ++j) total += macs_of_layer(layers_[static_cast<std::size_t>(j)]);
    return total;
}

void check_mapping(const Workload& workload, const Mapping& mapping, int components) {
    if (mapping.size() != workload.size()) {
        throw StructuralError("mapping has " + std::to_string(mapping.size()) +
                              " slots but workload has " + std::to_string(workload.size()));
    }
    for (std::size_t i = 0; i < workload.size(); ++i) {
        const auto& a = mapping.assignments[i];
        if (static_cast<int>(a.size()) != workload[i].partition_units()) {
            throw StructuralError("slot " + std::to_string(i) + " ('" + workload[i].name() +
                                  "'): assignment length " + std::to_string(a.size()) +
                                  " != partition units " +
                                  std::to_string(workload[i].partition_units()));
        }
        for (int c : a) {
            if (c < 0 || c >= components) {
                throw StructuralError("slot " + std::to_string(i) + ": component id " +
                                      std::to_string(c) + " out of range");
            }
        }
    }
}

void RawLayerEmbedding::embed(const LayerDescriptor& layer, std::span<double> out) const {
    const auto v = encode_layer(layer);
    std::copy(v.begin(), v.end(), out.begin());
}

WorkloadTensor::WorkloadTensor(int components, int embedding_width)
    : components_(components), width_(embedding_width) {
    if (components < 1 || embedding_width < 1) {
        throw StructuralError("workload tensor needs >= 1 component and embedding width");
    }
    data_.assign(static_cast<std::size_t>(kMaxSlots) * kMaxLayers * row_width(), 0.0);
}

std::size_t WorkloadTensor::offset(int channel, int layer) const {
    return (static_cast<std::size_t>(channel) * kMaxLayers + static_cast<std::size_t>(layer)) *
           static_cast<std::size_t>(row_width());
}

std::span<double> WorkloadTensor::row(int channel, int layer) {
    return {data_.data() + offset(channel, layer), static_cast<std::size_t>(row_width())};
}

std::span<const double> WorkloadTensor::row(int channel, int layer) const {
    return {data_.data() + offset(channel, layer), static_cast<std::size_t>(row_width())};
}

std::span<const double> WorkloadTensor::channel_data(int channel) const {
    return {data_.data() + offset(channel, 0),
            static_cast<std::size_t>(kMaxLayers) * static_cast<std::size_t>(row_width())};
}

bool WorkloadTensor::channel_is_zero(int channel) const {
    auto c = channel_data(channel);
    return std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; });
}

bool WorkloadTensor::row_is_zero(int channel, int layer) const {
    auto r = row(channel, layer);
    return std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; });
}

int WorkloadTensor::nonzero_block(int channel, int layer) const {
    auto r = row(channel, layer);
    for (int b = 0; b < components_; ++b) {
        auto block = r.subspan(static_cast<std::size_t>(b * width_), static_cast<std::size_t>(width_));
        if (std::any_of(block.begin(), block.end(), [](double v) { return v != 0.0; })) return b;
    }
    return -1;
}

void WorkloadTensor::clear_channel(int channel) {
    auto first = data_.begin() + static_cast<std::ptrdiff_t>(offset(channel, 0));
    std::fill(first, first + static_cast<std::ptrdiff_t>(kMaxLayers) * row_width(), 0.0);
}

void write_channel(WorkloadTensor& tensor, int channel, const DnnDescriptor& dnn,
                   std::span<const int> assignment, const LayerEmbedding& embed) {
    if (channel < 0 || channel >= kMaxSlots) throw StructuralError("channel out of range");
    if (dnn.layer_count() > kMaxLayers) {
        throw StructuralError("dnn '" + dnn.name() + "' has " + std::to_string(dnn.layer_count()) +
                              " layers; the limit is " + std::to_string(kMaxLayers));
    }
    if (static_cast<int>(assignment.size()) != dnn.partition_units()) {
        throw StructuralError("assignment does not cover dnn '" + dnn.name() + "'");
    }
    if (embed.width() != tensor.embedding_width()) {
        throw StructuralError("embedding width does not match tensor");
    }
    tensor.clear_channel(channel);
    const auto width = static_cast<std::size_t>(tensor.embedding_width());
    for (int j = 0; j < dnn.layer_count(); ++j) {
        const int comp = assignment[static_cast<std::size_t>(dnn.unit_of_layer(j))];
        if (comp < 0 || comp >= tensor.components()) {
            throw StructuralError("component id out of range for dnn '" + dnn.name() + "'");
        }
        auto block = tensor.row(channel, j).subspan(static_cast<std::size_t>(comp) * width, width);
        embed.embed(dnn.layers()[static_cast<std::size_t>(j)], block);
    }
}

WorkloadTensor build_workload_tensor(const Workload& workload, const Mapping& mapping,
                                     const LayerEmbedding& embed, int components) {
    if (workload.size() > static_cast<std::size_t>(kMaxSlots)) {
        throw StructuralError("workload has " + std::to_string(workload.size()) +
                              " DNNs; the limit is " + std::to_string(kMaxSlots));
    }
    check_mapping(workload, mapping, components);
    WorkloadTensor tensor(components, embed.width());
    for (std::size_t i = 0; i < workload.size(); ++i) {
        write_channel(tensor, static_cast<int>(i), workload[i], mapping.assignments[i], embed);
    }
    return tensor;
}

// ---------------------------------------------------------------------------
// Zoo JSON

namespace {

using nlohmann::json;

int line_of_offset(std::string_view text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

template <std::size_t N>
std::array<std::int64_t, N> read_ints(const json& j, const char* key) {
    const auto& arr = j.at(key);
    if (!arr.is_array() || arr.size() != N) {
        throw ConfigError(std::string("field '") + key + "' must be an array of " +
                          std::to_string(N) + " integers");
    }
    std::array<std::int64_t, N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = arr[i].get<std::int64_t>();
    return out;
}

LayerDescriptor layer_from_json(const json& j) {
    LayerDescriptor l;
    l.index = j.at("index").get<int>();
    const auto type = j.at("type").get<std::string>();
    auto t = parse_layer_type(type);
    if (!t) throw ConfigError("unknown layer type '" + type + "'");
    l.type = *t;
    l.ifm = read_ints<4>(j, "ifm");
    l.ofm = read_ints<4>(j, "ofm");
    l.weights = j.contains("w") ? read_ints<4>(j, "w") : Shape4{0, 0, 0, 0};
    l.biases = j.value("b", std::int64_t{0});
    const auto act = j.value("a", std::string("none"));
    auto a = parse_activation(act);
    if (!a) throw ConfigError("unknown activation '" + act + "'");
    l.activation = *a;
    l.pad_stride = j.contains("ps") ? read_ints<6>(j, "ps") : PadStride{0, 0, 0, 0, 1, 1};
    return l;
}

json layer_to_json(const LayerDescriptor& l) {
    return json{{"index", l.index},   {"type", to_string(l.type)},       {"ifm", l.ifm},
                {"ofm", l.ofm},       {"w", l.weights},                  {"b", l.biases},
                {"a", to_string(l.activation)}, {"ps", l.pad_stride}};
}

}  // namespace

std::vector<DnnDescriptor> parse_model_zoo(std::string_view text, std::string_view source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string(source) + ":" + std::to_string(line_of_offset(text, e.byte)) +
                          ": " + e.what());
    }
    std::vector<DnnDescriptor> zoo;
    std::set<std::string> names;
    try {
        for (const auto& d : doc.at("dnns")) {
            const auto name = d.at("name").get<std::string>();
            std::vector<LayerDescriptor> layers;
            for (const auto& lj : d.at("layers")) {
                try {
                    layers.push_back(layer_from_json(lj));
                } catch (const json::exception& e) {
                    throw ConfigError("dnn '" + name + "' layer " + std::to_string(layers.size()) +
                                      ": " + e.what());
                } catch (const ConfigError& e) {
                    throw ConfigError("dnn '" + name + "' layer " + std::to_string(layers.size()) +
                                      ": " + e.what());
                }
            }
            std::vector<int> starts;
            if (d.contains("unit_starts")) starts = d.at("unit_starts").get<std::vector<int>>();
            DnnDescriptor dnn(name, std::move(layers), std::move(starts));
            if (d.contains("partition_units") &&
                d.at("partition_units").get<int>() != dnn.partition_units()) {
                throw ConfigError("dnn '" + name + "': partition_units disagrees with unit_starts");
            }
            if (!names.insert(name).second) throw ConfigError("duplicate dnn name '" + name + "'");
            zoo.push_back(std::move(dnn));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string(source) + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(source) + ": " + e.what());
    }
    return zoo;
}

std::vector<DnnDescriptor> load_model_zoo(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model zoo '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model_zoo(ss.str(), path.string());
}

std::string model_zoo_to_json(std::span<const DnnDescriptor> zoo) {
    json dnns = json::array();
    for (const auto& d : zoo) {
        json layers = json::array();
        for (const auto& l : d.layers()) layers.push_back(layer_to_json(l));
        dnns.push_back(json{{"name", d.name()},
                            {"partition_units", d.partition_units()},
                            {"unit_starts", d.unit_starts()},
                            {"layers", std::move(layers)}});
    }
    return json{{"dnns", std::move(dnns)}}.dump(1);
}

const DnnDescriptor& find_dnn(std::span<const DnnDescriptor> zoo, std::string_view name) {
    auto it = std::find_if(zoo.begin(), zoo.end(), [&](const auto& d) { return d.name() == name; });
    if (it == zoo.end()) throw ConfigError("unknown dnn '" + std::string(name) + "'");
    return *it;
}

// ---------------------------------------------------------------------------

DnnDescriptor generate_synthetic_dnn(std::uint64_t seed, IntRange depth, IntRange width) {
    if (depth.lo < 1 || depth.hi < depth.lo || width.lo < 1 || width.hi < width.lo) {
        throw InvalidArgument("synthetic dnn ranges must be non-empty and positive");
    }
    std::mt19937_64 rng(seed);
    const int n = std::uniform_int_distribution<int>(depth.lo, depth.hi)(rng);
    std::uniform_int_distribution<std::int64_t> channels(width.lo, width.hi);

    std::vector<LayerDescriptor> layers;
    Shape4 cur{1, 3, 32, 32};
    for (int j = 0; j < n; ++j) {
        LayerDescriptor l;
        l.index = j;
        l.ifm = cur;
        if (j % 2 == 0) {
            const std::int64_t out = channels(rng);
            l.type = LayerType::Conv;
            l.ofm = {1, out, cur[2], cur[3]};
            l.weights = {out, cur[1], 3, 3};
            l.biases = out;
            l.activation = Activation::Relu;
            l.pad_stride = {1, 1, 1, 1, 1, 1};
        } else {
            const std::int64_t s = cur[2] >= 2 ? 2 : 1;
            l.type = LayerType::Pool;
            l.ofm = {1, cur[1], cur[2] / s, cur[3] / s};
            l.pad_stride = {0, 0, 0, 0, s, s};
        }
        cur = l.ofm;
        layers.push_back(l);
    }
    return DnnDescriptor("synthetic-" + std::to_string(seed), std::move(layers));
}

}  // namespace priomap
