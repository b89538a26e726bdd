// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "priomap/embedding.hpp"
#include "priomap/estimator.hpp"
#include "priomap/workload.hpp"

namespace priomap {

struct SurrogateShape {
    int components = 3;
    int embedding_width = kLayerFeatures;
    int hidden = 32;

    bool operator==(const SurrogateShape&) const = default;
};

/// Sparse view of one workload-tensor channel: the populated rows, each with
/// the component block it sits in.
struct ChannelInput {
    std::shared_ptr<const Eigen::MatrixXd> rows;  // rows x embedding width
    std::vector<int> component;                   // per row

    bool empty() const { return component.empty(); }
};

using SurrogateInput = std::array<ChannelInput, kMaxSlots>;
using SlotValues = std::array<double, kMaxSlots>;
using SlotMask = std::array<bool, kMaxSlots>;

/// Extracts the nonzero rows of every channel. Throws StructuralError when
/// the tensor does not match `shape`.
SurrogateInput surrogate_input(const WorkloadTensor& tensor, const SurrogateShape& shape);

/// Per-slot regressor over a workload tensor:
///   lift      h = relu(W x + b) per populated row (x is its component block)
///   pool      softmax(u . tanh(A h)) weighted sum of h, plus mean(h) over
///             the maximum layer count, plus a learned slot embedding
///   mix       single-head self-attention over populated slots, residual
///   head      H -> H (relu) -> 1, shared by every slot
class SurrogateModel {
public:
    enum Param {
        kLiftWeight,     // H x (d*E)
        kLiftBias,       // H x 1
        kScoreWeight,    // H x H
        kScoreVector,    // H x 1
        kSlotEmbedding,  // N_max x H
        kQuery,          // H x H
        kKey,            // H x H
        kValue,          // H x H
        kHeadWeight,     // H x H
        kHeadBias,       // H x 1
        kOutWeight,      // H x 1
        kOutBias,        // 1 x 1
        kParamCount
    };
    using Params = std::array<Eigen::MatrixXd, kParamCount>;

    explicit SurrogateModel(const SurrogateShape& shape, std::uint64_t seed = 0);

    const SurrogateShape& shape() const { return shape_; }
    static std::string_view param_name(int p);
    std::size_t parameter_count() const;

    /// Predictions for every slot; entries of empty slots are meaningless.
    SlotValues forward(const SurrogateInput& input) const;
    SlotValues forward(const WorkloadTensor& tensor) const;

    /// Softmax pooling weights per channel (empty for an empty channel).
    std::array<Eigen::VectorXd, kMaxSlots> pooling_weights(const SurrogateInput& input) const;

    Params params;

private:
    SurrogateShape shape_;
};

using SurrogateGradients = SurrogateModel::Params;

SurrogateGradients zero_gradients(const SurrogateModel& model);

struct TrainingExample {
    SurrogateInput input;
    SlotValues target{};
    SlotMask mask{};
};

/// Mean squared error over the masked slots of `batch`. When `grads` is
/// given, the gradient of that mean is added to it.
double surrogate_loss(const SurrogateModel& model, std::span<const TrainingExample* const> batch,
                      SurrogateGradients* grads = nullptr);
double surrogate_loss(const SurrogateModel& model, std::span<const TrainingExample> examples);

struct SurrogateTrainConfig {
    int epochs = 50;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    std::uint64_t seed = 0;
};

struct TrainingHistory {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
};

/// Momentum SGD on the masked per-slot squared error, seeded batch order.
TrainingHistory train_surrogate(SurrogateModel& model, std::span<const TrainingExample> train,
                                std::span<const TrainingExample> validation,
                                const SurrogateTrainConfig& config);

nlohmann::json to_json(const SurrogateModel& model);
SurrogateModel surrogate_model_from_json(const nlohmann::json& j);

enum class EmbeddingMode { raw, vq };

std::string_view to_string(EmbeddingMode mode);
EmbeddingMode parse_embedding_mode(std::string_view s);

/// Everything needed to score new workloads: the layer embedding and the
/// trained network.
struct SurrogateBundle {
    EmbeddingMode mode = EmbeddingMode::raw;
    LayerStandardizer standardizer;
    std::optional<VqModel> vq;
    SurrogateModel model{SurrogateShape{}};

    std::unique_ptr<LayerEmbedding> make_embedding() const;
};

nlohmann::json to_json(const SurrogateBundle& bundle);
SurrogateBundle surrogate_bundle_from_json(const nlohmann::json& j);

/// Learned estimator: throughput = max(0, prediction) * t_ideal.
class SurrogateEstimator final : public ThroughputEstimator {
public:
    SurrogateEstimator(SurrogateBundle bundle, Platform platform);
    ThroughputReport estimate(const Workload& workload, const Mapping& mapping) const override;
    const Platform& platform() const override { return platform_; }
    const SurrogateBundle& bundle() const { return bundle_; }

private:
    SurrogateBundle bundle_;
    Platform platform_;
    std::unique_ptr<LayerEmbedding> embedding_;
};

}  // namespace priomap
