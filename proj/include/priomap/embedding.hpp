// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "priomap/workload.hpp"

namespace priomap {

/// Per-feature log1p + z-score transform of the 22-scalar layer vector.
/// Fitted on the layers the estimator is trained on.
struct LayerStandardizer {
    LayerVector mean{};
    LayerVector scale{};

    static LayerStandardizer fit(std::span<const DnnDescriptor> dnns);
    Eigen::VectorXd apply(const LayerDescriptor& layer) const;
    /// Rows are standardized layers of every DNN, in order.
    Eigen::MatrixXd apply_all(std::span<const DnnDescriptor> dnns) const;
};

struct Quantized {
    int index = 0;
    Eigen::VectorXd vector;
    double distance = 0.0;  // squared Euclidean
};

/// Single-codebook vector quantizer with affine encoder (22 -> 16) and
/// decoder (16 -> 22). The codebook is maintained by exponential moving
/// averages of assigned latents.
class VqModel {
public:
    static constexpr int kInputDim = kLayerFeatures;
    static constexpr int kLatentDim = 16;
    static constexpr double kDeadCountThreshold = 1e-3;

    VqModel(int codebook_size = 64, double commitment_beta = 0.25, double ema_decay = 0.99,
            std::uint64_t seed = 0);

    int codebook_size() const { return static_cast<int>(codebook.rows()); }

    Eigen::VectorXd encode(const Eigen::VectorXd& x) const;
    /// Nearest codeword; ties go to the lowest index.
    Quantized quantize(const Eigen::VectorXd& latent) const;
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& quantized) const;

    /// Seeds every codeword with a latent of a randomly chosen batch row.
    void init_codebook(const Eigen::MatrixXd& batch, std::mt19937_64& rng);

    Eigen::MatrixXd encoder_weight;  // 16 x 22
    Eigen::VectorXd encoder_bias;    // 16
    Eigen::MatrixXd decoder_weight;  // 22 x 16
    Eigen::VectorXd decoder_bias;    // 22
    Eigen::MatrixXd codebook;        // K x 16
    Eigen::VectorXd ema_counts;      // K
    Eigen::MatrixXd ema_sums;        // K x 16
    double commitment_beta;
    double ema_decay;
};

struct VqLosses {
    double reconstruction = 0.0;
    double commitment = 0.0;
    int reseeded = 0;
};

struct VqGradients {
    Eigen::MatrixXd encoder_weight;
    Eigen::VectorXd encoder_bias;
    Eigen::MatrixXd decoder_weight;
    Eigen::VectorXd decoder_bias;
    /// d(reconstruction)/d(latent) under the straight-through estimator, B x 16.
    Eigen::MatrixXd latent;
};

/// Losses and straight-through gradients of reconstruction + commitment for
/// a batch (rows = standardized layer vectors).
VqGradients vq_gradients(const VqModel& model, const Eigen::MatrixXd& batch, VqLosses* losses);

/// One gradient step on encoder/decoder followed by the EMA codebook update
/// and dead-codeword re-seeding. Returns the losses measured before the update.
VqLosses vq_train_step(VqModel& model, const Eigen::MatrixXd& batch, double learning_rate,
                       std::mt19937_64& rng);

struct VqTrainConfig {
    int epochs = 200;
    int batch_size = 64;
    double learning_rate = 0.02;
    std::uint64_t seed = 0;
};

/// Mean reconstruction MSE over `data` (rows = standardized layers).
double vq_reconstruction_mse(const VqModel& model, const Eigen::MatrixXd& data);

/// Trains on `data` with seeded shuffling; returns per-epoch reconstruction MSE.
std::vector<double> train_vq(VqModel& model, const Eigen::MatrixXd& data, const VqTrainConfig& config);

/// Raw mode: standardized 22-scalar layer vectors.
class StandardizedLayerEmbedding final : public LayerEmbedding {
public:
    explicit StandardizedLayerEmbedding(LayerStandardizer standardizer)
        : standardizer_(std::move(standardizer)) {}
    int width() const override { return kLayerFeatures; }
    void embed(const LayerDescriptor& layer, std::span<double> out) const override;
    const LayerStandardizer& standardizer() const { return standardizer_; }

private:
    LayerStandardizer standardizer_;
};

/// VQ mode: the quantized 16-dim codeword of each standardized layer.
class VqLayerEmbedding final : public LayerEmbedding {
public:
    VqLayerEmbedding(LayerStandardizer standardizer, VqModel model)
        : standardizer_(std::move(standardizer)), model_(std::move(model)) {}
    int width() const override { return VqModel::kLatentDim; }
    void embed(const LayerDescriptor& layer, std::span<double> out) const override;
    const LayerStandardizer& standardizer() const { return standardizer_; }
    const VqModel& model() const { return model_; }

private:
    LayerStandardizer standardizer_;
    VqModel model_;
};

nlohmann::json to_json(const LayerStandardizer& s);
LayerStandardizer standardizer_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VqModel& m);
VqModel vq_model_from_json(const nlohmann::json& j);

}  // namespace priomap
