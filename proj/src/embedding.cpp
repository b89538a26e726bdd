// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include "priomap/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eigen_json.hpp"
#include "priomap/error.hpp"

namespace priomap {

LayerStandardizer LayerStandardizer::fit(std::span<const DnnDescriptor> dnns) {
    LayerStandardizer s;
    std::array<double, kLayerFeatures> sum{}, sq{};
    std::size_t n = 0;
    for (const auto& d : dnns) {
        for (const auto& l : d.layers()) {
            const auto v = encode_layer(l);
            for (std::size_t k = 0; k < v.size(); ++k) {
                const double x = std::log1p(v[k]);
                sum[k] += x;
                sq[k] += x * x;
            }
            ++n;
        }
    }
    if (n == 0) throw InvalidArgument("cannot fit a standardizer without layers");
    for (std::size_t k = 0; k < sum.size(); ++k) {
        s.mean[k] = sum[k] / static_cast<double>(n);
        const double var = std::max(0.0, sq[k] / static_cast<double>(n) - s.mean[k] * s.mean[k]);
        s.scale[k] = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Eigen::VectorXd LayerStandardizer::apply(const LayerDescriptor& layer) const {
    const auto v = encode_layer(layer);
    Eigen::VectorXd out(kLayerFeatures);
    for (std::size_t k = 0; k < v.size(); ++k) {
        out[static_cast<Eigen::Index>(k)] = (std::log1p(v[k]) - mean[k]) / scale[k];
    }
    return out;
}

Eigen::MatrixXd LayerStandardizer::apply_all(std::span<const DnnDescriptor> dnns) const {
    std::size_t n = 0;
    for (const auto& d : dnns) n += d.layers().size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n), kLayerFeatures);
    Eigen::Index r = 0;
    for (const auto& d : dnns) {
        for (const auto& l : d.layers()) out.row(r++) = apply(l).transpose();
    }
    return out;
}

VqModel::VqModel(int codebook_size, double beta, double decay, std::uint64_t seed)
    : commitment_beta(beta), ema_decay(decay) {
    if (codebook_size < 2) throw InvalidArgument("codebook needs at least 2 codewords");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto init = [&](Eigen::MatrixXd& m, int rows, int cols) {
        const double std = std::sqrt(2.0 / static_cast<double>(rows + cols));
        m.resize(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std * normal(rng);
    };
    init(encoder_weight, kLatentDim, kInputDim);
    init(decoder_weight, kInputDim, kLatentDim);
    encoder_bias = Eigen::VectorXd::Zero(kLatentDim);
    decoder_bias = Eigen::VectorXd::Zero(kInputDim);
    codebook.resize(codebook_size, kLatentDim);
    for (Eigen::Index i = 0; i < codebook.size(); ++i) codebook.data()[i] = normal(rng);
    ema_counts = Eigen::VectorXd::Ones(codebook_size);
    ema_sums = codebook;
}

Eigen::VectorXd VqModel::encode(const Eigen::VectorXd& x) const {
    return encoder_weight * x + encoder_bias;
}

Quantized VqModel::quantize(const Eigen::VectorXd& latent) const {
    Quantized q;
    q.distance = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < codebook.rows(); ++k) {
        const double d = (codebook.row(k).transpose() - latent).squaredNorm();
        if (d < q.distance) {
            q.distance = d;
            q.index = static_cast<int>(k);
        }
    }
    q.vector = codebook.row(q.index).transpose();
    return q;
}

Eigen::VectorXd VqModel::reconstruct(const Eigen::VectorXd& quantized) const {
    return decoder_weight * quantized + decoder_bias;
}

void VqModel::init_codebook(const Eigen::MatrixXd& batch, std::mt19937_64& rng) {
    if (batch.rows() == 0) throw InvalidArgument("empty batch");
    std::uniform_int_distribution<Eigen::Index> pick(0, batch.rows() - 1);
    for (Eigen::Index k = 0; k < codebook.rows(); ++k) {
        codebook.row(k) = encode(batch.row(pick(rng)).transpose()).transpose();
    }
    ema_counts.setOnes();
    ema_sums = codebook;
}

namespace {

struct Assignment {
    Eigen::MatrixXd latents;    // B x 16
    Eigen::MatrixXd quantized;  // B x 16
    std::vector<int> index;
};

Assignment assign(const VqModel& m, const Eigen::MatrixXd& batch) {
    Assignment a;
    a.latents = (batch * m.encoder_weight.transpose()).rowwise() + m.encoder_bias.transpose();
    a.quantized.resize(batch.rows(), VqModel::kLatentDim);
    a.index.resize(static_cast<std::size_t>(batch.rows()));
    for (Eigen::Index b = 0; b < batch.rows(); ++b) {
        const auto q = m.quantize(a.latents.row(b).transpose());
        a.quantized.row(b) = q.vector.transpose();
        a.index[static_cast<std::size_t>(b)] = q.index;
    }
    return a;
}

}  // namespace

VqGradients vq_gradients(const VqModel& m, const Eigen::MatrixXd& batch, VqLosses* losses) {
    if (batch.rows() == 0) throw InvalidArgument("vq batch must be non-empty");
    if (batch.cols() != VqModel::kInputDim) throw StructuralError("vq batch must have 22 columns");
    const auto a = assign(m, batch);
    const double B = static_cast<double>(batch.rows());
    const Eigen::MatrixXd recon =
        (a.quantized * m.decoder_weight.transpose()).rowwise() + m.decoder_bias.transpose();
    const Eigen::MatrixXd diff = recon - batch;
    const Eigen::MatrixXd commit_diff = a.latents - a.quantized;
    if (losses != nullptr) {
        losses->reconstruction = diff.squaredNorm() / (B * VqModel::kInputDim);
        losses->commitment = m.commitment_beta * commit_diff.squaredNorm() / (B * VqModel::kLatentDim);
    }

    VqGradients g;
    const Eigen::MatrixXd d_recon = 2.0 * diff / (B * VqModel::kInputDim);
    g.decoder_weight = d_recon.transpose() * a.quantized;
    g.decoder_bias = d_recon.colwise().sum().transpose();
    // Straight-through: the gradient reaching the quantized vector is passed to the latent.
    g.latent = d_recon * m.decoder_weight;
    const Eigen::MatrixXd d_latent =
        g.latent + 2.0 * m.commitment_beta * commit_diff / (B * VqModel::kLatentDim);
    g.encoder_weight = d_latent.transpose() * batch;
    g.encoder_bias = d_latent.colwise().sum().transpose();
    return g;
}

VqLosses vq_train_step(VqModel& m, const Eigen::MatrixXd& batch, double lr, std::mt19937_64& rng) {
    VqLosses losses;
    const auto a = assign(m, batch);
    const auto g = vq_gradients(m, batch, &losses);
    m.encoder_weight -= lr * g.encoder_weight;
    m.encoder_bias -= lr * g.encoder_bias;
    m.decoder_weight -= lr * g.decoder_weight;
    m.decoder_bias -= lr * g.decoder_bias;

    const Eigen::Index K = m.codebook.rows();
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, VqModel::kLatentDim);
    for (Eigen::Index b = 0; b < batch.rows(); ++b) {
        const auto k = a.index[static_cast<std::size_t>(b)];
        counts[k] += 1.0;
        sums.row(k) += a.latents.row(b);
    }
    const double decay = m.ema_decay;
    m.ema_counts = decay * m.ema_counts + (1.0 - decay) * counts;
    m.ema_sums = decay * m.ema_sums + (1.0 - decay) * sums;
    std::uniform_int_distribution<Eigen::Index> pick(0, batch.rows() - 1);
    for (Eigen::Index k = 0; k < K; ++k) {
        if (m.ema_counts[k] < VqModel::kDeadCountThreshold) {
            const Eigen::RowVectorXd z = a.latents.row(pick(rng));
            m.codebook.row(k) = z;
            m.ema_sums.row(k) = z;
            m.ema_counts[k] = 1.0;
            ++losses.reseeded;
        } else {
            m.codebook.row(k) = m.ema_sums.row(k) / m.ema_counts[k];
        }
    }
    return losses;
}

double vq_reconstruction_mse(const VqModel& m, const Eigen::MatrixXd& data) {
    VqLosses l;
    vq_gradients(m, data, &l);
    return l.reconstruction;
}

std::vector<double> train_vq(VqModel& m, const Eigen::MatrixXd& data, const VqTrainConfig& cfg) {
    if (data.rows() == 0) throw InvalidArgument("vq training data must be non-empty");
    std::mt19937_64 rng(cfg.seed);
    m.init_codebook(data, rng);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> history;
    for (int e = 0; e < cfg.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            Eigen::MatrixXd batch(static_cast<Eigen::Index>(end - start), VqModel::kInputDim);
            for (std::size_t i = start; i < end; ++i) {
                batch.row(static_cast<Eigen::Index>(i - start)) = data.row(order[i]);
            }
            vq_train_step(m, batch, cfg.learning_rate, rng);
        }
        history.push_back(vq_reconstruction_mse(m, data));
    }
    return history;
}

void StandardizedLayerEmbedding::embed(const LayerDescriptor& layer, std::span<double> out) const {
    const auto v = standardizer_.apply(layer);
    std::copy(v.data(), v.data() + v.size(), out.begin());
}

void VqLayerEmbedding::embed(const LayerDescriptor& layer, std::span<double> out) const {
    const auto q = model_.quantize(model_.encode(standardizer_.apply(layer)));
    std::copy(q.vector.data(), q.vector.data() + q.vector.size(), out.begin());
}

nlohmann::json to_json(const LayerStandardizer& s) {
    return nlohmann::json{{"mean", s.mean}, {"scale", s.scale}};
}

LayerStandardizer standardizer_from_json(const nlohmann::json& j) {
    LayerStandardizer s;
    s.mean = j.at("mean").get<LayerVector>();
    s.scale = j.at("scale").get<LayerVector>();
    return s;
}

nlohmann::json to_json(const VqModel& m) {
    return nlohmann::json{{"encoder_weight", matrix_to_json(m.encoder_weight)},
                          {"encoder_bias", vector_to_json(m.encoder_bias)},
                          {"decoder_weight", matrix_to_json(m.decoder_weight)},
                          {"decoder_bias", vector_to_json(m.decoder_bias)},
                          {"codebook", matrix_to_json(m.codebook)},
                          {"ema_counts", vector_to_json(m.ema_counts)},
                          {"ema_sums", matrix_to_json(m.ema_sums)},
                          {"commitment_beta", m.commitment_beta},
                          {"ema_decay", m.ema_decay}};
}

VqModel vq_model_from_json(const nlohmann::json& j) {
    const auto codebook = matrix_from_json(j.at("codebook"));
    VqModel m(static_cast<int>(codebook.rows()), j.at("commitment_beta").get<double>(),
              j.at("ema_decay").get<double>());
    m.encoder_weight = matrix_from_json(j.at("encoder_weight"));
    m.encoder_bias = vector_from_json(j.at("encoder_bias"));
    m.decoder_weight = matrix_from_json(j.at("decoder_weight"));
    m.decoder_bias = vector_from_json(j.at("decoder_bias"));
    m.codebook = codebook;
    m.ema_counts = vector_from_json(j.at("ema_counts"));
    m.ema_sums = matrix_from_json(j.at("ema_sums"));
    if (m.encoder_weight.rows() != VqModel::kLatentDim || m.encoder_weight.cols() != VqModel::kInputDim ||
        m.decoder_weight.rows() != VqModel::kInputDim || m.decoder_weight.cols() != VqModel::kLatentDim ||
        m.codebook.cols() != VqModel::kLatentDim) {
        throw ConfigError("vq checkpoint has inconsistent shapes");
    }
    return m;
}

}  // namespace priomap
