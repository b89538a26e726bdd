// Copyright 2026 The priomap Authors
// SPDX-License-Identifier: Apache-2.0

#include "priomap/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "eigen_json.hpp"
#include "priomap/error.hpp"

namespace priomap {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr std::string_view kParamNames[] = {
    "lift_weight", "lift_bias", "score_weight", "score_vector", "slot_embedding", "query",
    "key",         "value",     "head_weight",  "head_bias",    "out_weight",     "out_bias",
};
static_assert(std::size(kParamNames) == SurrogateModel::kParamCount);

struct ChannelCache {
    MatrixXd pre;     // n x H, before relu
    MatrixXd hidden;  // n x H
    MatrixXd score;   // n x H, tanh(A h)
    VectorXd alpha;   // n
};

struct ForwardCache {
    std::array<ChannelCache, kMaxSlots> channel;
    MatrixXd z, query, key, value, attention, mixed, head_pre, head;  // N x H, attention N x N
    VectorXd y;
};

void softmax_in_place(Eigen::Ref<VectorXd> v) {
    const double top = v.maxCoeff();
    v = (v.array() - top).exp();
    v /= v.sum();
}

void run_forward(const SurrogateModel& model, const SurrogateInput& input, ForwardCache& c) {
    const auto& p = model.params;
    const int e = model.shape().embedding_width;
    const int hdim = model.shape().hidden;
    const double inv_rows = 1.0 / kMaxLayers;

    c.z = p[SurrogateModel::kSlotEmbedding];
    for (int s = 0; s < kMaxSlots; ++s) {
        const auto& in = input[static_cast<std::size_t>(s)];
        auto& ch = c.channel[static_cast<std::size_t>(s)];
        if (in.empty()) {
            ch = {};
            continue;
        }
        const auto& x = *in.rows;
        const auto n = static_cast<Eigen::Index>(in.component.size());
        ch.pre.resize(n, hdim);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int comp = in.component[static_cast<std::size_t>(i)];
            ch.pre.row(i).noalias() = x.row(i) * p[SurrogateModel::kLiftWeight].middleCols(comp * e, e).transpose();
        }
        ch.pre.rowwise() += p[SurrogateModel::kLiftBias].col(0).transpose();
        ch.hidden = ch.pre.cwiseMax(0.0);
        ch.score = (ch.hidden * p[SurrogateModel::kScoreWeight].transpose()).array().tanh();
        ch.alpha = ch.score * p[SurrogateModel::kScoreVector].col(0);
        softmax_in_place(ch.alpha);
        c.z.row(s) += ch.alpha.transpose() * ch.hidden + inv_rows * ch.hidden.colwise().sum();
    }

    c.query.noalias() = c.z * p[SurrogateModel::kQuery].transpose();
    c.key.noalias() = c.z * p[SurrogateModel::kKey].transpose();
    c.value.noalias() = c.z * p[SurrogateModel::kValue].transpose();

    std::vector<int> populated;
    for (int s = 0; s < kMaxSlots; ++s) {
        if (!input[static_cast<std::size_t>(s)].empty()) populated.push_back(s);
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(hdim));
    c.attention = MatrixXd::Zero(kMaxSlots, kMaxSlots);
    for (int s = 0; s < kMaxSlots; ++s) {
        // With no populated slot, a channel attends only to itself.
        const std::vector<int> keys = populated.empty() ? std::vector<int>{s} : populated;
        VectorXd logits(static_cast<Eigen::Index>(keys.size()));
        for (std::size_t j = 0; j < keys.size(); ++j) {
            logits(static_cast<Eigen::Index>(j)) = scale * c.query.row(s).dot(c.key.row(keys[j]));
        }
        softmax_in_place(logits);
        for (std::size_t j = 0; j < keys.size(); ++j) c.attention(s, keys[j]) = logits(static_cast<Eigen::Index>(j));
    }
    c.mixed = c.z + c.attention * c.value;

    c.head_pre = c.mixed * p[SurrogateModel::kHeadWeight].transpose();
    c.head_pre.rowwise() += p[SurrogateModel::kHeadBias].col(0).transpose();
    c.head = c.head_pre.cwiseMax(0.0);
    c.y = c.head * p[SurrogateModel::kOutWeight].col(0);
    c.y.array() += p[SurrogateModel::kOutBias](0, 0);
}

void run_backward(const SurrogateModel& model, const SurrogateInput& input, const ForwardCache& c,
                  const VectorXd& dy, SurrogateGradients& g) {
    const auto& p = model.params;
    const int e = model.shape().embedding_width;
    const double inv_rows = 1.0 / kMaxLayers;
    const double scale = 1.0 / std::sqrt(static_cast<double>(model.shape().hidden));

    g[SurrogateModel::kOutWeight].col(0).noalias() += c.head.transpose() * dy;
    g[SurrogateModel::kOutBias](0, 0) += dy.sum();
    MatrixXd d_head_pre = dy * p[SurrogateModel::kOutWeight].col(0).transpose();
    d_head_pre.array() *= (c.head_pre.array() > 0.0).cast<double>();
    g[SurrogateModel::kHeadWeight].noalias() += d_head_pre.transpose() * c.mixed;
    g[SurrogateModel::kHeadBias].col(0) += d_head_pre.colwise().sum().transpose();
    const MatrixXd d_mixed = d_head_pre * p[SurrogateModel::kHeadWeight];

    MatrixXd dz = d_mixed;
    const MatrixXd d_attention = d_mixed * c.value.transpose();
    const MatrixXd d_value = c.attention.transpose() * d_mixed;
    MatrixXd d_logits = c.attention.cwiseProduct(d_attention);
    for (int s = 0; s < kMaxSlots; ++s) {
        const double inner = d_logits.row(s).sum();
        d_logits.row(s) -= inner * c.attention.row(s);
    }
    const MatrixXd d_query = scale * d_logits * c.key;
    const MatrixXd d_key = scale * d_logits.transpose() * c.query;
    g[SurrogateModel::kQuery].noalias() += d_query.transpose() * c.z;
    g[SurrogateModel::kKey].noalias() += d_key.transpose() * c.z;
    g[SurrogateModel::kValue].noalias() += d_value.transpose() * c.z;
    dz.noalias() += d_query * p[SurrogateModel::kQuery];
    dz.noalias() += d_key * p[SurrogateModel::kKey];
    dz.noalias() += d_value * p[SurrogateModel::kValue];
    g[SurrogateModel::kSlotEmbedding] += dz;

    for (int s = 0; s < kMaxSlots; ++s) {
        const auto& in = input[static_cast<std::size_t>(s)];
        if (in.empty()) continue;
        const auto& ch = c.channel[static_cast<std::size_t>(s)];
        const VectorXd dg = dz.row(s).transpose();
        const auto n = ch.hidden.rows();

        MatrixXd d_hidden = (ch.alpha.array() + inv_rows).matrix() * dg.transpose();
        const VectorXd d_alpha = ch.hidden * dg;
        const VectorXd d_s = ch.alpha.cwiseProduct((d_alpha.array() - ch.alpha.dot(d_alpha)).matrix());
        g[SurrogateModel::kScoreVector].col(0).noalias() += ch.score.transpose() * d_s;
        MatrixXd d_score_pre = d_s * p[SurrogateModel::kScoreVector].col(0).transpose();
        d_score_pre.array() *= 1.0 - ch.score.array().square();
        g[SurrogateModel::kScoreWeight].noalias() += d_score_pre.transpose() * ch.hidden;
        d_hidden.noalias() += d_score_pre * p[SurrogateModel::kScoreWeight];

        d_hidden.array() *= (ch.pre.array() > 0.0).cast<double>();
        g[SurrogateModel::kLiftBias].col(0) += d_hidden.colwise().sum().transpose();
        const auto& x = *in.rows;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int comp = in.component[static_cast<std::size_t>(i)];
            g[SurrogateModel::kLiftWeight].middleCols(comp * e, e).noalias() +=
                d_hidden.row(i).transpose() * x.row(i);
        }
    }
}

struct LossSum {
    double squared = 0.0;
    int count = 0;
};

LossSum accumulate(const SurrogateModel& model, std::span<const TrainingExample* const> batch,
                   SurrogateGradients* grads) {
    LossSum sum;
    for (const auto* ex : batch) {
        for (bool m : ex->mask) sum.count += m ? 1 : 0;
    }
    if (sum.count == 0) return sum;
    ForwardCache cache;
    VectorXd dy(kMaxSlots);
    for (const auto* ex : batch) {
        run_forward(model, ex->input, cache);
        dy.setZero();
        for (std::size_t s = 0; s < kMaxSlots; ++s) {
            if (!ex->mask[s]) continue;
            const double err = cache.y(static_cast<Eigen::Index>(s)) - ex->target[s];
            sum.squared += err * err;
            dy(static_cast<Eigen::Index>(s)) = 2.0 * err / sum.count;
        }
        if (grads) run_backward(model, ex->input, cache, dy, *grads);
    }
    return sum;
}

void check_shape(const SurrogateShape& shape) {
    if (shape.components < 1 || shape.embedding_width < 1 || shape.hidden < 1) {
        throw InvalidArgument("surrogate dimensions must be positive");
    }
}

}  // namespace

SurrogateInput surrogate_input(const WorkloadTensor& tensor, const SurrogateShape& shape) {
    if (tensor.components() != shape.components || tensor.embedding_width() != shape.embedding_width) {
        throw StructuralError("workload tensor is " + std::to_string(tensor.components()) + "x" +
                              std::to_string(tensor.embedding_width()) + ", model expects " +
                              std::to_string(shape.components) + "x" + std::to_string(shape.embedding_width));
    }
    SurrogateInput input;
    const int e = shape.embedding_width;
    for (int s = 0; s < kMaxSlots; ++s) {
        std::vector<int> layers;
        auto& ch = input[static_cast<std::size_t>(s)];
        for (int l = 0; l < kMaxLayers; ++l) {
            const int block = tensor.nonzero_block(s, l);
            if (block < 0) continue;
            layers.push_back(l);
            ch.component.push_back(block);
        }
        if (layers.empty()) continue;
        auto rows = std::make_shared<MatrixXd>(static_cast<Eigen::Index>(layers.size()), e);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto row = tensor.row(s, layers[i]);
            for (int k = 0; k < e; ++k) {
                (*rows)(static_cast<Eigen::Index>(i), k) = row[static_cast<std::size_t>(ch.component[i] * e + k)];
            }
        }
        ch.rows = std::move(rows);
    }
    return input;
}

SurrogateModel::SurrogateModel(const SurrogateShape& shape, std::uint64_t seed) : shape_(shape) {
    check_shape(shape);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const int h = shape.hidden;
    auto init = [&](int rows, int cols, double stddev) {
        MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * normal(rng);
        return m;
    };
    const double inv_h = 1.0 / std::sqrt(static_cast<double>(h));
    params[kLiftWeight] = init(h, shape.components * shape.embedding_width,
                               std::sqrt(2.0 / shape.embedding_width));
    params[kLiftBias] = MatrixXd::Zero(h, 1);
    params[kScoreWeight] = init(h, h, inv_h);
    params[kScoreVector] = init(h, 1, inv_h);
    params[kSlotEmbedding] = init(kMaxSlots, h, 0.1);
    params[kQuery] = init(h, h, inv_h);
    params[kKey] = init(h, h, inv_h);
    params[kValue] = init(h, h, inv_h);
    params[kHeadWeight] = init(h, h, std::sqrt(2.0) * inv_h);
    params[kHeadBias] = MatrixXd::Zero(h, 1);
    params[kOutWeight] = init(h, 1, inv_h);
    params[kOutBias] = MatrixXd::Zero(1, 1);
}

std::string_view SurrogateModel::param_name(int p) {
    if (p < 0 || p >= kParamCount) throw InvalidArgument("parameter index out of range");
    return kParamNames[p];
}

std::size_t SurrogateModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& m : params) n += static_cast<std::size_t>(m.size());
    return n;
}

SlotValues SurrogateModel::forward(const SurrogateInput& input) const {
    ForwardCache cache;
    run_forward(*this, input, cache);
    SlotValues out{};
    for (std::size_t s = 0; s < kMaxSlots; ++s) out[s] = cache.y(static_cast<Eigen::Index>(s));
    return out;
}

SlotValues SurrogateModel::forward(const WorkloadTensor& tensor) const {
    return forward(surrogate_input(tensor, shape_));
}

std::array<VectorXd, kMaxSlots> SurrogateModel::pooling_weights(const SurrogateInput& input) const {
    ForwardCache cache;
    run_forward(*this, input, cache);
    std::array<VectorXd, kMaxSlots> out;
    for (std::size_t s = 0; s < kMaxSlots; ++s) out[s] = cache.channel[s].alpha;
    return out;
}

SurrogateGradients zero_gradients(const SurrogateModel& model) {
    SurrogateGradients g;
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = MatrixXd::Zero(model.params[i].rows(), model.params[i].cols());
    }
    return g;
}

double surrogate_loss(const SurrogateModel& model, std::span<const TrainingExample* const> batch,
                      SurrogateGradients* grads) {
    const auto sum = accumulate(model, batch, grads);
    return sum.count == 0 ? 0.0 : sum.squared / sum.count;
}

double surrogate_loss(const SurrogateModel& model, std::span<const TrainingExample> examples) {
    std::vector<const TrainingExample*> all;
    all.reserve(examples.size());
    for (const auto& ex : examples) all.push_back(&ex);
    return surrogate_loss(model, all);
}

TrainingHistory train_surrogate(SurrogateModel& model, std::span<const TrainingExample> train,
                                std::span<const TrainingExample> validation,
                                const SurrogateTrainConfig& config) {
    if (config.epochs < 0 || config.batch_size < 1) throw InvalidArgument("epochs >= 0 and batch size >= 1 required");
    if (!(config.learning_rate >= 0.0) || !(config.momentum >= 0.0 && config.momentum < 1.0)) {
        throw InvalidArgument("learning rate must be >= 0 and momentum in [0, 1)");
    }
    if (train.empty()) throw InvalidArgument("surrogate training needs a non-empty dataset");
    TrainingHistory history;
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto velocity = zero_gradients(model);
    std::vector<const TrainingExample*> batch;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double squared = 0.0;
        int count = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            batch.clear();
            for (std::size_t i = start; i < stop; ++i) batch.push_back(&train[order[i]]);
            auto grads = zero_gradients(model);
            const auto sum = accumulate(model, batch, &grads);
            squared += sum.squared;
            count += sum.count;
            for (std::size_t p = 0; p < grads.size(); ++p) {
                velocity[p] = config.momentum * velocity[p] - config.learning_rate * grads[p];
                model.params[p] += velocity[p];
            }
        }
        history.train_loss.push_back(count == 0 ? 0.0 : squared / count);
        history.validation_loss.push_back(surrogate_loss(model, validation));
    }
    return history;
}

nlohmann::json to_json(const SurrogateModel& model) {
    nlohmann::json params = nlohmann::json::object();
    for (int p = 0; p < SurrogateModel::kParamCount; ++p) {
        params[std::string(SurrogateModel::param_name(p))] = matrix_to_json(model.params[static_cast<std::size_t>(p)]);
    }
    const auto& s = model.shape();
    return {{"shape", {{"components", s.components}, {"embedding_width", s.embedding_width}, {"hidden", s.hidden}}},
            {"params", std::move(params)}};
}

SurrogateModel surrogate_model_from_json(const nlohmann::json& j) {
    try {
        SurrogateShape shape;
        shape.components = j.at("shape").at("components").get<int>();
        shape.embedding_width = j.at("shape").at("embedding_width").get<int>();
        shape.hidden = j.at("shape").at("hidden").get<int>();
        SurrogateModel model(shape);
        for (int p = 0; p < SurrogateModel::kParamCount; ++p) {
            auto& dst = model.params[static_cast<std::size_t>(p)];
            const auto m = matrix_from_json(j.at("params").at(std::string(SurrogateModel::param_name(p))));
            if (m.rows() != dst.rows() || m.cols() != dst.cols()) {
                throw ConfigError("checkpoint parameter '" + std::string(SurrogateModel::param_name(p)) +
                                  "' has the wrong shape");
            }
            dst = m;
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed surrogate checkpoint: ") + e.what());
    }
}

std::string_view to_string(EmbeddingMode mode) { return mode == EmbeddingMode::raw ? "raw" : "vq"; }

EmbeddingMode parse_embedding_mode(std::string_view s) {
    if (s == "raw") return EmbeddingMode::raw;
    if (s == "vq") return EmbeddingMode::vq;
    throw ConfigError("unknown embedding mode '" + std::string(s) + "' (expected raw or vq)");
}

std::unique_ptr<LayerEmbedding> SurrogateBundle::make_embedding() const {
    if (mode == EmbeddingMode::raw) return std::make_unique<StandardizedLayerEmbedding>(standardizer);
    if (!vq) throw ConfigError("vq embedding mode without a VQ model");
    return std::make_unique<VqLayerEmbedding>(standardizer, *vq);
}

nlohmann::json to_json(const SurrogateBundle& bundle) {
    nlohmann::json j{{"format", "priomap-surrogate"},
                     {"version", 1},
                     {"embedding", std::string(to_string(bundle.mode))},
                     {"standardizer", to_json(bundle.standardizer)},
                     {"model", to_json(bundle.model)}};
    if (bundle.vq) j["vq"] = to_json(*bundle.vq);
    return j;
}

SurrogateBundle surrogate_bundle_from_json(const nlohmann::json& j) {
    try {
        if (j.value("format", "") != "priomap-surrogate") throw ConfigError("not a priomap surrogate checkpoint");
        if (j.value("version", 0) != 1) throw ConfigError("unsupported surrogate checkpoint version");
        SurrogateBundle b;
        b.mode = parse_embedding_mode(j.at("embedding").get<std::string>());
        b.standardizer = standardizer_from_json(j.at("standardizer"));
        if (j.contains("vq")) b.vq = vq_model_from_json(j.at("vq"));
        b.model = surrogate_model_from_json(j.at("model"));
        const int width = b.make_embedding()->width();
        if (b.model.shape().embedding_width != width) {
            throw ConfigError("surrogate embedding width does not match its layer embedding");
        }
        return b;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed surrogate checkpoint: ") + e.what());
    }
}

SurrogateEstimator::SurrogateEstimator(SurrogateBundle bundle, Platform platform)
    : bundle_(std::move(bundle)), platform_(std::move(platform)), embedding_(bundle_.make_embedding()) {
    if (bundle_.model.shape().components != platform_.components()) {
        throw ConfigError("surrogate trained for " + std::to_string(bundle_.model.shape().components) +
                          " components, platform has " + std::to_string(platform_.components()));
    }
}

ThroughputReport SurrogateEstimator::estimate(const Workload& workload, const Mapping& mapping) const {
    const auto tensor = build_workload_tensor(workload, mapping, *embedding_, platform_.components());
    const auto y = bundle_.model.forward(tensor);
    const auto ideals = ideal_throughputs(workload, platform_);
    ThroughputReport r;
    for (std::size_t i = 0; i < workload.size(); ++i) r.throughput.push_back(std::max(0.0, y[i]) * ideals[i]);
    return r;
}

}  // namespace priomap
