#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sckd/data.hpp"
#include "sckd/error.hpp"
#include "sckd/matrix.hpp"
#include "sckd/model.hpp"
#include "sckd/objective.hpp"

namespace sckd {

// velocity <- momentum * velocity + grad + weight_decay * param
// param    <- param - lr * velocity
inline void sgd_step(Matrix& param, const Matrix& grad, Matrix& velocity, double lr,
                     double momentum, double weight_decay) {
    require_same_shape(param, grad, "sgd_step");
    require_same_shape(param, velocity, "sgd_step");
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * param[i];
        param[i] -= lr * velocity[i];
    }
}

// Linear ramp lr_floor -> lr_peak over [0, warmup], then cosine decay back to
// lr_floor over (warmup, total]. `step` is the 0-based optimizer step.
inline double cosine_lr(std::size_t step, std::size_t warmup_steps, std::size_t total_steps,
                        double lr_floor, double lr_peak) {
    if (warmup_steps >= total_steps) throw ContractError("warmup_steps must be < total_steps");
    if (step > total_steps) {
        throw ContractError("lr step " + std::to_string(step) + " past total " +
                            std::to_string(total_steps));
    }
    if (!(lr_floor > 0.0) || lr_floor > lr_peak) throw ConfigError("need 0 < lr_floor <= lr_peak");
    if (step <= warmup_steps) {
        if (warmup_steps == 0) return lr_peak;
        return lr_floor + (lr_peak - lr_floor) * static_cast<double>(step) /
                              static_cast<double>(warmup_steps);
    }
    const double progress = static_cast<double>(step - warmup_steps) /
                            static_cast<double>(total_steps - warmup_steps);
    return lr_floor + 0.5 * (lr_peak - lr_floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

// Holds velocity state for a fixed set of registered blocks. The replica
// encoder is never registered anywhere, which is what keeps it frozen.
class SgdOptimizer {
public:
    SgdOptimizer(std::vector<ParamBlock> params, double momentum, double weight_decay)
        : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
        if (momentum_ < 0.0 || momentum_ >= 1.0) throw ConfigError("momentum must be in [0, 1)");
        if (weight_decay_ < 0.0) throw ConfigError("weight_decay must be >= 0");
        velocity_.reserve(params_.size());
        for (const auto& p : params_) {
            velocity_.emplace_back(p.values->rows(), p.values->cols(), 0.0);
        }
    }

    void step(GradientSet& grads, double lr) {
        std::unordered_map<std::string, const Matrix*> by_name;
        for (const auto& g : grads.blocks()) by_name.emplace(g.name, g.values);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const auto it = by_name.find(params_[i].name);
            if (it == by_name.end()) {
                throw ContractError("no gradient for block '" + params_[i].name + "'");
            }
            sgd_step(*params_[i].values, *it->second, velocity_[i], lr, momentum_,
                     params_[i].is_bias ? 0.0 : weight_decay_);
        }
    }

    const std::vector<ParamBlock>& registered_blocks() const { return params_; }

private:
    std::vector<ParamBlock> params_;
    double momentum_;
    double weight_decay_;
    std::vector<Matrix> velocity_;
};

namespace detail {

// Independent deterministic streams per training concern.
inline constexpr std::uint64_t kStage1ShuffleSalt = 0x5331;
inline constexpr std::uint64_t kStage2BatchSalt = 0x5332;
inline constexpr std::uint64_t kStage2StepSalt = 0x5353;

}  // namespace detail

// Supervised warm-up loss: CE between known-head softmax (model temperature)
// and one-hot labels. Known-head logit gradient written to d_known when given.
inline double stage1_ce(const ModelState& model, const Matrix& x, const std::vector<int>& labels,
                        ForwardTrace* trace_out, Matrix* d_known) {
    EncoderTrace enc = encoder_forward(model, x);
    Matrix known_logits = detail::affine(enc.features, model.known_w, model.known_b);
    const Matrix probs = row_softmax(known_logits, model.config.temperature);
    const Matrix targets = one_hot_targets(labels, model.config.num_known);
    const double loss = ce_loss(probs, targets);
    if (d_known != nullptr) {
        *d_known = Matrix(probs.rows(), probs.cols());
        const double scale =
            1.0 / (model.config.temperature * static_cast<double>(probs.rows()));
        for (std::size_t i = 0; i < probs.size(); ++i) {
            (*d_known)[i] = (probs[i] - targets[i]) * scale;
        }
    }
    if (trace_out != nullptr) {
        trace_out->encoder = std::move(enc);
        trace_out->known_logits = std::move(known_logits);
    }
    return loss;
}

// Supervised training on labeled data only. Touches encoder and known head;
// the novel head keeps its initialization. Returns per-epoch mean CE.
inline std::vector<double> train_stage1(ModelState& model, const DiscoveryDataset& dataset,
                                        const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t nl = dataset.labeled_size();
    if (nl == 0) throw ConfigError("stage 1 needs a labeled subset");
    const std::size_t bs = std::min(cfg.batch_size, nl);
    const std::size_t batches_per_epoch = std::max<std::size_t>(1, nl / bs);
    const std::size_t total_steps = batches_per_epoch * cfg.stage1_epochs;
    const std::size_t warmup_steps = batches_per_epoch * cfg.warmup_epochs;

    Rng shuffle_rng(mix_seed(cfg.seed, detail::kStage1ShuffleSalt));
    std::vector<std::size_t> order(nl);
    std::iota(order.begin(), order.end(), std::size_t{0});

    SgdOptimizer opt([&] {
        auto blocks = model.encoder_blocks();
        for (auto& b : model.known_head_blocks()) blocks.push_back(b);
        return blocks;
    }(), cfg.momentum, cfg.weight_decay);

    std::vector<double> epoch_ce;
    epoch_ce.reserve(cfg.stage1_epochs);
    std::size_t global_step = 0;
    for (std::size_t epoch = 0; epoch < cfg.stage1_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double ce_sum = 0.0;
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            Matrix x(bs, dataset.feature_dim());
            std::vector<int> y(bs);
            for (std::size_t i = 0; i < bs; ++i) {
                const std::size_t idx = order[b * bs + i];
                x.set_row(i, dataset.labeled_feature(idx));
                y[i] = dataset.labeled_label(idx);
            }
            ForwardTrace trace;
            Matrix d_known;
            ce_sum += stage1_ce(model, x, y, &trace, &d_known);
            GradientSet g = GradientSet::zeros_like(model);
            backward(model, x, trace, &d_known, nullptr, nullptr, g);
            const double lr =
                cosine_lr(global_step, warmup_steps, total_steps, cfg.lr_floor, cfg.lr_peak);
            opt.step(g, lr);
            ++global_step;
        }
        epoch_ce.push_back(ce_sum / static_cast<double>(batches_per_epoch));
    }
    model.require_finite();
    return epoch_ce;
}

struct Stage2Record {
    std::size_t epoch = 0;
    double lr = 0.0;  // learning rate at the epoch's first step
    LossBreakdown losses;  // means over the epoch's batches
};

using EpochHook = std::function<void(const Stage2Record& record, const ModelState& model)>;

// Discovery training with the full objective. The replica must already be
// snapshotted from the stage-1 model; it is read, never written.
inline std::vector<Stage2Record> train_stage2(ModelState& model, const ReplicaEncoder& replica,
                                              const DiscoveryDataset& dataset,
                                              const TrainConfig& cfg,
                                              const EpochHook& after_epoch = {}) {
    cfg.validate();
    BatchSampler sampler(dataset, cfg.batch_size, mix_seed(cfg.seed, detail::kStage2BatchSalt));
    Rng step_rng(mix_seed(cfg.seed, detail::kStage2StepSalt));
    const std::size_t batches_per_epoch = sampler.batches_per_epoch();
    if (batches_per_epoch == 0) throw ConfigError("dataset too small for one batch per epoch");
    const std::size_t total_steps = batches_per_epoch * cfg.stage2_epochs;
    const std::size_t warmup_steps = batches_per_epoch * cfg.warmup_epochs;

    SgdOptimizer opt(model.parameter_blocks(), cfg.momentum, cfg.weight_decay);

    std::vector<Stage2Record> log;
    log.reserve(cfg.stage2_epochs);
    std::size_t global_step = 0;
    for (std::size_t epoch = 0; epoch < cfg.stage2_epochs; ++epoch) {
        sampler.start_epoch();
        Stage2Record rec;
        rec.epoch = epoch;
        rec.lr = cosine_lr(global_step, warmup_steps, total_steps, cfg.lr_floor, cfg.lr_peak);
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            const Batch batch = sampler.next_batch();
            const StepCache cache = compute_step(model, &replica, batch, cfg, step_rng);
            const FrozenTargets frozen = freeze_targets(cache, cfg);
            GradientSet g = objective_gradient(model, batch, cfg, frozen, cache);
            const double lr =
                cosine_lr(global_step, warmup_steps, total_steps, cfg.lr_floor, cfg.lr_peak);
            opt.step(g, lr);
            ++global_step;
            rec.losses.ce += cache.losses.ce;
            rec.losses.l_k_to_n += cache.losses.l_k_to_n;
            rec.losses.l_n_to_k += cache.losses.l_n_to_k;
            rec.losses.total += cache.losses.total;
        }
        const double inv = 1.0 / static_cast<double>(batches_per_epoch);
        rec.losses.ce *= inv;
        rec.losses.l_k_to_n *= inv;
        rec.losses.l_n_to_k *= inv;
        rec.losses.total *= inv;
        log.push_back(rec);
        if (after_epoch) after_epoch(rec, model);
    }
    model.require_finite();
    return log;
}

}  // namespace sckd
