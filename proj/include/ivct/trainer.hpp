#pragma once

// The training loop: curriculum sampling, batch assembly from synthesized
// examples (optionally cached per setting/image), scaled loss, Adam updates
// and CSV logging hooks.

#include <unordered_map>

#include "ivct/training.hpp"

namespace ivct::train {

template <typename T>
Tensor<T> stack_batch(const std::vector<Tensor<T>>& items) {
    const auto& s0 = items.front().shape();
    Shape os = s0;
    os[0] = static_cast<int64_t>(items.size()) * s0[0];
    std::vector<T> data;
    data.reserve(static_cast<size_t>(shape_numel(os)));
    for (const auto& t : items) data.insert(data.end(), t.values().begin(), t.values().end());
    return Tensor<T>::from_data(std::move(os), std::move(data));
}

struct StepLog {
    int64_t step = 0, epoch = 0;
    SettingSpec setting;
    double s_t = 1.0, loss = 0.0, lr = 0.0;
};

template <typename T>
class Trainer {
public:
    ScanGeometry geom;
    NoiseModel noise;
    TrainPlan plan;
    LossConfig loss_cfg;
    ProctModel<T> model;
    Adam<T> opt;
    std::vector<Image<T>> dataset;
    Image<T> context_phantom;

    Trainer(ScanGeometry g, ModelConfig mcfg, TrainPlan p, NoiseModel nm, LossConfig lc, RngState init_rng)
        : geom(std::move(g)), noise(nm), plan(p), loss_cfg(lc),
          model(ProctModel<T>::init_model(mcfg, init_rng)), rng_(p.seed, 0) {
        nn::ParamMap<T> pm;
        model.params(pm);
        for (auto& [k, t] : pm.items) params_.push_back(t);
        opt.beta1 = plan.beta1;
        opt.beta2 = plan.beta2;
        opt.clip_norm = plan.clip_norm;
        opt.init(params_);
    }

    std::vector<Tensor<T>>& parameters() { return params_; }

    void zero_grads() {
        for (auto& p : params_) p.zero_grad();
    }

    const TrainExample<T>& get_example(const SettingSpec& t, int64_t idx) {
        const std::string key = t.label() + "#" + std::to_string(idx);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        // each (setting, image) pair owns a private counter-based stream
        RngState ex_rng(plan.seed ^ 0x9e3779b97f4a7c15ULL, 0);
        ex_rng.counter = static_cast<uint64_t>(idx) * 1000003ULL + static_cast<uint64_t>(t.scenario) * 777767ULL +
                         static_cast<uint64_t>(t.value) * 31ULL;
        auto ex = make_example(dataset[static_cast<size_t>(idx)], t, geom, noise, context_phantom, ex_rng);
        if (!plan.cache_examples) {
            scratch_ = std::move(ex);
            return scratch_;
        }
        return cache_.emplace(key, std::move(ex)).first->second;
    }

    // one optimization step; returns the unscaled loss value
    StepLog train_step(int64_t epoch) {
        const auto t = sample_setting(plan, epoch, rng_);
        std::vector<Tensor<T>> xs, ys, cs;
        SamplingVector v;
        for (int64_t b = 0; b < plan.batch_size; ++b) {
            const int64_t idx = static_cast<int64_t>(rng_.below(static_cast<uint64_t>(dataset.size())));
            const auto& ex = get_example(t, idx);
            xs.push_back(ex.x);
            ys.push_back(ex.y);
            cs.push_back(ex.ctx);
            v = ex.v;
        }
        auto x = stack_batch(xs);
        auto y = stack_batch(ys);
        auto ctx = stack_batch(cs);

        auto yhat = model.forward(x, ctx, v);
        auto l = loss(yhat, y, loss_cfg);
        const double s_t = loss_cfg.use_scale ? loss_scale(t) : 1.0;
        auto scaled = scale(l, static_cast<T>(s_t));
        if (!std::isfinite(static_cast<double>(l.item())))
            throw std::runtime_error("non-finite loss at step " + std::to_string(step_) + " (" + t.label() + ")");
        zero_grads();
        backward(scaled);
        const double lr = plan.lr_at_epoch(epoch);
        opt.step(params_, lr);

        StepLog log;
        log.step = ++step_;
        log.epoch = epoch;
        log.setting = t;
        log.s_t = s_t;
        log.loss = static_cast<double>(l.item());
        log.lr = lr;
        return log;
    }

    int64_t steps_taken() const { return step_; }
    uint64_t rng_counter() const { return rng_.counter; }

    // resume support: restores the sampler position and step counter
    void restore_progress(int64_t step, uint64_t rng_counter) {
        step_ = step;
        rng_.counter = rng_counter;
    }

private:
    std::vector<Tensor<T>> params_;
    RngState rng_;
    std::unordered_map<std::string, TrainExample<T>> cache_;
    TrainExample<T> scratch_;
    int64_t step_ = 0;
};

} // namespace ivct::train
