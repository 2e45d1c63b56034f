#include "unirec/train/optim.hpp"

#include <cmath>
#include <numbers>

UNIREC_NAMESPACE_BEGIN

double LrSchedule::at(std::size_t step) const {
    if (warmup_steps > 0 && step < warmup_steps) {
        return peak_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    }
    if (total_steps <= warmup_steps) return peak_lr;
    const double progress = std::min(
        1.0, static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps));
    return peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

double global_grad_norm(const NamedTensors& params) {
    double total = 0;
    for (const auto& [name, t] : params) {
        for (Real g : t.grad()) total += static_cast<double>(g) * static_cast<double>(g);
    }
    return std::sqrt(total);
}

double clip_grad_norm(const NamedTensors& params, double max_norm) {
    const double norm = global_grad_norm(params);
    if (norm > max_norm && norm > 0) {
        const double factor = max_norm / norm;
        for (const auto& [name, t] : params) {
            Tensor handle = t;
            if (handle.grad().empty()) continue;
            for (Real& g : handle.mutable_grad()) g = static_cast<Real>(g * factor);
        }
    }
    return norm;
}

AdamW::AdamW(NamedTensors params, AdamWConfig config) : params_(std::move(params)), config_(config) {
    for (const auto& [name, t] : params_) {
        m_.emplace_back(t.numel(), Real(0));
        v_.emplace_back(t.numel(), Real(0));
    }
}

void AdamW::step(double lr) {
    ++step_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    const double decay = 1.0 - lr * config_.weight_decay;
    for (std::size_t p = 0; p < params_.size(); ++p) {
        Tensor t = params_[p].second;
        auto w = t.mutable_data();
        auto g = t.grad();
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
            const double mi = b1 * m[i] + (1.0 - b1) * gi;
            const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
            m[i] = static_cast<Real>(mi);
            v[i] = static_cast<Real>(vi);
            const double mhat = mi / c1;
            const double vhat = vi / c2;
            const double updated = static_cast<double>(w[i]) * decay - lr * mhat / (std::sqrt(vhat) + config_.eps);
            w[i] = static_cast<Real>(updated);
        }
    }
}

void AdamW::zero_grad() {
    for (auto& [name, t] : params_) {
        Tensor handle = t;
        handle.zero_grad();
    }
}

NamedTensors AdamW::moments() const {
    NamedTensors out;
    for (std::size_t p = 0; p < params_.size(); ++p) {
        const auto& [name, t] = params_[p];
        out.emplace_back(name + ".m", Tensor::from_data(t.shape(), m_[p]));
        out.emplace_back(name + ".v", Tensor::from_data(t.shape(), v_[p]));
    }
    return out;
}

void AdamW::restore(const NamedTensors& moments, std::size_t step_index) {
    if (moments.size() != 2 * params_.size()) throw ConfigError("optimizer state does not match parameter list");
    for (std::size_t p = 0; p < params_.size(); ++p) {
        const Tensor& m = moments[2 * p].second;
        const Tensor& v = moments[2 * p + 1].second;
        if (m.numel() != m_[p].size() || v.numel() != v_[p].size()) {
            throw ConfigError("optimizer moment shape mismatch for " + params_[p].first);
        }
        m_[p].assign(m.data().begin(), m.data().end());
        v_[p].assign(v.data().begin(), v.data().end());
    }
    step_ = step_index;
}

UNIREC_NAMESPACE_END
