#pragma once

#include <cstddef>
#include <vector>

#include "unirec/tensor/gradcheck.hpp"
#include "unirec/tensor/tensor.hpp"

UNIREC_NAMESPACE_BEGIN

struct AdamWConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// Linear warm-up to `peak_lr` followed by cosine decay to zero.
struct LrSchedule {
    double peak_lr = 1e-4;
    std::size_t warmup_steps = 20;
    std::size_t total_steps = 1000;

    double at(std::size_t step) const;
};

/// Scales every gradient in place so the global l2 norm is at most
/// `max_norm`. Returns the norm before clipping.
double clip_grad_norm(const NamedTensors& params, double max_norm);
double global_grad_norm(const NamedTensors& params);

/// AdamW with bias correction and decoupled weight decay.
class AdamW {
  public:
    AdamW(NamedTensors params, AdamWConfig config);

    /// One update at learning rate `lr`; parameters without a gradient are
    /// treated as having a zero gradient.
    void step(double lr);
    void zero_grad();

    std::size_t step_index() const { return step_; }
    const NamedTensors& params() const { return params_; }
    const AdamWConfig& config() const { return config_; }

    /// First and second moments, named "<param>.m" / "<param>.v".
    NamedTensors moments() const;
    void restore(const NamedTensors& moments, std::size_t step_index);

  private:
    NamedTensors params_;
    AdamWConfig config_;
    std::vector<std::vector<Real>> m_;
    std::vector<std::vector<Real>> v_;
    std::size_t step_ = 0;
};

UNIREC_NAMESPACE_END
