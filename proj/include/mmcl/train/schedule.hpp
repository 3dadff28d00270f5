#ifndef MMCL_TRAIN_SCHEDULE_HPP
#define MMCL_TRAIN_SCHEDULE_HPP

#include <cstdint>
#include <stdexcept>

namespace mmcl::train {

// Optimization settings for one task. The schedule is defined over the full
// max_epochs horizon; early stopping only ends the walk sooner.
struct TrainConfig {
    double max_lr = 3e-4;
    double warmup_fraction = 0.1;
    int batch_size = 32;
    int max_epochs = 15;
    int patience = 3;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int eval_batch_size = 128;

    void validate() const {
        if (!(max_lr > 0.0)) throw std::invalid_argument("train config: max_lr must be > 0");
        if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
            throw std::invalid_argument("train config: warmup_fraction must be in [0, 1)");
        if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
        if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs must be >= 1");
        if (patience < 1 || patience > max_epochs)
            throw std::invalid_argument("train config: patience must be in [1, max_epochs]");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw std::invalid_argument("train config: adam betas must be in [0, 1)");
        if (!(adam_eps > 0.0)) throw std::invalid_argument("train config: adam_eps must be > 0");
        if (eval_batch_size < 1) throw std::invalid_argument("train config: eval_batch_size must be >= 1");
    }

    bool operator==(const TrainConfig&) const = default;
};

// Linear ramp 0 -> max_lr over the first warmup_fraction of the steps, then
// linear decay max_lr -> 0 at total_steps. Continuous at the junction. With
// warmup_fraction = 0 the walk starts at max_lr.
inline double lr_at_step(std::int64_t step, std::int64_t total_steps, double max_lr,
                         double warmup_fraction) {
    if (total_steps < 1) throw std::invalid_argument("lr schedule: total_steps must be >= 1");
    if (step < 0 || step > total_steps) throw std::invalid_argument("lr schedule: step out of range");
    if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
        throw std::invalid_argument("lr schedule: warmup_fraction must be in [0, 1)");
    const double total = static_cast<double>(total_steps);
    const double w = warmup_fraction * total;
    const double s = static_cast<double>(step);
    if (s < w) return max_lr * s / w;
    return max_lr * (total - s) / (total - w);
}

}  // namespace mmcl::train

#endif
