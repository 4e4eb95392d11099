#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dualprobe/core.hpp"

namespace dualprobe {

enum class Optimizer { GradientDescent, Adam };

std::string_view to_string(Optimizer opt) noexcept;
/// Accepts "gd" / "adam".
Optimizer parse_optimizer(std::string_view text);

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 500;
    std::uint64_t seed = 0;
    /// Applied to v_s and v_g only; biases and mu_raw are unpenalised.
    double l2_penalty = 1e-4;
    /// Std of the seeded gaussian added to the zero-initialised probe vectors.
    double init_scale = 0.0;
    Optimizer optimizer = Optimizer::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    /// Stop once the loss has not improved for this many consecutive epochs.
    std::optional<int> early_stop_patience;

    void validate() const;
};

struct TrainResult {
    SteeringParams params;
    double final_loss = 0.0;
    /// Loss after each epoch's update; final_loss == loss_history.back().
    std::vector<double> loss_history;
    int epochs_run = 0;
};

/// Gradient with the same shape as the parameters (mu_raw slot holds dL/dmu_raw).
using Gradient = SteeringParams;

/// Summed cross-entropy of the gold labels plus l2_penalty * (|v_s|^2 + |v_g|^2).
double loss(const SteeringParams& params, std::span<const Sample> data, double l2_penalty);

/// Analytic gradient of loss() with respect to (v_s, b_s, v_g, b_g, mu_raw).
Gradient grad(const SteeringParams& params, std::span<const Sample> data, double l2_penalty);

struct LossAndGrad {
    double loss;
    Gradient grad;
};
LossAndGrad loss_and_grad(const SteeringParams& params, std::span<const Sample> data, double l2_penalty);

/// Central differences of loss(), one coordinate at a time. Test oracle.
Gradient finite_diff_grad(const SteeringParams& params, std::span<const Sample> data, double l2_penalty,
                          double step);

/// Full-batch training from the zero head (mu = 0.5). Deterministic given
/// (data order, config). Throws NumericError naming the epoch if the loss
/// stops being finite.
TrainResult train(std::span<const Sample> data, const TrainConfig& config);

struct Split {
    std::vector<Sample> train;
    std::vector<Sample> eval;
};

/// Seeded few-shot partition. Each group (one per facet when stratified, the
/// whole set otherwise) contributes max(1, round(fraction * n)) samples to the
/// training side. Both sides keep the input order. Groups are visited in
/// facet-name order and share one generator stream.
Split few_shot_split(std::span<const Sample> data, double fraction, std::uint64_t seed, bool stratify_by_facet);

}  // namespace dualprobe
