#include "dualprobe/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "dualprobe/probe.hpp"
#include "dualprobe/random.hpp"

namespace dualprobe {

std::string_view to_string(Optimizer opt) noexcept {
    return opt == Optimizer::Adam ? "adam" : "gd";
}

Optimizer parse_optimizer(std::string_view text) {
    if (text == "adam") return Optimizer::Adam;
    if (text == "gd") return Optimizer::GradientDescent;
    throw InvalidArgument("unknown optimizer '" + std::string(text) + "' (expected adam or gd)");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning_rate must be > 0");
    if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
    if (!(l2_penalty >= 0.0)) throw InvalidArgument("l2_penalty must be >= 0");
    if (!(init_scale >= 0.0)) throw InvalidArgument("init_scale must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw InvalidArgument("Adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be > 0");
    if (early_stop_patience && *early_stop_patience < 1) throw InvalidArgument("early_stop_patience must be >= 1");
}

namespace {

void check_data(const SteeringParams& params, std::span<const Sample> data) {
    if (data.empty()) throw InvalidArgument("dataset is empty");
    for (const Sample& s : data) {
        if (s.h.dim() != params.dim()) throw DimensionMismatch("sample '" + s.id + "'", params.dim(), s.h.dim());
    }
}

double l2_term(const SteeringParams& p, double l2) {
    if (l2 == 0.0) return 0.0;
    return l2 * (dot(p.v_s, p.v_s) + dot(p.v_g, p.v_g));
}

}  // namespace

double loss(const SteeringParams& params, std::span<const Sample> data, double l2_penalty) {
    check_data(params, data);
    const double mu = params.mu();
    double total = 0.0;
    for (const Sample& sample : data) {
        const ProbeOutput probe = run_probes(params, sample.h);
        const LogitTriple zhat = calibrate(sample.z, probe.s, probe.g, mu);
        total -= log_softmax(zhat)[index_of(sample.y)];
    }
    return total + l2_term(params, l2_penalty);
}

LossAndGrad loss_and_grad(const SteeringParams& params, std::span<const Sample> data, double l2_penalty) {
    check_data(params, data);
    const std::size_t d = params.dim();
    const double mu = params.mu();
    const double dmu_draw = mu * (1.0 - mu);

    Gradient g = SteeringParams::zeros(d);
    double total = 0.0;
    double dmu = 0.0;

    for (const Sample& sample : data) {
        const double s = compute_s(params, sample.h);
        const double a = magnitude_preactivation(params, sample.h);
        const double mag = softplus(a);
        const LogitTriple zhat = calibrate(sample.z, s, mag, mu);
        const Probabilities logp = log_softmax(zhat);
        total -= logp[index_of(sample.y)];

        // dL/dzhat = p - onehot(y)
        std::array<double, kNumLabels> delta{std::exp(logp[0]), std::exp(logp[1]), std::exp(logp[2])};
        delta[index_of(sample.y)] -= 1.0;

        // Jacobians of zhat: d/ds = (-1, 0, mu), d/dg = (-1/2, mu, -1/2), d/dmu = (0, g, s)
        const double dl_ds = -delta[0] + mu * delta[2];
        const double dl_dg = -0.5 * delta[0] + mu * delta[1] - 0.5 * delta[2];
        const double dl_da = dl_dg * sigmoid(a);
        dmu += mag * delta[1] + s * delta[2];

        const auto h = sample.h.values();
        for (std::size_t i = 0; i < d; ++i) {
            g.v_s[i] += dl_ds * h[i];
            g.v_g[i] += dl_da * h[i];
        }
        g.b_s += dl_ds;
        g.b_g += dl_da;
    }
    g.mu_raw = dmu * dmu_draw;

    if (l2_penalty != 0.0) {
        for (std::size_t i = 0; i < d; ++i) {
            g.v_s[i] += 2.0 * l2_penalty * params.v_s[i];
            g.v_g[i] += 2.0 * l2_penalty * params.v_g[i];
        }
    }
    return {total + l2_term(params, l2_penalty), std::move(g)};
}

Gradient grad(const SteeringParams& params, std::span<const Sample> data, double l2_penalty) {
    return loss_and_grad(params, data, l2_penalty).grad;
}

Gradient finite_diff_grad(const SteeringParams& params, std::span<const Sample> data, double l2_penalty,
                          double step) {
    if (!(step > 0.0)) throw InvalidArgument("finite difference step must be > 0");
    check_data(params, data);
    std::vector<double> flat = params.flatten();
    std::vector<double> out(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
        const double orig = flat[i];
        flat[i] = orig + step;
        const double up = loss(SteeringParams::unflatten(flat), data, l2_penalty);
        flat[i] = orig - step;
        const double down = loss(SteeringParams::unflatten(flat), data, l2_penalty);
        flat[i] = orig;
        out[i] = (up - down) / (2.0 * step);
    }
    return SteeringParams::unflatten(out);
}

TrainResult train(std::span<const Sample> data, const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw InvalidArgument("cannot train on an empty dataset");
    const std::size_t d = data.front().h.dim();

    SteeringParams params = SteeringParams::zeros(d);
    if (config.init_scale > 0.0) {
        Rng rng(config.seed);
        for (double& x : params.v_s) x = config.init_scale * rng.gaussian();
        for (double& x : params.v_g) x = config.init_scale * rng.gaussian();
    }

    std::vector<double> theta = params.flatten();
    std::vector<double> m(theta.size(), 0.0);
    std::vector<double> v(theta.size(), 0.0);

    TrainResult result;
    result.loss_history.reserve(static_cast<std::size_t>(config.epochs));

    LossAndGrad current = loss_and_grad(params, data, config.l2_penalty);
    if (!std::isfinite(current.loss)) throw NumericError("loss is not finite at initialisation");

    double best = current.loss;
    int since_best = 0;
    double beta1_t = 1.0;
    double beta2_t = 1.0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const std::vector<double> gflat = current.grad.flatten();
        if (config.optimizer == Optimizer::GradientDescent) {
            for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= config.learning_rate * gflat[i];
        } else {
            beta1_t *= config.beta1;
            beta2_t *= config.beta2;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gflat[i];
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gflat[i] * gflat[i];
                const double m_hat = m[i] / (1.0 - beta1_t);
                const double v_hat = v[i] / (1.0 - beta2_t);
                theta[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
            }
        }
        for (double x : theta) {
            if (!std::isfinite(x)) throw NumericError("parameters diverged at epoch " + std::to_string(epoch));
        }
        params = SteeringParams::unflatten(theta);
        try {
            current = loss_and_grad(params, data, config.l2_penalty);
        } catch (const InvalidArgument& e) {
            // Shapes were checked up front, so this is an overflow in s, g or the logits.
            throw NumericError("non-finite value at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        if (!std::isfinite(current.loss)) {
            throw NumericError("loss is not finite at epoch " + std::to_string(epoch));
        }
        result.loss_history.push_back(current.loss);
        result.epochs_run = epoch;

        if (config.early_stop_patience) {
            if (current.loss < best) {
                best = current.loss;
                since_best = 0;
            } else if (++since_best >= *config.early_stop_patience) {
                break;
            }
        }
    }

    result.params = std::move(params);
    result.final_loss = result.loss_history.back();
    return result;
}

Split few_shot_split(std::span<const Sample> data, double fraction, std::uint64_t seed, bool stratify_by_facet) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw InvalidArgument("split fraction must lie in (0, 1), got " + std::to_string(fraction));
    }

    if (data.empty()) throw InvalidArgument("cannot split an empty dataset");

    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < data.size(); ++i) {
        groups[stratify_by_facet ? data[i].facet : std::string()].push_back(i);
    }
    for (const auto& [facet, members] : groups) {
        if (members.empty()) throw InvalidArgument("facet group '" + facet + "' is empty");
    }

    Rng rng(seed);
    std::vector<bool> in_train(data.size(), false);
    for (auto& [facet, members] : groups) {
        const auto n = static_cast<double>(members.size());
        auto n_train = static_cast<std::size_t>(std::llround(fraction * n));
        n_train = std::clamp<std::size_t>(n_train, 1, members.size());
        rng.shuffle(members);
        for (std::size_t k = 0; k < n_train; ++k) in_train[members[k]] = true;
    }

    Split split;
    for (std::size_t i = 0; i < data.size(); ++i) {
        (in_train[i] ? split.train : split.eval).push_back(data[i]);
    }
    return split;
}

}  // namespace dualprobe
