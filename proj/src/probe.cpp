#include "dualprobe/probe.hpp"

#include <cmath>
#include <string>

namespace dualprobe {

double magnitude_preactivation(const SteeringParams& params, const HiddenVector& h) {
    if (params.v_g.size() != h.dim()) throw DimensionMismatch("magnitude probe v_g vs h", params.v_g.size(), h.dim());
    return dot(params.v_g, h.values()) + params.b_g;
}

double compute_s(const SteeringParams& params, const HiddenVector& h) {
    if (params.v_s.size() != h.dim()) throw DimensionMismatch("direction probe v_s vs h", params.v_s.size(), h.dim());
    return dot(params.v_s, h.values()) + params.b_s;
}

double compute_g(const SteeringParams& params, const HiddenVector& h) {
    return softplus(magnitude_preactivation(params, h));
}

ProbeOutput run_probes(const SteeringParams& params, const HiddenVector& h) {
    return {compute_s(params, h), compute_g(params, h)};
}

LogitTriple calibrate(const LogitTriple& z, double s, double g, double mu) {
    if (!(g >= 0.0)) throw ContractViolation("calibrate: magnitude g must be >= 0, got " + std::to_string(g));
    if (!(mu >= 0.0 && mu <= 1.0)) throw ContractViolation("calibrate: mu must lie in [0, 1], got " + std::to_string(mu));
    if (!std::isfinite(s) || !std::isfinite(g)) throw InvalidArgument("calibrate: s and g must be finite");
    return LogitTriple(z.left() - s - 0.5 * g,
                       z.center() + mu * g,
                       z.right() + mu * s - 0.5 * g);
}

Prediction predict(const SteeringParams& params, const Sample& sample) {
    const ProbeOutput probe = run_probes(params, sample.h);
    const LogitTriple zhat = calibrate(sample.z, probe.s, probe.g, params.mu());
    return {probe, zhat, softmax(zhat), argmax_label(zhat)};
}

ParamsBundle ParamsBundle::global(SteeringParams params) {
    params.validate();
    ParamsBundle b;
    b.global_ = std::move(params);
    return b;
}

void ParamsBundle::set(std::string facet, SteeringParams params) {
    if (global_) throw InvalidArgument("cannot add per-facet head to a global bundle");
    if (facet.empty()) throw InvalidArgument("facet name must be non-empty");
    params.validate();
    if (!per_facet_.empty() && per_facet_.begin()->second.dim() != params.dim()) {
        throw DimensionMismatch("head for facet '" + facet + "'", per_facet_.begin()->second.dim(), params.dim());
    }
    per_facet_.insert_or_assign(std::move(facet), std::move(params));
}

std::size_t ParamsBundle::dim() const noexcept {
    if (global_) return global_->dim();
    if (per_facet_.empty()) return 0;
    return per_facet_.begin()->second.dim();
}

const SteeringParams& ParamsBundle::for_facet(std::string_view facet) const {
    if (global_) return *global_;
    auto it = per_facet_.find(facet);
    if (it == per_facet_.end()) {
        throw InvalidArgument("no trained head for facet '" + std::string(facet) + "'");
    }
    return it->second;
}

}  // namespace dualprobe
