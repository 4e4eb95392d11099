#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dualprobe/core.hpp"

namespace dualprobe {

/// Scalar readouts of one hidden state: signed direction s and magnitude g >= 0.
struct ProbeOutput {
    double s = 0.0;
    double g = 0.0;
};

/// Affine pre-activation of the magnitude probe, v_g . h + b_g.
double magnitude_preactivation(const SteeringParams& params, const HiddenVector& h);

/// s = v_s . h + b_s
double compute_s(const SteeringParams& params, const HiddenVector& h);

/// g = softplus(v_g . h + b_g)
double compute_g(const SteeringParams& params, const HiddenVector& h);

ProbeOutput run_probes(const SteeringParams& params, const HiddenVector& h);

/// Asymmetric logit update:
///   z_L' = z_L - s - g/2
///   z_C' = z_C + mu g
///   z_R' = z_R + mu s - g/2
/// The Left update uses the full -s while the Right update uses +mu s; this is
/// intentional and not symmetrised. Requires g >= 0 and mu in [0, 1].
LogitTriple calibrate(const LogitTriple& z, double s, double g, double mu);

struct Prediction {
    ProbeOutput probe;
    LogitTriple calibrated;
    Probabilities probabilities;
    Label label;
};

/// probes -> calibrate -> softmax -> argmax. Pure and deterministic.
Prediction predict(const SteeringParams& params, const Sample& sample);

/// A set of trained heads keyed by facet, or a single head shared by all facets.
class ParamsBundle {
public:
    ParamsBundle() = default;

    static ParamsBundle global(SteeringParams params);

    void set(std::string facet, SteeringParams params);

    bool is_global() const noexcept { return global_.has_value(); }
    /// Common dimension of all heads (0 when empty).
    std::size_t dim() const noexcept;
    bool empty() const noexcept { return !global_ && per_facet_.empty(); }

    /// Head used for samples of this facet. Throws InvalidArgument naming the
    /// facet when a per-facet bundle has no entry for it.
    const SteeringParams& for_facet(std::string_view facet) const;

    const std::optional<SteeringParams>& global_params() const noexcept { return global_; }
    const std::map<std::string, SteeringParams, std::less<>>& per_facet() const noexcept { return per_facet_; }

    friend bool operator==(const ParamsBundle&, const ParamsBundle&) = default;

private:
    std::optional<SteeringParams> global_;
    std::map<std::string, SteeringParams, std::less<>> per_facet_;
};

}  // namespace dualprobe
