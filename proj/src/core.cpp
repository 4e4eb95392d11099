#include "dualprobe/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dualprobe {

namespace {

void require_finite(double x, std::string_view what) {
    if (!std::isfinite(x)) {
        throw InvalidArgument(std::string(what) + " must be finite, got " + std::to_string(x));
    }
}

}  // namespace

DimensionMismatch::DimensionMismatch(std::string_view what, std::size_t expected, std::size_t actual)
    : InvalidArgument(std::string(what) + ": dimension mismatch (expected " + std::to_string(expected) +
                      ", got " + std::to_string(actual) + ")"),
      expected_(expected),
      actual_(actual) {}

Label decode(int code) {
    switch (code) {
        case 0: return Label::Left;
        case 1: return Label::Center;
        case 2: return Label::Right;
        default: throw InvalidArgument("label code out of range: " + std::to_string(code));
    }
}

std::string_view to_string(Label label) noexcept {
    switch (label) {
        case Label::Left: return "Left";
        case Label::Center: return "Center";
        case Label::Right: return "Right";
    }
    return "?";
}

Label parse_label(std::string_view text) {
    for (Label l : kAllLabels) {
        if (text == to_string(l)) return l;
    }
    throw InvalidArgument("unknown label '" + std::string(text) + "' (expected Left, Center or Right)");
}

LogitTriple::LogitTriple(double left, double center, double right) : values_{left, center, right} {
    require_finite(left, "z_L");
    require_finite(center, "z_C");
    require_finite(right, "z_R");
}

LogitTriple::LogitTriple(const std::array<double, kNumLabels>& values)
    : LogitTriple(values[0], values[1], values[2]) {}

LogitTriple LogitTriple::shifted(double c) const {
    return LogitTriple(values_[0] + c, values_[1] + c, values_[2] + c);
}

HiddenVector::HiddenVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw InvalidArgument("hidden vector must have dimension >= 1");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw InvalidArgument("hidden vector entry " + std::to_string(i) + " is not finite");
        }
    }
}

HiddenVector::HiddenVector(std::span<const float> values)
    : HiddenVector(std::vector<double>(values.begin(), values.end())) {}

SteeringParams SteeringParams::zeros(std::size_t d) {
    SteeringParams p;
    p.v_s.assign(d, 0.0);
    p.v_g.assign(d, 0.0);
    return p;
}

double SteeringParams::mu() const noexcept { return sigmoid(mu_raw); }

std::vector<double> SteeringParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(size());
    flat.insert(flat.end(), v_s.begin(), v_s.end());
    flat.push_back(b_s);
    flat.insert(flat.end(), v_g.begin(), v_g.end());
    flat.push_back(b_g);
    flat.push_back(mu_raw);
    return flat;
}

SteeringParams SteeringParams::unflatten(std::span<const double> flat) {
    if (flat.size() < 5 || (flat.size() - 3) % 2 != 0) {
        throw InvalidArgument("flat parameter vector has invalid length " + std::to_string(flat.size()));
    }
    const std::size_t d = (flat.size() - 3) / 2;
    SteeringParams p;
    p.v_s.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(d));
    p.b_s = flat[d];
    p.v_g.assign(flat.begin() + static_cast<std::ptrdiff_t>(d + 1), flat.begin() + static_cast<std::ptrdiff_t>(2 * d + 1));
    p.b_g = flat[2 * d + 1];
    p.mu_raw = flat[2 * d + 2];
    return p;
}

void SteeringParams::validate() const {
    if (v_s.empty()) throw InvalidArgument("steering params: dimension must be >= 1");
    if (v_g.size() != v_s.size()) throw DimensionMismatch("steering params v_g vs v_s", v_s.size(), v_g.size());
    for (double x : flatten()) require_finite(x, "steering parameter");
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) {
    require_finite(x, "softplus input");
    // max(x, 0) + log1p(exp(-|x|)) is exact in both tails.
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

Probabilities softmax(const LogitTriple& z) noexcept {
    const auto& v = z.values();
    const double m = std::max({v[0], v[1], v[2]});
    Probabilities p{std::exp(v[0] - m), std::exp(v[1] - m), std::exp(v[2] - m)};
    const double total = p[0] + p[1] + p[2];
    for (double& x : p) x /= total;
    return p;
}

Probabilities log_softmax(const LogitTriple& z) noexcept {
    const auto& v = z.values();
    const double m = std::max({v[0], v[1], v[2]});
    const double lse = m + std::log(std::exp(v[0] - m) + std::exp(v[1] - m) + std::exp(v[2] - m));
    return {v[0] - lse, v[1] - lse, v[2] - lse};
}

Label argmax_label(const LogitTriple& z) noexcept {
    std::size_t best = 0;
    for (std::size_t i = 1; i < kNumLabels; ++i) {
        if (z[i] > z[best]) best = i;
    }
    return static_cast<Label>(best);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("inner product", a.size(), b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace dualprobe
