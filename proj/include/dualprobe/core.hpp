#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dualprobe {

// Error hierarchy. Everything thrown by the library derives from std::exception
// through one of these, so callers can tell bad input from numeric failure.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public InvalidArgument {
public:
    DimensionMismatch(std::string_view what, std::size_t expected, std::size_t actual);
    std::size_t expected() const noexcept { return expected_; }
    std::size_t actual() const noexcept { return actual_; }

private:
    std::size_t expected_;
    std::size_t actual_;
};

class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Labels

enum class Label : std::uint8_t { Left = 0, Center = 1, Right = 2 };

inline constexpr std::size_t kNumLabels = 3;
inline constexpr std::array<Label, kNumLabels> kAllLabels{Label::Left, Label::Center, Label::Right};

constexpr int encode(Label label) noexcept { return static_cast<int>(label); }
constexpr std::size_t index_of(Label label) noexcept { return static_cast<std::size_t>(label); }

/// Inverse of encode(). Throws InvalidArgument for anything outside {0, 1, 2}.
Label decode(int code);

/// "Left", "Center" or "Right".
std::string_view to_string(Label label) noexcept;

/// Parses the canonical names written by to_string(); exact match only.
Label parse_label(std::string_view text);

// ---------------------------------------------------------------------------
// Logits and probabilities

using Probabilities = std::array<double, kNumLabels>;

/// Ordered (z_L, z_C, z_R). Every component is finite; the constructor enforces it.
class LogitTriple {
public:
    LogitTriple(double left, double center, double right);
    explicit LogitTriple(const std::array<double, kNumLabels>& values);

    double left() const noexcept { return values_[0]; }
    double center() const noexcept { return values_[1]; }
    double right() const noexcept { return values_[2]; }
    double operator[](Label label) const noexcept { return values_[index_of(label)]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }
    const std::array<double, kNumLabels>& values() const noexcept { return values_; }

    /// Adds c to every component.
    LogitTriple shifted(double c) const;

    friend bool operator==(const LogitTriple&, const LogitTriple&) = default;

private:
    std::array<double, kNumLabels> values_;
};

// ---------------------------------------------------------------------------
// Hidden representations

/// Dense finite vector of dimension >= 1, stored as 64-bit reals.
class HiddenVector {
public:
    explicit HiddenVector(std::vector<double> values);
    /// Widens 32-bit input.
    explicit HiddenVector(std::span<const float> values);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    friend bool operator==(const HiddenVector&, const HiddenVector&) = default;

private:
    std::vector<double> values_;
};

struct Sample {
    std::string id;
    std::string facet;
    HiddenVector h;
    LogitTriple z;
    Label y;

    friend bool operator==(const Sample&, const Sample&) = default;
};

// ---------------------------------------------------------------------------
// Trainable head

/// The five trainable quantities of the steering head. The redistribution
/// coefficient is stored through its logit: mu() = sigmoid(mu_raw), which keeps
/// it strictly inside (0, 1) for any finite mu_raw.
struct SteeringParams {
    std::vector<double> v_s;
    double b_s = 0.0;
    std::vector<double> v_g;
    double b_g = 0.0;
    double mu_raw = 0.0;

    /// All-zero head of dimension d (mu = 0.5).
    static SteeringParams zeros(std::size_t d);

    std::size_t dim() const noexcept { return v_s.size(); }
    double mu() const noexcept;

    /// Number of scalars: 2d + 3.
    std::size_t size() const noexcept { return 2 * v_s.size() + 3; }

    /// Flat layout [v_s..., b_s, v_g..., b_g, mu_raw].
    std::vector<double> flatten() const;
    static SteeringParams unflatten(std::span<const double> flat);

    /// Throws if v_s/v_g differ in length, are empty, or anything is non-finite.
    void validate() const;

    friend bool operator==(const SteeringParams&, const SteeringParams&) = default;
};

// ---------------------------------------------------------------------------
// Numeric primitives

double sigmoid(double x) noexcept;

/// ln(1 + e^x) without overflow. Throws InvalidArgument on non-finite x.
double softplus(double x);

/// Max-subtracted softmax; components positive and summing to one.
Probabilities softmax(const LogitTriple& z) noexcept;

/// log-softmax, used by the loss to avoid log(0).
Probabilities log_softmax(const LogitTriple& z) noexcept;

/// Index of the largest logit. Ties go to the lowest index (Left < Center < Right).
Label argmax_label(const LogitTriple& z) noexcept;

/// Plain inner product; throws DimensionMismatch naming both lengths.
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace dualprobe
