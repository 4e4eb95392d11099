#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dualprobe/core.hpp"
#include "dualprobe/probe.hpp"

namespace dualprobe {

struct PcaOptions {
    /// Converged once min(|u_new - u|, |u_new + u|) drops below this.
    double tolerance = 1e-9;
    int max_iterations = 10000;
    /// Seed for the gaussian start vector of each component.
    std::uint64_t seed = 0;
};

struct PcaResult {
    /// Unit vectors; the largest-magnitude coordinate of each is positive.
    std::vector<std::vector<double>> directions;
    /// Population-covariance eigenvalues, descending, non-negative.
    std::vector<double> eigenvalues;
    std::vector<double> mean;
    /// projections[i][j] = (x_i - mean) . directions[j]
    std::vector<std::vector<double>> projections;
    /// Trace of the covariance.
    double total_variance = 0.0;
    std::vector<int> iterations;

    std::size_t k() const noexcept { return directions.size(); }
};

/// Top-k principal axes by deflated power iteration on the population
/// covariance. The covariance is never formed: each step applies X^T (X v) / n
/// to the centred data, so memory stays O(n d).
///
/// Needs at least k + 1 vectors of one common dimension and 1 <= k <= d.
/// Throws NumericError with the residual |C u - lambda u| when a component has
/// not converged within max_iterations.
PcaResult pca_top_k(std::span<const HiddenVector> vectors, std::size_t k, const PcaOptions& options = {});

struct OrderingReport {
    /// +1 when m_L < m_C < m_R along PC1, -1 when fully reversed, otherwise
    /// +/- (consistent adjacent pairs) / 2 on the better orientation.
    double score = 0.0;
    std::array<double, kNumLabels> class_means{};
    bool monotone() const noexcept { return score == 1.0 || score == -1.0; }
};

/// Score for already-computed class means on PC1.
double ordering_score_from_means(const std::array<double, kNumLabels>& means) noexcept;

/// Throws InvalidArgument naming any class with no samples.
OrderingReport ordering_score(const PcaResult& pca, std::span<const Label> labels);

struct CenterBandReport {
    std::array<std::size_t, kNumLabels> counts{};
    /// Population std of the PC1 / PC2 projections per class.
    std::array<double, kNumLabels> pc1_std{};
    std::optional<std::array<double, kNumLabels>> pc2_std;
    /// Whether Center's PC1 spread is strictly the smallest. Empty (not
    /// applicable) when some class has a single sample.
    std::optional<bool> center_tightest;
};

CenterBandReport center_band_stats(const PcaResult& pca, std::span<const Label> labels);

// ---------------------------------------------------------------------------
// Probe dynamics by (gold, zero-shot prediction)

enum class Group { A, B, C, D };

inline constexpr std::array<Group, 4> kAllGroups{Group::A, Group::B, Group::C, Group::D};

std::string_view to_string(Group g) noexcept;
/// e.g. "Aligned (gold L, pred L)".
std::string_view describe(Group g) noexcept;

/// A = (L, L), B = (R, L), C = (C, L), D = (L or R, C). Everything else is ungrouped.
std::optional<Group> assign_group(Label gold, Label baseline) noexcept;

struct GroupStats {
    std::size_t count = 0;
    /// Empty when count == 0 or no params were supplied.
    std::optional<double> mean_s;
    std::optional<double> mean_g;
};

struct GroupDynamics {
    std::array<GroupStats, 4> groups{};
    std::size_t other = 0;
    bool has_params = false;
    std::string rule;
    /// Per sample, in input order.
    std::vector<std::optional<Group>> assignment;

    const GroupStats& operator[](Group g) const noexcept { return groups[static_cast<std::size_t>(g)]; }
};

/// With params == nullptr only the grouping is computed (no s/g means).
GroupDynamics group_dynamics(const ParamsBundle* params, std::span<const Sample> data);
GroupDynamics group_dynamics(const SteeringParams& params, std::span<const Sample> data);

}  // namespace dualprobe
