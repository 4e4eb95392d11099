#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualprobe/core.hpp"
#include "dualprobe/probe.hpp"

namespace dualprobe {

/// 3x3 counts, rows = gold label, columns = predicted label.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, kNumLabels>, kNumLabels> counts{};

    std::size_t total() const noexcept;
    std::size_t row_total(Label gold) const noexcept;
    std::size_t column_total(Label predicted) const noexcept;
    std::size_t trace() const noexcept;

    /// Each row divided by its total. Rows with no gold samples stay all-zero
    /// and are reported by empty_rows().
    std::array<std::array<double, kNumLabels>, kNumLabels> normalized() const noexcept;
    std::array<bool, kNumLabels> empty_rows() const noexcept;

    /// Most frequent predicted class (lowest index on ties).
    Label modal_prediction() const noexcept;
    /// Share of all predictions that land in the modal class. 1.0 means total collapse.
    double collapse_fraction() const noexcept;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// All of these require equal, non-zero lengths.
double accuracy(std::span<const Label> preds, std::span<const Label> gold);

/// F1 per class. A zero precision or recall denominator contributes 0, so a
/// class absent from both gold and predictions scores 0.
std::array<double, kNumLabels> per_class_f1(std::span<const Label> preds, std::span<const Label> gold);

/// Unweighted mean of per_class_f1 over all three classes.
double macro_f1(std::span<const Label> preds, std::span<const Label> gold);

ConfusionMatrix confusion(std::span<const Label> preds, std::span<const Label> gold);

struct MetricSet {
    std::size_t n = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::array<double, kNumLabels> per_class_f1{};
    ConfusionMatrix confusion;
};

MetricSet compute_metrics(std::span<const Label> preds, std::span<const Label> gold);

/// Steered metrics next to the zero-shot baseline (argmax of the raw logits).
struct ComparisonReport {
    std::string facet;
    MetricSet calibrated;
    MetricSet baseline;
    double delta_acc = 0.0;
    double delta_f1 = 0.0;
};

struct EvalReport {
    /// Pooled over every evaluated sample; facet is "ALL".
    ComparisonReport overall;
    /// One entry per facet, sorted by facet name.
    std::vector<ComparisonReport> per_facet;
    /// Unweighted means of per-facet macro-F1 (the alternative pooling).
    double mean_facet_macro_f1 = 0.0;
    double mean_facet_baseline_macro_f1 = 0.0;
};

EvalReport evaluate(const ParamsBundle& params, std::span<const Sample> data);
EvalReport evaluate(const SteeringParams& params, std::span<const Sample> data);

// ---------------------------------------------------------------------------
// Rendering

/// "+0.3000", "-4.37", "+0.0000". Sign always printed.
std::string format_signed(double value, int decimals);

/// Stable JSON document (keys in fixed order).
nlohmann::ordered_json to_json(const EvalReport& report);
nlohmann::ordered_json to_json(const ConfusionMatrix& cm);

/// Method | Accuracy | Macro-F1 | dAcc | dF1, in percent, overall then per facet.
std::string render_summary_table(const EvalReport& report);

/// Facet | Base F1 | Ours F1 (delta), four decimals.
std::string render_facet_table(const EvalReport& report);

/// Row-normalised confusion matrix as an aligned text block.
std::string render_confusion(const ConfusionMatrix& cm, const std::string& title);

}  // namespace dualprobe
