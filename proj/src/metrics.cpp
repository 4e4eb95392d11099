#include "dualprobe/metrics.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace dualprobe {

std::size_t ConfusionMatrix::total() const noexcept {
    std::size_t t = 0;
    for (const auto& row : counts)
        for (std::size_t c : row) t += c;
    return t;
}

std::size_t ConfusionMatrix::row_total(Label gold) const noexcept {
    const auto& row = counts[index_of(gold)];
    return row[0] + row[1] + row[2];
}

std::size_t ConfusionMatrix::column_total(Label predicted) const noexcept {
    const std::size_t j = index_of(predicted);
    return counts[0][j] + counts[1][j] + counts[2][j];
}

std::size_t ConfusionMatrix::trace() const noexcept {
    return counts[0][0] + counts[1][1] + counts[2][2];
}

std::array<std::array<double, kNumLabels>, kNumLabels> ConfusionMatrix::normalized() const noexcept {
    std::array<std::array<double, kNumLabels>, kNumLabels> out{};
    for (Label gold : kAllLabels) {
        const std::size_t n = row_total(gold);
        if (n == 0) continue;
        for (std::size_t j = 0; j < kNumLabels; ++j) {
            out[index_of(gold)][j] = static_cast<double>(counts[index_of(gold)][j]) / static_cast<double>(n);
        }
    }
    return out;
}

std::array<bool, kNumLabels> ConfusionMatrix::empty_rows() const noexcept {
    return {row_total(Label::Left) == 0, row_total(Label::Center) == 0, row_total(Label::Right) == 0};
}

Label ConfusionMatrix::modal_prediction() const noexcept {
    Label best = Label::Left;
    for (Label l : kAllLabels) {
        if (column_total(l) > column_total(best)) best = l;
    }
    return best;
}

double ConfusionMatrix::collapse_fraction() const noexcept {
    const std::size_t n = total();
    if (n == 0) return 0.0;
    return static_cast<double>(column_total(modal_prediction())) / static_cast<double>(n);
}

namespace {

void check_lengths(std::span<const Label> preds, std::span<const Label> gold) {
    if (preds.size() != gold.size()) throw DimensionMismatch("predictions vs gold labels", gold.size(), preds.size());
    if (preds.empty()) throw InvalidArgument("metrics need at least one prediction");
}

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::array<double, kNumLabels> f1_from_confusion(const ConfusionMatrix& cm) {
    std::array<double, kNumLabels> f1{};
    for (Label l : kAllLabels) {
        const auto tp = static_cast<double>(cm.counts[index_of(l)][index_of(l)]);
        const double precision = safe_ratio(tp, static_cast<double>(cm.column_total(l)));
        const double recall = safe_ratio(tp, static_cast<double>(cm.row_total(l)));
        f1[index_of(l)] = safe_ratio(2.0 * precision * recall, precision + recall);
    }
    return f1;
}

double mean3(const std::array<double, kNumLabels>& v) { return (v[0] + v[1] + v[2]) / 3.0; }

}  // namespace

ConfusionMatrix confusion(std::span<const Label> preds, std::span<const Label> gold) {
    check_lengths(preds, gold);
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        ++cm.counts[index_of(gold[i])][index_of(preds[i])];
    }
    return cm;
}

double accuracy(std::span<const Label> preds, std::span<const Label> gold) {
    const ConfusionMatrix cm = confusion(preds, gold);
    return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

std::array<double, kNumLabels> per_class_f1(std::span<const Label> preds, std::span<const Label> gold) {
    return f1_from_confusion(confusion(preds, gold));
}

double macro_f1(std::span<const Label> preds, std::span<const Label> gold) {
    return mean3(per_class_f1(preds, gold));
}

MetricSet compute_metrics(std::span<const Label> preds, std::span<const Label> gold) {
    MetricSet m;
    m.confusion = confusion(preds, gold);
    m.n = m.confusion.total();
    m.accuracy = static_cast<double>(m.confusion.trace()) / static_cast<double>(m.n);
    m.per_class_f1 = f1_from_confusion(m.confusion);
    m.macro_f1 = mean3(m.per_class_f1);
    return m;
}

namespace {

struct Collected {
    std::vector<Label> steered;
    std::vector<Label> baseline;
    std::vector<Label> gold;
};

ComparisonReport compare(std::string facet, const Collected& c) {
    ComparisonReport r;
    r.facet = std::move(facet);
    r.calibrated = compute_metrics(c.steered, c.gold);
    r.baseline = compute_metrics(c.baseline, c.gold);
    r.delta_acc = r.calibrated.accuracy - r.baseline.accuracy;
    r.delta_f1 = r.calibrated.macro_f1 - r.baseline.macro_f1;
    return r;
}

}  // namespace

EvalReport evaluate(const ParamsBundle& params, std::span<const Sample> data) {
    if (data.empty()) throw InvalidArgument("cannot evaluate an empty dataset");

    Collected all;
    std::map<std::string, Collected> by_facet;
    for (const Sample& sample : data) {
        const Prediction pred = predict(params.for_facet(sample.facet), sample);
        const Label base = argmax_label(sample.z);
        all.steered.push_back(pred.label);
        all.baseline.push_back(base);
        all.gold.push_back(sample.y);
        Collected& f = by_facet[sample.facet];
        f.steered.push_back(pred.label);
        f.baseline.push_back(base);
        f.gold.push_back(sample.y);
    }

    EvalReport report;
    report.overall = compare("ALL", all);
    double sum_f1 = 0.0;
    double sum_base_f1 = 0.0;
    for (const auto& [facet, c] : by_facet) {
        report.per_facet.push_back(compare(facet, c));
        sum_f1 += report.per_facet.back().calibrated.macro_f1;
        sum_base_f1 += report.per_facet.back().baseline.macro_f1;
    }
    const auto n_facets = static_cast<double>(report.per_facet.size());
    report.mean_facet_macro_f1 = sum_f1 / n_facets;
    report.mean_facet_baseline_macro_f1 = sum_base_f1 / n_facets;
    return report;
}

EvalReport evaluate(const SteeringParams& params, std::span<const Sample> data) {
    return evaluate(ParamsBundle::global(params), data);
}

}  // namespace dualprobe
