#include <cstdio>
#include <iomanip>
#include <sstream>
#include <string>

#include "dualprobe/metrics.hpp"

namespace dualprobe {

std::string format_signed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%+.*f", decimals, value);
    std::string out(buf);
    // A value that rounds to zero prints as "+0.00", never "-0.00".
    if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.front() = '+';
    return out;
}

namespace {

std::string fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

nlohmann::ordered_json metric_json(const MetricSet& m) {
    nlohmann::ordered_json j;
    j["n"] = m.n;
    j["accuracy"] = m.accuracy;
    j["macro_f1"] = m.macro_f1;
    j["per_class_f1"] = {{"Left", m.per_class_f1[0]}, {"Center", m.per_class_f1[1]}, {"Right", m.per_class_f1[2]}};
    j["confusion"] = to_json(m.confusion);
    return j;
}

nlohmann::ordered_json comparison_json(const ComparisonReport& r) {
    nlohmann::ordered_json j;
    j["facet"] = r.facet;
    j["calibrated"] = metric_json(r.calibrated);
    j["baseline"] = metric_json(r.baseline);
    j["delta_acc"] = r.delta_acc;
    j["delta_f1"] = r.delta_f1;
    return j;
}

class TextTable {
public:
    explicit TextTable(std::vector<std::string> header) { rows_.push_back(std::move(header)); }
    void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
    void rule() { rules_.push_back(rows_.size()); }

    std::string str() const {
        std::vector<std::size_t> width(rows_.front().size(), 0);
        for (const auto& row : rows_)
            for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
        std::size_t total = 0;
        for (std::size_t w : width) total += w + 2;

        std::ostringstream os;
        const std::string line(total, '-');
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            for (std::size_t at : rules_)
                if (at == r) os << line << '\n';
            for (std::size_t c = 0; c < rows_[r].size(); ++c) {
                // First column left-aligned, numbers right-aligned.
                if (c == 0) os << std::left; else os << std::right;
                os << std::setw(static_cast<int>(width[c])) << rows_[r][c];
                if (c + 1 < rows_[r].size()) os << "  ";
            }
            os << '\n';
            if (r == 0) os << line << '\n';
        }
        os << line << '\n';
        return os.str();
    }

private:
    std::vector<std::vector<std::string>> rows_;
    std::vector<std::size_t> rules_;
};

void summary_rows(TextTable& t, const ComparisonReport& r) {
    t.add({r.facet, "Zero-shot", fixed(100.0 * r.baseline.accuracy, 2), fixed(100.0 * r.baseline.macro_f1, 2), "-", "-"});
    t.add({"", "Logit steering", fixed(100.0 * r.calibrated.accuracy, 2), fixed(100.0 * r.calibrated.macro_f1, 2),
           format_signed(100.0 * r.delta_acc, 2), format_signed(100.0 * r.delta_f1, 2)});
}

}  // namespace

nlohmann::ordered_json to_json(const ConfusionMatrix& cm) {
    nlohmann::ordered_json j;
    j["labels"] = {"Left", "Center", "Right"};
    j["counts"] = cm.counts;
    j["normalized"] = cm.normalized();
    j["empty_rows"] = cm.empty_rows();
    j["modal_prediction"] = std::string(to_string(cm.modal_prediction()));
    j["collapse_fraction"] = cm.collapse_fraction();
    return j;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["overall"] = comparison_json(report.overall);
    j["mean_facet_macro_f1"] = report.mean_facet_macro_f1;
    j["mean_facet_baseline_macro_f1"] = report.mean_facet_baseline_macro_f1;
    auto facets = nlohmann::ordered_json::array();
    for (const auto& r : report.per_facet) facets.push_back(comparison_json(r));
    j["per_facet"] = std::move(facets);
    return j;
}

std::string render_summary_table(const EvalReport& report) {
    TextTable t({"Facet", "Method", "Accuracy", "Macro-F1", "dAcc", "dF1"});
    summary_rows(t, report.overall);
    for (const auto& r : report.per_facet) {
        t.rule();
        summary_rows(t, r);
    }
    return t.str();
}

std::string render_facet_table(const EvalReport& report) {
    TextTable t({"Facet", "Base F1", "Ours F1 (delta)"});
    for (const auto& r : report.per_facet) {
        t.add({r.facet, fixed(r.baseline.macro_f1, 4),
               fixed(r.calibrated.macro_f1, 4) + " (" + format_signed(r.delta_f1, 4) + ")"});
    }
    t.rule();
    t.add({"Avg", fixed(report.mean_facet_baseline_macro_f1, 4),
           fixed(report.mean_facet_macro_f1, 4) + " (" +
               format_signed(report.mean_facet_macro_f1 - report.mean_facet_baseline_macro_f1, 4) + ")"});
    return t.str();
}

std::string render_confusion(const ConfusionMatrix& cm, const std::string& title) {
    TextTable t({title + " (gold \\ pred)", "Left", "Center", "Right", "n"});
    const auto norm = cm.normalized();
    for (Label gold : kAllLabels) {
        const auto& row = norm[index_of(gold)];
        t.add({std::string(to_string(gold)), fixed(row[0], 4), fixed(row[1], 4), fixed(row[2], 4),
               std::to_string(cm.row_total(gold))});
    }
    std::ostringstream os;
    os << t.str() << "collapse: " << fixed(cm.collapse_fraction(), 4) << " of predictions are "
       << to_string(cm.modal_prediction()) << '\n';
    return os.str();
}

}  // namespace dualprobe
