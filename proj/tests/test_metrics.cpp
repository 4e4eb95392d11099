#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dualprobe/metrics.hpp"
#include "fixtures.hpp"

using namespace dualprobe;

namespace {

constexpr Label L = Label::Left;
constexpr Label C = Label::Center;
constexpr Label R = Label::Right;

// Counting oracle: loops over pairs directly, no confusion matrix.
struct BruteMetrics {
    double acc;
    std::array<double, 3> f1;
    double macro;
};

BruteMetrics brute(const std::vector<Label>& pred, const std::vector<Label>& gold) {
    BruteMetrics m{};
    int right = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) right += pred[i] == gold[i];
    m.acc = static_cast<double>(right) / static_cast<double>(pred.size());
    for (Label c : kAllLabels) {
        int tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (pred[i] == c && gold[i] == c) ++tp;
            if (pred[i] == c && gold[i] != c) ++fp;
            if (pred[i] != c && gold[i] == c) ++fn;
        }
        const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
        const double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
        m.f1[index_of(c)] = p + r == 0.0 ? 0.0 : 2 * p * r / (p + r);
    }
    m.macro = (m.f1[0] + m.f1[1] + m.f1[2]) / 3.0;
    return m;
}

std::vector<Label> random_labels(std::mt19937_64& gen, std::size_t n, bool skewed) {
    std::uniform_int_distribution<int> u(0, 2);
    std::bernoulli_distribution coin(0.8);
    std::vector<Label> out(n);
    for (auto& l : out) l = skewed && coin(gen) ? L : decode(u(gen));
    return out;
}

}  // namespace

TEST_CASE("metric examples") {
    SUBCASE("collapse onto Left") {
        const std::vector<Label> pred{L, L, L};
        const std::vector<Label> gold{L, C, R};
        CHECK(accuracy(pred, gold) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
        const auto f1 = per_class_f1(pred, gold);
        CHECK(f1[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(f1[1] == 0.0);
        CHECK(f1[2] == 0.0);
        CHECK(macro_f1(pred, gold) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
        CHECK(confusion(pred, gold).collapse_fraction() == 1.0);
    }
    SUBCASE("classes absent from gold and predictions score zero") {
        const std::vector<Label> both{L, L};
        CHECK(accuracy(both, both) == 1.0);
        CHECK(macro_f1(both, both) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
    SUBCASE("perfect") {
        const std::vector<Label> all{L, C, R, C};
        CHECK(macro_f1(all, all) == 1.0);
    }
    SUBCASE("input validation") {
        const std::vector<Label> a{L, C};
        const std::vector<Label> b{L};
        const std::vector<Label> none;
        CHECK_THROWS_AS(accuracy(a, b), DimensionMismatch);
        CHECK_THROWS_AS(macro_f1(none, none), InvalidArgument);
        CHECK_THROWS_AS(confusion(a, b), DimensionMismatch);
    }
}

TEST_CASE("confusion matrix accessors") {
    const std::vector<Label> pred{L, L, C, R, L};
    const std::vector<Label> gold{L, C, C, R, R};
    const ConfusionMatrix cm = confusion(pred, gold);
    CHECK(cm.counts[0][0] == 1);
    CHECK(cm.counts[1][0] == 1);
    CHECK(cm.counts[1][1] == 1);
    CHECK(cm.counts[2][2] == 1);
    CHECK(cm.counts[2][0] == 1);
    CHECK(cm.total() == 5);
    CHECK(cm.trace() == 3);
    CHECK(cm.row_total(R) == 2);
    CHECK(cm.column_total(L) == 3);
    CHECK(cm.modal_prediction() == L);
    CHECK(cm.collapse_fraction() == doctest::Approx(0.6));
    const auto n = cm.normalized();
    CHECK(n[2][0] == 0.5);
    CHECK(n[2][2] == 0.5);

    const std::vector<Label> only_left{L, L};
    const ConfusionMatrix sparse = confusion(only_left, only_left);
    CHECK(sparse.empty_rows() == std::array<bool, 3>{false, true, true});
    CHECK(sparse.normalized()[1] == std::array<double, 3>{0, 0, 0});
}

TEST_CASE("metrics agree with the counting oracle") {
    std::mt19937_64 gen(31);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + t * 7 % 200;
        const auto gold = random_labels(gen, n, t % 3 == 0);
        const auto pred = random_labels(gen, n, t % 2 == 0);
        const BruteMetrics b = brute(pred, gold);
        const MetricSet m = compute_metrics(pred, gold);
        CHECK(std::abs(m.accuracy - b.acc) < 1e-9);
        CHECK(std::abs(m.macro_f1 - b.macro) < 1e-9);
        for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(m.per_class_f1[k] - b.f1[k]) < 1e-9);
        CHECK(m.accuracy == doctest::Approx(static_cast<double>(m.confusion.trace()) / m.confusion.total()));
        CHECK(m.n == n);

        // invariance under a joint permutation
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), gen);
        std::vector<Label> gp(n), pp(n);
        for (std::size_t i = 0; i < n; ++i) {
            gp[i] = gold[order[i]];
            pp[i] = pred[order[i]];
        }
        const MetricSet q = compute_metrics(pp, gp);
        CHECK(q.confusion == m.confusion);
        CHECK(std::abs(q.macro_f1 - m.macro_f1) < 1e-12);
    }
}

TEST_CASE("signed formatting") {
    CHECK(format_signed(65.88 - 44.93, 2) == "+20.95");
    CHECK(format_signed(0.3, 4) == "+0.3000");
    CHECK(format_signed(-4.371, 2) == "-4.37");
    CHECK(format_signed(0.0, 4) == "+0.0000");
    CHECK(format_signed(-1e-9, 2) == "+0.00");
}

TEST_CASE("evaluate against the zero-shot baseline") {
    std::mt19937_64 gen(17);
    auto data = fixtures::random_samples(gen, 60, 3);
    for (std::size_t i = 0; i < data.size(); ++i) data[i].facet = i % 3 == 0 ? "SS" : "MF";

    SUBCASE("identity limit gives zero deltas") {
        SteeringParams p = SteeringParams::zeros(3);
        p.b_g = -1e6;
        const EvalReport r = evaluate(p, data);
        CHECK(r.overall.facet == "ALL");
        CHECK(r.overall.delta_acc == 0.0);
        CHECK(r.overall.delta_f1 == 0.0);
        CHECK(r.overall.calibrated.confusion == r.overall.baseline.confusion);
        REQUIRE(r.per_facet.size() == 2);
        CHECK(r.per_facet[0].facet == "MF");
        CHECK(r.per_facet[1].facet == "SS");
        CHECK(r.per_facet[0].calibrated.n + r.per_facet[1].calibrated.n == 60);
        CHECK(r.mean_facet_macro_f1 == doctest::Approx(r.mean_facet_baseline_macro_f1));
    }
    SUBCASE("per-facet bundle uses each facet's head") {
        ParamsBundle b;
        SteeringParams right = SteeringParams::zeros(3);
        right.b_s = 1e3;
        right.mu_raw = 50;
        b.set("MF", right);
        SteeringParams left = SteeringParams::zeros(3);
        left.b_s = -1e3;
        left.mu_raw = 50;
        b.set("SS", left);
        const EvalReport r = evaluate(b, data);
        CHECK(r.per_facet[0].calibrated.confusion.column_total(R) == r.per_facet[0].calibrated.n);
        CHECK(r.per_facet[1].calibrated.confusion.column_total(L) == r.per_facet[1].calibrated.n);
        CHECK(r.overall.delta_acc == doctest::Approx(r.overall.calibrated.accuracy - r.overall.baseline.accuracy));

        ParamsBundle partial;
        partial.set("MF", right);
        CHECK_THROWS_WITH_AS(evaluate(partial, data), doctest::Contains("SS"), InvalidArgument);
    }
}

TEST_CASE("report rendering") {
    EvalReport r;
    ComparisonReport f;
    f.facet = "MF";
    f.baseline.macro_f1 = 0.4;
    f.calibrated.macro_f1 = 0.7;
    f.delta_f1 = 0.3;
    r.per_facet.push_back(f);
    r.mean_facet_baseline_macro_f1 = 0.4;
    r.mean_facet_macro_f1 = 0.7;
    const std::string table = render_facet_table(r);
    CHECK(table.find("0.7000 (+0.3000)") != std::string::npos);
    CHECK(table.find("Avg") != std::string::npos);

    r.overall.facet = "ALL";
    r.overall.baseline.accuracy = 0.4493;
    r.overall.calibrated.accuracy = 0.6588;
    r.overall.delta_acc = 0.6588 - 0.4493;
    const std::string summary = render_summary_table(r);
    CHECK(summary.find("+20.95") != std::string::npos);
    CHECK(summary.find("Logit steering") != std::string::npos);

    const auto j = to_json(r);
    CHECK(j["overall"]["facet"] == "ALL");
    CHECK(j["per_facet"][0]["delta_f1"].get<double>() == 0.3);
    CHECK(j.dump() == to_json(r).dump());

    const std::vector<Label> pred{L, L};
    const std::vector<Label> gold{L, R};
    const std::string text = render_confusion(confusion(pred, gold), "eval");
    CHECK(text.find("collapse: 1.0000") != std::string::npos);
}
