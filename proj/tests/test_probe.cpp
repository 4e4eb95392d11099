#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "dualprobe/probe.hpp"
#include "fixtures.hpp"

using namespace dualprobe;

namespace {

SteeringParams head(std::vector<double> v_s, double b_s, std::vector<double> v_g, double b_g, double mu_raw = 0.0) {
    SteeringParams p;
    p.v_s = std::move(v_s);
    p.b_s = b_s;
    p.v_g = std::move(v_g);
    p.b_g = b_g;
    p.mu_raw = mu_raw;
    return p;
}

bool bitwise_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("compute_s examples") {
    CHECK(compute_s(head({0, 0, 0}, 0.5, {0, 0, 0}, 0), HiddenVector({3, -7, 11})) == 0.5);
    CHECK(compute_s(head({1, -1}, 0, {0, 0}, 0), HiddenVector({2, 3})) == -1.0);
    CHECK(compute_s(head({0.5, 0.5}, 1, {0, 0}, 0), HiddenVector({1, 1})) == 2.0);
}

TEST_CASE("compute_s is affine in h") {
    std::mt19937_64 gen(3);
    for (int t = 0; t < 50; ++t) {
        const auto p = fixtures::random_params(gen, 5);
        const auto a = fixtures::gaussian_vec(gen, 5);
        const auto b = fixtures::gaussian_vec(gen, 5);
        std::vector<double> sum(5);
        for (int i = 0; i < 5; ++i) sum[i] = a[i] + b[i];
        const double lhs = compute_s(p, HiddenVector(sum)) - p.b_s;
        const double rhs = (compute_s(p, HiddenVector(a)) - p.b_s) + (compute_s(p, HiddenVector(b)) - p.b_s);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("compute_g examples") {
    CHECK(compute_g(head({0, 0}, 0, {0, 0}, 0), HiddenVector({4, -4})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(compute_g(head({0}, 0, {1}, 0), HiddenVector({100})) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(compute_g(head({0, 0}, 0, {1, 1}, -1), HiddenVector({0.5, 0.5})) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(compute_g(head({0}, 0, {-1}, 0), HiddenVector({50})) > 0.0);
}

TEST_CASE("probes reject mismatched dimensions") {
    const auto p = head({1, 2}, 0, {1, 2}, 0);
    CHECK_THROWS_AS(compute_s(p, HiddenVector({1, 2, 3})), DimensionMismatch);
    CHECK_THROWS_AS(compute_g(p, HiddenVector({1})), DimensionMismatch);
    try {
        compute_s(p, HiddenVector({1, 2, 3}));
    } catch (const DimensionMismatch& e) {
        CHECK(e.expected() == 2);
        CHECK(e.actual() == 3);
    }
}

TEST_CASE("calibrate examples") {
    const LogitTriple id = calibrate(LogitTriple(1, 2, 3), 0, 0, 0.37);
    CHECK(id == LogitTriple(1, 2, 3));

    CHECK(calibrate(LogitTriple(0, 0, 0), 1, 0, 1.0) == LogitTriple(-1, 0, 1));
    CHECK(calibrate(LogitTriple(2, 0, 2), 0, 2, 0.5) == LogitTriple(1, 1, 1));
}

TEST_CASE("calibrate contract") {
    CHECK_THROWS_AS(calibrate(LogitTriple(0, 0, 0), 0, -1e-12, 0.5), ContractViolation);
    CHECK_THROWS_AS(calibrate(LogitTriple(0, 0, 0), 0, 1, 1.5), ContractViolation);
    CHECK_THROWS_AS(calibrate(LogitTriple(0, 0, 0), 0, 1, -0.1), ContractViolation);
    CHECK_THROWS_AS(calibrate(LogitTriple(0, 0, 0), std::nan(""), 1, 0.5), InvalidArgument);
}

TEST_CASE("calibrate algebraic properties") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> us(-10, 10);
    std::uniform_real_distribution<double> ug(0, 10);
    std::uniform_real_distribution<double> umu(0, 1);

    for (int t = 0; t < 1000; ++t) {
        const LogitTriple z = fixtures::random_triple(gen, 20.0);
        const double s = us(gen);
        const double g = ug(gen);
        const double mu = umu(gen);

        // identity: bitwise
        const LogitTriple same = calibrate(z, 0.0, 0.0, mu);
        for (std::size_t k = 0; k < 3; ++k) CHECK(bitwise_equal(same[k], z[k]));

        // sum shift = (mu - 1)(s + g)
        const LogitTriple zh = calibrate(z, s, g, mu);
        const double lhs = (zh.left() + zh.center() + zh.right()) - (z.left() + z.center() + z.right());
        CHECK(std::abs(lhs - (mu - 1.0) * (s + g)) < 1e-9);

        // Left/Right share the g reduction when s = 0 (up to rounding of z + shift)
        const LogitTriple zg = calibrate(z, 0.0, g, mu);
        CHECK(std::abs((zg.left() - z.left()) - (zg.right() - z.right())) < 1e-14 * 64);

        // direction: larger s lowers L, raises R by mu*s, leaves C
        const LogitTriple lo = calibrate(z, s, 0.0, mu);
        const LogitTriple hi = calibrate(z, s + 1.0, 0.0, mu);
        CHECK(hi.left() < lo.left());
        if (mu > 1e-6) CHECK(hi.right() > lo.right());
        CHECK(hi.center() == lo.center());
    }

    // mu -> 1: mass is conserved
    const LogitTriple z(0.3, -1.2, 2.2);
    const LogitTriple zh = calibrate(z, 1.7, 0.9, 1.0);
    CHECK(std::abs((zh.left() + zh.center() + zh.right()) - (z.left() + z.center() + z.right())) < 1e-9);
}

TEST_CASE("g shifts Left and Right identically") {
    // On a dyadic grid every sum below is exact, so any difference would come
    // from the update itself.
    std::mt19937_64 gen(12);
    std::uniform_int_distribution<long long> k(-(1LL << 30), 1LL << 30);
    std::uniform_int_distribution<long long> m(0, 1LL << 28);
    std::uniform_real_distribution<double> umu(0, 1);
    const double q = std::ldexp(1.0, -20);
    for (int t = 0; t < 1000; ++t) {
        const LogitTriple z(k(gen) * q, k(gen) * q, k(gen) * q);
        const double g = m(gen) * q;
        const LogitTriple zh = calibrate(z, 0.0, g, umu(gen));
        CHECK(zh.left() - z.left() == zh.right() - z.right());
        CHECK(zh.left() - z.left() == -g / 2);
    }
}

TEST_CASE("calibrate moves Right by mu*s but Left by s") {
    // For mu < 1 the Right update moves by mu*s while Left moves by the full s.
    const LogitTriple zh = calibrate(LogitTriple(0, 0, 0), 2.0, 0.0, 0.25);
    CHECK(zh.left() == -2.0);
    CHECK(zh.right() == 0.5);
}

TEST_CASE("predict examples") {
    SUBCASE("zero head applies only the ln2 neutralisation") {
        const Sample s{"a", "F", HiddenVector({1.0, -2.0}), LogitTriple(0, 0, 0), Label::Left};
        const Prediction p = predict(SteeringParams::zeros(2), s);
        const double ln2 = std::log(2.0);
        CHECK(p.probe.s == 0.0);
        CHECK(p.probe.g == doctest::Approx(ln2).epsilon(1e-15));
        CHECK(p.calibrated.left() == doctest::Approx(-ln2 / 2).epsilon(1e-15));
        CHECK(p.calibrated.center() == doctest::Approx(ln2 / 2).epsilon(1e-15));
        CHECK(p.calibrated.right() == doctest::Approx(-ln2 / 2).epsilon(1e-15));
        CHECK(p.label == Label::Center);
        CHECK(p.probabilities[0] + p.probabilities[1] + p.probabilities[2] == doctest::Approx(1.0));
    }
    SUBCASE("g -> 0 limit reproduces the zero-shot argmax") {
        std::mt19937_64 gen(5);
        SteeringParams p = SteeringParams::zeros(3);
        p.b_g = -1e6;
        for (int t = 0; t < 200; ++t) {
            const Sample s{"x", "F", HiddenVector(fixtures::gaussian_vec(gen, 3)), fixtures::random_triple(gen), Label::Left};
            const Prediction pr = predict(p, s);
            CHECK(pr.probe.g == 0.0);
            CHECK(pr.calibrated == s.z);
            CHECK(pr.label == argmax_label(s.z));
        }
    }
    SUBCASE("conflict reversal") {
        // s = 5 through b_s, g ~ 0, mu ~ 1
        SteeringParams p = SteeringParams::zeros(1);
        p.b_s = 5.0;
        p.b_g = -1e6;
        p.mu_raw = 50.0;
        const Sample s{"b", "F", HiddenVector({0.0}), LogitTriple(5, 0, 0), Label::Right};
        const Prediction pr = predict(p, s);
        CHECK(pr.calibrated.left() == doctest::Approx(0.0));
        CHECK(pr.calibrated.center() == doctest::Approx(0.0));
        CHECK(pr.calibrated.right() == doctest::Approx(5.0));
        CHECK(pr.label == Label::Right);
    }
}

TEST_CASE("predict is pure") {
    std::mt19937_64 gen(9);
    const auto p = fixtures::random_params(gen, 4);
    const auto samples = fixtures::random_samples(gen, 20, 4);
    for (const auto& s : samples) {
        const Prediction a = predict(p, s);
        const Prediction b = predict(p, s);
        CHECK(std::memcmp(a.calibrated.values().data(), b.calibrated.values().data(), sizeof(double) * 3) == 0);
        CHECK(std::memcmp(a.probabilities.data(), b.probabilities.data(), sizeof(double) * 3) == 0);
        CHECK(a.label == b.label);
    }
}

TEST_CASE("params bundle lookup") {
    ParamsBundle b;
    CHECK(b.empty());
    b.set("MF", SteeringParams::zeros(2));
    b.set("SS", SteeringParams::zeros(2));
    CHECK(b.dim() == 2);
    CHECK_NOTHROW(b.for_facet("MF"));
    try {
        b.for_facet("PeR");
        FAIL("expected missing facet error");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("PeR") != std::string::npos);
    }
    CHECK_THROWS_AS(b.set("DS", SteeringParams::zeros(3)), DimensionMismatch);

    const ParamsBundle g = ParamsBundle::global(SteeringParams::zeros(4));
    CHECK(g.is_global());
    CHECK(&g.for_facet("anything") == &g.for_facet("else"));
}
