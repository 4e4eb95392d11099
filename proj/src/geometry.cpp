#include "dualprobe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dualprobe/random.hpp"

namespace dualprobe {

namespace {

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

// Centred data matrix, row-major n x d.
struct Centred {
    std::size_t n = 0;
    std::size_t d = 0;
    std::vector<double> rows;

    std::span<const double> row(std::size_t i) const { return {rows.data() + i * d, d}; }

    // out = X^T X v / n
    void apply(std::span<const double> v, std::vector<double>& out) const {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = row(i);
            const double proj = dot(r, v);
            for (std::size_t j = 0; j < d; ++j) out[j] += proj * r[j];
        }
        for (double& x : out) x /= static_cast<double>(n);
    }
};

void orthogonalise(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
    // Two passes of classical Gram-Schmidt.
    for (int pass = 0; pass < 2; ++pass) {
        for (const auto& u : basis) {
            const double c = dot(v, u);
            for (std::size_t j = 0; j < v.size(); ++j) v[j] -= c * u[j];
        }
    }
}

void fix_sign(std::vector<double>& u) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < u.size(); ++j) {
        if (std::abs(u[j]) > std::abs(u[best])) best = j;
    }
    if (u[best] < 0.0) {
        for (double& x : u) x = -x;
    }
}

}  // namespace

PcaResult pca_top_k(std::span<const HiddenVector> vectors, std::size_t k, const PcaOptions& options) {
    if (vectors.empty()) throw InvalidArgument("PCA needs at least one vector");
    const std::size_t d = vectors.front().dim();
    if (k < 1) throw InvalidArgument("PCA: k must be >= 1");
    if (k > d) throw InvalidArgument("PCA: k = " + std::to_string(k) + " exceeds dimension d = " + std::to_string(d));
    if (vectors.size() < k + 1) {
        throw InvalidArgument("PCA: need at least k + 1 = " + std::to_string(k + 1) + " vectors, got " +
                              std::to_string(vectors.size()));
    }

    PcaResult result;
    result.mean.assign(d, 0.0);
    for (const auto& v : vectors) {
        if (v.dim() != d) throw DimensionMismatch("PCA input vector", d, v.dim());
        for (std::size_t j = 0; j < d; ++j) result.mean[j] += v[j];
    }
    for (double& m : result.mean) m /= static_cast<double>(vectors.size());

    Centred x;
    x.n = vectors.size();
    x.d = d;
    x.rows.resize(x.n * d);
    for (std::size_t i = 0; i < x.n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double c = vectors[i][j] - result.mean[j];
            x.rows[i * d + j] = c;
            result.total_variance += c * c;
        }
    }
    result.total_variance /= static_cast<double>(x.n);

    // Below this the deflated operator is treated as zero on the remaining subspace.
    const double zero_floor = 1e-14 * std::max(result.total_variance, 1e-300);

    std::vector<double> w(d);
    for (std::size_t comp = 0; comp < k; ++comp) {
        Rng rng(options.seed + comp);
        std::vector<double> u(d);
        for (double& c : u) c = rng.gaussian();
        orthogonalise(u, result.directions);
        double un = norm(u);
        if (un == 0.0) throw NumericError("PCA: degenerate start vector");
        for (double& c : u) c /= un;

        double lambda = 0.0;
        double residual = 0.0;
        bool converged = false;
        int it = 0;
        for (; it < options.max_iterations && !converged; ++it) {
            x.apply(u, w);
            orthogonalise(w, result.directions);
            const double wn = norm(w);
            if (wn <= zero_floor) {
                // Remaining spectrum is (numerically) zero; any unit vector in it is an eigenvector.
                lambda = 0.0;
                residual = wn;
                converged = true;
                break;
            }
            lambda = dot(u, w);
            residual = 0.0;
            for (std::size_t j = 0; j < d; ++j) residual += (w[j] - lambda * u[j]) * (w[j] - lambda * u[j]);
            residual = std::sqrt(residual);

            double change_plus = 0.0;
            double change_minus = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double next = w[j] / wn;
                change_plus += (next - u[j]) * (next - u[j]);
                change_minus += (next + u[j]) * (next + u[j]);
                u[j] = next;
            }
            const double change = std::sqrt(std::min(change_plus, change_minus));
            // Near-degenerate eigenvalues make the direction drift slowly while the
            // Rayleigh residual is already at round-off; accept either test.
            converged = change < options.tolerance || residual <= options.tolerance * result.total_variance;
        }
        if (!converged) {
            throw NumericError("PCA: component " + std::to_string(comp + 1) + " did not converge in " +
                               std::to_string(options.max_iterations) + " iterations (residual " +
                               std::to_string(residual) + ")");
        }
        orthogonalise(u, result.directions);
        un = norm(u);
        for (double& c : u) c /= un;
        fix_sign(u);
        result.directions.push_back(std::move(u));
        result.eigenvalues.push_back(std::max(lambda, 0.0));
        result.iterations.push_back(it);
    }

    // Deflation yields descending order up to round-off; enforce it.
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return result.eigenvalues[a] > result.eigenvalues[b]; });
    PcaResult sorted = result;
    for (std::size_t i = 0; i < k; ++i) {
        sorted.directions[i] = result.directions[order[i]];
        sorted.eigenvalues[i] = result.eigenvalues[order[i]];
        sorted.iterations[i] = result.iterations[order[i]];
    }
    result = std::move(sorted);

    result.projections.assign(x.n, std::vector<double>(k));
    for (std::size_t i = 0; i < x.n; ++i) {
        for (std::size_t c = 0; c < k; ++c) result.projections[i][c] = dot(x.row(i), result.directions[c]);
    }
    return result;
}

namespace {

void check_aligned(const PcaResult& pca, std::span<const Label> labels) {
    if (pca.projections.size() != labels.size()) {
        throw DimensionMismatch("PCA projections vs labels", pca.projections.size(), labels.size());
    }
}

std::array<std::size_t, kNumLabels> require_all_classes(std::span<const Label> labels) {
    std::array<std::size_t, kNumLabels> counts{};
    for (Label l : labels) ++counts[index_of(l)];
    for (Label l : kAllLabels) {
        if (counts[index_of(l)] == 0) throw InvalidArgument("class " + std::string(to_string(l)) + " has no samples");
    }
    return counts;
}

std::array<double, kNumLabels> class_std(const PcaResult& pca, std::span<const Label> labels, std::size_t component,
                                         const std::array<std::size_t, kNumLabels>& counts) {
    std::array<double, kNumLabels> mean{};
    for (std::size_t i = 0; i < labels.size(); ++i) mean[index_of(labels[i])] += pca.projections[i][component];
    for (std::size_t c = 0; c < kNumLabels; ++c) mean[c] /= static_cast<double>(counts[c]);
    std::array<double, kNumLabels> var{};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double dlt = pca.projections[i][component] - mean[index_of(labels[i])];
        var[index_of(labels[i])] += dlt * dlt;
    }
    for (std::size_t c = 0; c < kNumLabels; ++c) var[c] = std::sqrt(var[c] / static_cast<double>(counts[c]));
    return var;
}

}  // namespace

double ordering_score_from_means(const std::array<double, kNumLabels>& m) noexcept {
    const int up = (m[0] < m[1] ? 1 : 0) + (m[1] < m[2] ? 1 : 0);
    const int down = (m[0] > m[1] ? 1 : 0) + (m[1] > m[2] ? 1 : 0);
    if (up == 2) return 1.0;
    if (down == 2) return -1.0;
    return up >= down ? up / 2.0 : -down / 2.0;
}

OrderingReport ordering_score(const PcaResult& pca, std::span<const Label> labels) {
    check_aligned(pca, labels);
    const auto counts = require_all_classes(labels);
    OrderingReport r;
    for (std::size_t i = 0; i < labels.size(); ++i) r.class_means[index_of(labels[i])] += pca.projections[i][0];
    for (std::size_t c = 0; c < kNumLabels; ++c) r.class_means[c] /= static_cast<double>(counts[c]);
    r.score = ordering_score_from_means(r.class_means);
    return r;
}

CenterBandReport center_band_stats(const PcaResult& pca, std::span<const Label> labels) {
    check_aligned(pca, labels);
    CenterBandReport r;
    r.counts = require_all_classes(labels);
    r.pc1_std = class_std(pca, labels, 0, r.counts);
    if (pca.k() >= 2) r.pc2_std = class_std(pca, labels, 1, r.counts);
    const bool degenerate = std::any_of(r.counts.begin(), r.counts.end(), [](std::size_t c) { return c < 2; });
    if (!degenerate) {
        const auto& s = r.pc1_std;
        r.center_tightest = s[1] < s[0] && s[1] < s[2];
    }
    return r;
}

std::string_view to_string(Group g) noexcept {
    switch (g) {
        case Group::A: return "A";
        case Group::B: return "B";
        case Group::C: return "C";
        case Group::D: return "D";
    }
    return "?";
}

std::string_view describe(Group g) noexcept {
    switch (g) {
        case Group::A: return "Aligned (gold L, pred L)";
        case Group::B: return "Conflict (gold R, pred L)";
        case Group::C: return "Neutralization (gold C, pred L)";
        case Group::D: return "Injection (gold L/R, pred C)";
    }
    return "?";
}

std::optional<Group> assign_group(Label gold, Label baseline) noexcept {
    if (baseline == Label::Left) {
        switch (gold) {
            case Label::Left: return Group::A;
            case Label::Right: return Group::B;
            case Label::Center: return Group::C;
        }
    }
    if (baseline == Label::Center && gold != Label::Center) return Group::D;
    return std::nullopt;
}

GroupDynamics group_dynamics(const ParamsBundle* params, std::span<const Sample> data) {
    if (data.empty()) throw InvalidArgument("group dynamics need at least one sample");
    GroupDynamics out;
    out.has_params = params != nullptr;
    out.rule = "by (gold, argmax of raw logits): A=(L,L) B=(R,L) C=(C,L) D=(L|R,C); other pairs ungrouped";

    std::array<double, 4> sum_s{};
    std::array<double, 4> sum_g{};
    out.assignment.reserve(data.size());
    for (const Sample& sample : data) {
        const auto group = assign_group(sample.y, argmax_label(sample.z));
        out.assignment.push_back(group);
        if (!group) {
            ++out.other;
            continue;
        }
        const auto gi = static_cast<std::size_t>(*group);
        ++out.groups[gi].count;
        if (params) {
            const ProbeOutput p = run_probes(params->for_facet(sample.facet), sample.h);
            sum_s[gi] += p.s;
            sum_g[gi] += p.g;
        }
    }
    if (params) {
        for (std::size_t gi = 0; gi < 4; ++gi) {
            auto& st = out.groups[gi];
            if (st.count == 0) continue;
            st.mean_s = sum_s[gi] / static_cast<double>(st.count);
            st.mean_g = sum_g[gi] / static_cast<double>(st.count);
        }
    }
    return out;
}

GroupDynamics group_dynamics(const SteeringParams& params, std::span<const Sample> data) {
    const ParamsBundle bundle = ParamsBundle::global(params);
    return group_dynamics(&bundle, data);
}

}  // namespace dualprobe
