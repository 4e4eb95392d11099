#include "dualprobe/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "dualprobe/random.hpp"

namespace dualprobe {

using nlohmann::json;
using nlohmann::ordered_json;

FormatError::FormatError(const std::string& source, std::size_t line, const std::string& reason)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + reason), line_(line) {}

namespace {

class LineReader {
public:
    LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    // Next non-blank line parsed as a JSON object; false at end of input.
    bool next(json& out) {
        std::string text;
        while (std::getline(in_, text)) {
            ++line_;
            if (!text.empty() && text.back() == '\r') text.pop_back();
            if (text.find_first_not_of(" \t") == std::string::npos) continue;
            try {
                out = json::parse(text);
            } catch (const json::exception& e) {
                fail(std::string("malformed JSON: ") + e.what());
            }
            if (!out.is_object()) fail("expected a JSON object");
            return true;
        }
        if (in_.bad()) fail("read error");
        return false;
    }

    [[noreturn]] void fail(const std::string& reason) const { throw FormatError(source_, line_, reason); }

    const json& field(const json& obj, const char* key) const {
        auto it = obj.find(key);
        if (it == obj.end()) fail(std::string("missing field '") + key + "'");
        return *it;
    }

    std::string string_field(const json& obj, const char* key) const {
        const json& v = field(obj, key);
        if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
        return v.get<std::string>();
    }

    double number_field(const json& obj, const char* key) const {
        const json& v = field(obj, key);
        if (!v.is_number()) fail(std::string("field '") + key + "' must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(std::string("field '") + key + "' is not finite");
        return x;
    }

    std::vector<double> array_field(const json& obj, const char* key, bool as_float32) const {
        const json& v = field(obj, key);
        if (!v.is_array()) fail(std::string("field '") + key + "' must be an array");
        std::vector<double> out;
        out.reserve(v.size());
        for (const json& e : v) {
            if (!e.is_number()) fail(std::string("field '") + key + "' has a non-numeric entry");
            double x = e.get<double>();
            if (as_float32) x = static_cast<double>(static_cast<float>(x));
            if (!std::isfinite(x)) fail(std::string("field '") + key + "' has a non-finite entry");
            out.push_back(x);
        }
        return out;
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::string source_;
    std::size_t line_ = 0;
};

std::size_t header_dim(const LineReader& r, const json& header) {
    const json& d = r.field(header, "d");
    if (!d.is_number_integer() || d.get<long long>() < 1) r.fail("header field 'd' must be a positive integer");
    return static_cast<std::size_t>(d.get<long long>());
}

void check_version(const LineReader& r, const json& header) {
    const json& v = r.field(header, "format_version");
    if (!v.is_number_integer() || v.get<int>() != kFormatVersion) {
        r.fail("unsupported format_version (expected " + std::to_string(kFormatVersion) + ")");
    }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

void finish_write(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

}  // namespace

// ---------------------------------------------------------------------------

Dataset read_dataset(std::istream& in, const std::string& source) {
    LineReader reader(in, source);
    json header;
    if (!reader.next(header)) reader.fail("missing header line");

    Dataset ds;
    check_version(reader, header);
    ds.meta.d = header_dim(reader, header);
    ds.meta.layer = reader.string_field(header, "layer");
    ds.meta.model = reader.string_field(header, "model");
    const json& facets = reader.field(header, "facets");
    if (!facets.is_array()) reader.fail("header field 'facets' must be an array");
    for (const json& f : facets) {
        if (!f.is_string() || f.get<std::string>().empty()) reader.fail("facet names must be non-empty strings");
        ds.meta.facets.push_back(f.get<std::string>());
    }
    bool float32 = false;
    if (auto it = header.find("dtype"); it != header.end()) {
        if (*it == "float32") float32 = true;
        else if (*it != "float64") reader.fail("header field 'dtype' must be \"float32\" or \"float64\"");
    }

    const std::set<std::string, std::less<>> allowed(ds.meta.facets.begin(), ds.meta.facets.end());
    std::unordered_set<std::string> seen;
    json rec;
    while (reader.next(rec)) {
        std::string id = reader.string_field(rec, "id");
        if (id.empty()) reader.fail("empty sample id");
        if (!seen.insert(id).second) reader.fail("duplicate id '" + id + "'");
        std::string facet = reader.string_field(rec, "facet");
        if (facet.empty()) reader.fail("record '" + id + "' has an empty facet");
        if (!allowed.empty() && !allowed.contains(facet)) {
            reader.fail("record '" + id + "' has facet '" + facet + "' not listed in the header");
        }
        Label label;
        try {
            label = parse_label(reader.string_field(rec, "label"));
        } catch (const InvalidArgument& e) {
            reader.fail("record '" + id + "': " + e.what());
        }
        std::vector<double> h = reader.array_field(rec, "h", float32);
        if (h.size() != ds.meta.d) {
            reader.fail("record '" + id + "' has h of length " + std::to_string(h.size()) + ", header says d = " +
                        std::to_string(ds.meta.d));
        }
        const std::vector<double> z = reader.array_field(rec, "z", false);
        if (z.size() != kNumLabels) reader.fail("record '" + id + "' must have exactly 3 logits");
        ds.samples.push_back(Sample{std::move(id), std::move(facet), HiddenVector(std::move(h)),
                                    LogitTriple(z[0], z[1], z[2]), label});
    }
    return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
    return read_dataset(in, path.string());
}

void validate_dataset(const Dataset& dataset) {
    if (dataset.meta.d < 1) throw InvalidArgument("dataset dimension d must be >= 1");
    const std::set<std::string, std::less<>> allowed(dataset.meta.facets.begin(), dataset.meta.facets.end());
    std::unordered_set<std::string> seen;
    for (const Sample& s : dataset.samples) {
        if (s.id.empty()) throw InvalidArgument("sample with empty id");
        if (!seen.insert(s.id).second) throw InvalidArgument("duplicate sample id '" + s.id + "'");
        if (s.facet.empty()) throw InvalidArgument("sample '" + s.id + "' has an empty facet");
        if (!allowed.empty() && !allowed.contains(s.facet)) {
            throw InvalidArgument("sample '" + s.id + "' has facet '" + s.facet + "' not listed in the header");
        }
        if (s.h.dim() != dataset.meta.d) throw DimensionMismatch("sample '" + s.id + "'", dataset.meta.d, s.h.dim());
    }
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
    validate_dataset(dataset);

    ordered_json header;
    header["format_version"] = dataset.meta.format_version;
    header["d"] = dataset.meta.d;
    header["layer"] = dataset.meta.layer;
    header["model"] = dataset.meta.model;
    header["facets"] = dataset.meta.facets;
    out << header.dump() << '\n';

    std::vector<const Sample*> order;
    order.reserve(dataset.samples.size());
    for (const Sample& s : dataset.samples) order.push_back(&s);
    std::sort(order.begin(), order.end(), [](const Sample* a, const Sample* b) { return a->id < b->id; });

    for (const Sample* s : order) {
        ordered_json rec;
        rec["id"] = s->id;
        rec["facet"] = s->facet;
        rec["label"] = std::string(to_string(s->y));
        rec["h"] = std::vector<double>(s->h.values().begin(), s->h.values().end());
        rec["z"] = s->z.values();
        out << rec.dump() << '\n';
    }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
    // Serialise fully before touching the file so a validation error leaves nothing behind.
    std::ostringstream buffer;
    write_dataset(dataset, buffer);
    std::ofstream out = open_for_write(path);
    out << buffer.str();
    finish_write(out, path);
}

std::vector<Sample> filter_facet(const std::vector<Sample>& samples, const std::string& facet) {
    std::vector<Sample> out;
    std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
                 [&](const Sample& s) { return s.facet == facet; });
    return out;
}

std::vector<std::string> facets_of(const std::vector<Sample>& samples) {
    std::set<std::string> names;
    for (const Sample& s : samples) names.insert(s.facet);
    return {names.begin(), names.end()};
}

// ---------------------------------------------------------------------------

ParamsBundle read_params(std::istream& in, const std::string& source) {
    LineReader reader(in, source);
    json header;
    if (!reader.next(header)) reader.fail("missing header line");
    check_version(reader, header);
    if (reader.string_field(header, "kind") != "dualprobe-params") reader.fail("not a params file (kind mismatch)");
    const std::size_t d = header_dim(reader, header);
    const std::string scope = reader.string_field(header, "scope");
    if (scope != "global" && scope != "per-facet") reader.fail("scope must be \"global\" or \"per-facet\"");

    ParamsBundle bundle;
    json rec;
    std::size_t records = 0;
    while (reader.next(rec)) {
        ++records;
        const std::string facet = reader.string_field(rec, "facet");
        SteeringParams p;
        p.v_s = reader.array_field(rec, "v_s", false);
        p.b_s = reader.number_field(rec, "b_s");
        p.v_g = reader.array_field(rec, "v_g", false);
        p.b_g = reader.number_field(rec, "b_g");
        p.mu_raw = reader.number_field(rec, "mu_raw");
        if (p.v_s.size() != d || p.v_g.size() != d) {
            reader.fail("head for facet '" + facet + "' does not match header d = " + std::to_string(d));
        }
        if (scope == "global") {
            if (facet != "*" || records > 1) reader.fail("a global params file holds exactly one record with facet \"*\"");
            bundle = ParamsBundle::global(std::move(p));
        } else {
            if (facet.empty() || facet == "*") reader.fail("per-facet record needs a facet name");
            if (bundle.per_facet().contains(facet)) reader.fail("duplicate head for facet '" + facet + "'");
            bundle.set(facet, std::move(p));
        }
    }
    if (records == 0) reader.fail("params file has no heads");
    return bundle;
}

ParamsBundle load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open params file '" + path.string() + "'");
    return read_params(in, path.string());
}

namespace {

ordered_json head_json(const std::string& facet, const SteeringParams& p) {
    ordered_json j;
    j["facet"] = facet;
    j["v_s"] = p.v_s;
    j["b_s"] = p.b_s;
    j["v_g"] = p.v_g;
    j["b_g"] = p.b_g;
    j["mu_raw"] = p.mu_raw;
    j["mu"] = p.mu();
    return j;
}

}  // namespace

void write_params(const ParamsBundle& bundle, std::ostream& out) {
    if (bundle.empty()) throw InvalidArgument("refusing to write an empty params bundle");
    ordered_json header;
    header["format_version"] = kFormatVersion;
    header["kind"] = "dualprobe-params";
    header["d"] = bundle.dim();
    header["scope"] = bundle.is_global() ? "global" : "per-facet";
    out << header.dump() << '\n';
    if (bundle.is_global()) {
        out << head_json("*", *bundle.global_params()).dump() << '\n';
        return;
    }
    for (const auto& [facet, p] : bundle.per_facet()) out << head_json(facet, p).dump() << '\n';
}

void save_params(const ParamsBundle& bundle, const std::filesystem::path& path) {
    std::ostringstream buffer;
    write_params(bundle, buffer);
    std::ofstream out = open_for_write(path);
    out << buffer.str();
    finish_write(out, path);
}

// ---------------------------------------------------------------------------

void SynthConfig::validate() const {
    if (d < 2) throw InvalidArgument("synth: d must be >= 2, got " + std::to_string(d));
    if (n_per_class < 1) throw InvalidArgument("synth: n_per_class must be >= 1");
    if (!(axis_strength >= 0.0) || !std::isfinite(axis_strength)) throw InvalidArgument("synth: axis_strength must be >= 0");
    if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) throw InvalidArgument("synth: noise_sigma must be > 0");
    if (!(center_tightness > 0.0 && center_tightness <= 1.0)) throw InvalidArgument("synth: center_tightness must lie in (0, 1]");
    if (!(collapse_bias >= 0.0) || !std::isfinite(collapse_bias)) throw InvalidArgument("synth: collapse_bias must be >= 0");
    if (!(injection_fraction >= 0.0 && injection_fraction <= 1.0)) throw InvalidArgument("synth: injection_fraction must lie in [0, 1]");
    if (injection_label == Label::Center) throw InvalidArgument("synth: injection_label must be Left or Right");
    if (facet_names.empty()) throw InvalidArgument("synth: need at least one facet name");
    std::set<std::string> unique;
    for (const auto& f : facet_names) {
        if (f.empty()) throw InvalidArgument("synth: facet names must be non-empty");
        if (!unique.insert(f).second) throw InvalidArgument("synth: duplicate facet name '" + f + "'");
    }
}

std::vector<Sample> synth_gen(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);

    std::vector<double> axis(config.d);
    for (double& a : axis) a = rng.gaussian();
    const double axis_norm = std::sqrt(dot(axis, axis));
    for (double& a : axis) a /= axis_norm;

    constexpr double kJitter = 0.1;
    std::vector<Sample> out;
    out.reserve(3 * config.n_per_class);
    std::size_t seq = 0;
    for (Label label : kAllLabels) {
        const double offset = label == Label::Left ? -config.axis_strength
                            : label == Label::Right ? config.axis_strength : 0.0;
        const double sigma = config.noise_sigma * (label == Label::Center ? config.center_tightness : 1.0);
        for (std::size_t i = 0; i < config.n_per_class; ++i) {
            std::vector<double> h(config.d);
            for (std::size_t j = 0; j < config.d; ++j) h[j] = offset * axis[j] + sigma * rng.gaussian();

            std::array<double, kNumLabels> z{};
            for (double& zk : z) zk = kJitter * rng.gaussian();
            std::size_t biased = 0;
            if (config.injection_fraction > 0.0 && label == config.injection_label &&
                rng.uniform() < config.injection_fraction) {
                biased = 1;
            }
            z[biased] += config.collapse_bias;

            char id[32];
            std::snprintf(id, sizeof id, "s%06zu", seq++);
            out.push_back(Sample{id, config.facet_names[i % config.facet_names.size()], HiddenVector(std::move(h)),
                                 LogitTriple(z), label});
        }
    }
    return out;
}

Dataset synth_dataset(const SynthConfig& config) {
    Dataset ds;
    ds.samples = synth_gen(config);
    ds.meta.d = config.d;
    ds.meta.layer = "planted";
    ds.meta.model = "synthetic";
    ds.meta.facets = config.facet_names;
    std::sort(ds.meta.facets.begin(), ds.meta.facets.end());
    return ds;
}

}  // namespace dualprobe
