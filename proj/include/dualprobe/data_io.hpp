#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualprobe/core.hpp"
#include "dualprobe/probe.hpp"

namespace dualprobe {

inline constexpr int kFormatVersion = 1;

/// Malformed input file. what() carries "<source>:<line>: <reason>".
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& source, std::size_t line, const std::string& reason);
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// ---------------------------------------------------------------------------
// Dataset files
//
// Line-delimited JSON, UTF-8. Line 1 is the header:
//   {"format_version":1,"d":16,"layer":"28","model":"...","facets":["MF","SS"]}
// optionally with "dtype":"float32" when h values were produced in single
// precision (they are rounded to float and widened on load). Every further
// line is one sample:
//   {"id":"...","facet":"MF","label":"Left","h":[...d reals...],"z":[zL,zC,zR]}
// Blank lines are ignored. When the header lists facets, every sample's facet
// must be one of them.

struct DatasetMeta {
    int format_version = kFormatVersion;
    std::size_t d = 0;
    std::string layer;
    std::string model;
    std::vector<std::string> facets;

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<Sample> samples;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

Dataset read_dataset(std::istream& in, const std::string& source = "<stream>");
Dataset load_dataset(const std::filesystem::path& path);

/// Writes the canonical form: samples ordered by id, shortest round-trip reals.
void write_dataset(const Dataset& dataset, std::ostream& out);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Throws InvalidArgument on duplicate ids, empty facets, dimension drift or
/// facets missing from the header list.
void validate_dataset(const Dataset& dataset);

/// Samples belonging to one facet, in input order.
std::vector<Sample> filter_facet(const std::vector<Sample>& samples, const std::string& facet);

/// Distinct facets present in the samples, sorted.
std::vector<std::string> facets_of(const std::vector<Sample>& samples);

// ---------------------------------------------------------------------------
// Params files
//
// Same line-delimited convention. Header:
//   {"format_version":1,"kind":"dualprobe-params","d":16,"scope":"per-facet"|"global"}
// then one record per head, sorted by facet:
//   {"facet":"MF","v_s":[...],"b_s":0.1,"v_g":[...],"b_g":-0.3,"mu_raw":0.2,"mu":0.55}
// A global bundle has a single record with facet "*". "mu" is informational;
// mu_raw is authoritative.

ParamsBundle read_params(std::istream& in, const std::string& source = "<stream>");
ParamsBundle load_params(const std::filesystem::path& path);
void write_params(const ParamsBundle& bundle, std::ostream& out);
void save_params(const ParamsBundle& bundle, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Planted-structure generator

struct SynthConfig {
    std::size_t d = 16;
    std::size_t n_per_class = 300;
    std::uint64_t seed = 0;
    /// Class centres sit at -alpha u, 0, +alpha u along a random unit axis u.
    double axis_strength = 2.0;
    double noise_sigma = 1.0;
    /// Multiplier on noise_sigma for the Center cluster.
    double center_tightness = 0.5;
    /// Added to z_L of every sample, so argmax of z collapses to Left.
    double collapse_bias = 3.0;
    /// Fraction of injection_label samples whose collapse bias goes to z_C
    /// instead, making their zero-shot prediction Center. 0 gives pure Left
    /// collapse.
    double injection_fraction = 0.0;
    /// Gold class affected by injection_fraction; Left or Right.
    Label injection_label = Label::Right;
    std::vector<std::string> facet_names{"SYN"};

    /// Throws InvalidArgument on any violated constraint. axis_strength = 0 is
    /// accepted as the null model.
    void validate() const;
};

/// Deterministic in the config. Samples are generated class-major
/// (all Left, then Center, then Right) and facets are assigned round-robin
/// within each class. Ids are "s<seq>" zero-padded to six digits.
///
/// Draw order from one Rng(seed): d gaussians for the axis, then per sample
/// d gaussians of noise, three gaussians of logit jitter (std 0.1) and, when
/// injection_fraction > 0 and the class is injection_label, one uniform.
std::vector<Sample> synth_gen(const SynthConfig& config);

/// synth_gen plus a header (model "synthetic", layer "planted").
Dataset synth_dataset(const SynthConfig& config);

}  // namespace dualprobe
