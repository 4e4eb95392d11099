#include "commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dualprobe/data_io.hpp"
#include "dualprobe/geometry.hpp"
#include "dualprobe/metrics.hpp"
#include "dualprobe/trainer.hpp"

namespace dualprobe::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

/// Bad flag values detected after parsing; reported like parse errors (exit 2).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string with_suffix(const std::string& path, const std::string& suffix) { return path + suffix; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    ordered_json config = ordered_json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;

    void write(const fs::path& path) const {
        ordered_json j;
        j["tool"] = "dualprobe";
        j["tool_version"] = kToolVersion;
        j["command"] = command;
        j["argv"] = argv;
        j["seed"] = seed;
        j["config"] = config;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        write_text(path, j.dump(2) + "\n");
    }
};

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
    SynthConfig config;
    std::string facets = "SYN";
    std::string injection_label = "Right";
    std::string out;
};

void add_synth(CLI::App& app, SynthOptions& o) {
    app.add_option("--d", o.config.d, "Hidden dimension (>= 2)")->capture_default_str();
    app.add_option("--n-per-class", o.config.n_per_class, "Samples per class")->capture_default_str();
    app.add_option("--seed", o.config.seed, "Generator seed")->capture_default_str();
    app.add_option("--alpha", o.config.axis_strength, "Distance of the Left/Right centres from the origin")->capture_default_str();
    app.add_option("--sigma", o.config.noise_sigma, "Per-coordinate noise std")->capture_default_str();
    app.add_option("--center-tightness", o.config.center_tightness, "Center noise multiplier in (0, 1]")->capture_default_str();
    app.add_option("--collapse-bias", o.config.collapse_bias, "Bias added to z_L")->capture_default_str();
    app.add_option("--injection-fraction", o.config.injection_fraction,
                   "Fraction of --injection-label samples biased toward Center instead")->capture_default_str();
    app.add_option("--injection-label", o.injection_label, "Gold class hit by injection: Left or Right")->capture_default_str();
    app.add_option("--facets", o.facets, "Comma-separated facet names")->capture_default_str();
    app.add_option("--out", o.out, "Output dataset path")->required();
}

int cmd_synth(const SynthOptions& o, const std::vector<std::string>& argv, std::ostream& out) {
    SynthConfig config = o.config;
    config.facet_names = split_list(o.facets);
    try {
        config.injection_label = parse_label(o.injection_label);
        config.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }

    const Dataset ds = synth_dataset(config);
    save_dataset(ds, o.out);

    Manifest m;
    m.command = "synth";
    m.argv = argv;
    m.seed = config.seed;
    m.config = {{"d", config.d},
                {"n_per_class", config.n_per_class},
                {"alpha", config.axis_strength},
                {"sigma", config.noise_sigma},
                {"center_tightness", config.center_tightness},
                {"collapse_bias", config.collapse_bias},
                {"injection_fraction", config.injection_fraction},
                {"injection_label", std::string(to_string(config.injection_label))},
                {"facets", config.facet_names}};
    m.outputs = {o.out};
    m.write(with_suffix(o.out, ".manifest.json"));

    out << "wrote " << ds.samples.size() << " samples (d = " << config.d << ") to " << o.out << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    std::string data;
    std::string out;
    std::string eval_out;
    std::string summary;
    double fraction = 0.2;
    std::uint64_t seed = 0;
    TrainConfig config;
    std::string optimizer = "adam";
    int patience = 0;
    bool global = false;
    bool no_stratify = false;
};

void add_train(CLI::App& app, TrainOptions& o) {
    app.add_option("--data", o.data, "Input dataset")->required();
    app.add_option("--out", o.out, "Output params file")->required();
    app.add_option("--eval-out", o.eval_out, "Held-out split output (default: <out>.heldout.jsonl)");
    app.add_option("--summary", o.summary, "Training summary JSON (default: <out>.summary.json)");
    app.add_option("--fraction", o.fraction, "Labelled fraction used for training")->capture_default_str();
    app.add_option("--seed", o.seed, "Seed for the split and initialisation")->capture_default_str();
    app.add_option("--lr", o.config.learning_rate, "Learning rate")->capture_default_str();
    app.add_option("--epochs", o.config.epochs, "Full-batch epochs")->capture_default_str();
    app.add_option("--l2", o.config.l2_penalty, "L2 penalty on v_s and v_g")->capture_default_str();
    app.add_option("--init-scale", o.config.init_scale, "Std of the gaussian probe initialisation")->capture_default_str();
    app.add_option("--optimizer", o.optimizer, "adam or gd")->capture_default_str();
    app.add_option("--patience", o.patience, "Early-stopping patience in epochs (0 = off)")->capture_default_str();
    app.add_flag("--global", o.global, "Train one head shared by all facets");
    app.add_flag("--no-stratify", o.no_stratify, "Split without stratifying by facet");
}

ordered_json train_config_json(const TrainOptions& o, const TrainConfig& c) {
    return {{"fraction", o.fraction},
            {"stratify_by_facet", !o.no_stratify},
            {"scope", o.global ? "global" : "per-facet"},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"l2_penalty", c.l2_penalty},
            {"init_scale", c.init_scale},
            {"optimizer", std::string(to_string(c.optimizer))},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epsilon", c.epsilon},
            {"early_stop_patience", c.early_stop_patience ? ordered_json(*c.early_stop_patience) : ordered_json(nullptr)}};
}

int cmd_train(const TrainOptions& o, const std::vector<std::string>& argv, std::ostream& out) {
    TrainConfig config = o.config;
    config.seed = o.seed;
    try {
        if (!(o.fraction > 0.0 && o.fraction < 1.0)) throw InvalidArgument("--fraction must lie in (0, 1)");
        config.optimizer = parse_optimizer(o.optimizer);
        if (o.patience < 0) throw InvalidArgument("--patience must be >= 0");
        if (o.patience > 0) config.early_stop_patience = o.patience;
        config.validate();
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
    const std::string eval_out = o.eval_out.empty() ? with_suffix(o.out, ".heldout.jsonl") : o.eval_out;
    const std::string summary_out = o.summary.empty() ? with_suffix(o.out, ".summary.json") : o.summary;

    const Dataset ds = load_dataset(o.data);
    if (ds.samples.empty()) throw InvalidArgument("dataset '" + o.data + "' has no samples");
    const Split split = few_shot_split(ds.samples, o.fraction, o.seed, !o.no_stratify);

    ParamsBundle bundle;
    ordered_json heads = ordered_json::object();
    auto record = [&](const std::string& name, const TrainResult& r, std::size_t n) {
        heads[name] = {{"n_train", n},
                       {"epochs_run", r.epochs_run},
                       {"initial_loss", r.loss_history.front()},
                       {"final_loss", r.final_loss},
                       {"mu", r.params.mu()},
                       {"loss_history", r.loss_history}};
        out << "  " << name << ": n_train=" << n << " final_loss=" << num(r.final_loss) << " mu=" << num(r.params.mu())
            << '\n';
    };

    out << "training on " << split.train.size() << " of " << ds.samples.size() << " samples\n";
    if (o.global) {
        TrainResult r = train(split.train, config);
        record("*", r, split.train.size());
        bundle = ParamsBundle::global(std::move(r.params));
    } else {
        for (const std::string& facet : facets_of(ds.samples)) {
            const std::vector<Sample> part = filter_facet(split.train, facet);
            if (part.empty()) throw InvalidArgument("facet '" + facet + "' has no training samples");
            TrainResult r = train(part, config);
            record(facet, r, part.size());
            bundle.set(facet, std::move(r.params));
        }
    }

    save_params(bundle, o.out);
    Dataset held_out{ds.meta, split.eval};
    save_dataset(held_out, eval_out);

    ordered_json summary;
    summary["train_samples"] = split.train.size();
    summary["eval_samples"] = split.eval.size();
    summary["heads"] = std::move(heads);
    write_text(summary_out, summary.dump(2) + "\n");

    Manifest m;
    m.command = "train";
    m.argv = argv;
    m.seed = o.seed;
    m.config = train_config_json(o, config);
    m.inputs = {o.data};
    m.outputs = {o.out, eval_out, summary_out};
    m.write(with_suffix(o.out, ".manifest.json"));

    out << "wrote " << o.out << " and held-out split " << eval_out << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
    std::string data;
    std::string params;
    std::string out_json;
    std::string out_table;
};

void add_eval(CLI::App& app, EvalOptions& o) {
    app.add_option("--data", o.data, "Dataset to evaluate (usually the held-out split)")->required();
    app.add_option("--params", o.params, "Params file from train")->required();
    app.add_option("--out-json", o.out_json, "JSON report path")->required();
    app.add_option("--out-table", o.out_table, "Text table path (default: <out-json>.txt)");
}

void check_dims(const ParamsBundle& bundle, const Dataset& ds) {
    if (bundle.dim() != ds.meta.d) {
        throw DimensionMismatch("params file vs dataset", ds.meta.d, bundle.dim());
    }
}

int cmd_eval(const EvalOptions& o, const std::vector<std::string>& argv, std::ostream& out) {
    const std::string table_out = o.out_table.empty() ? with_suffix(o.out_json, ".txt") : o.out_table;
    const Dataset ds = load_dataset(o.data);
    const ParamsBundle bundle = load_params(o.params);
    check_dims(bundle, ds);

    const EvalReport report = evaluate(bundle, ds.samples);
    write_text(o.out_json, to_json(report).dump(2) + "\n");
    const std::string table = render_summary_table(report) + "\n" + render_facet_table(report);
    write_text(table_out, table);

    Manifest m;
    m.command = "eval";
    m.argv = argv;
    m.config = {{"scope", bundle.is_global() ? "global" : "per-facet"}};
    m.inputs = {o.data, o.params};
    m.outputs = {o.out_json, table_out};
    m.write(with_suffix(o.out_json, ".manifest.json"));

    out << table;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseOptions {
    std::string data;
    std::string params;
    std::string out_dir;
    std::size_t k = 2;
    std::uint64_t seed = 0;
};

void add_diagnose(CLI::App& app, DiagnoseOptions& o) {
    app.add_option("--data", o.data, "Dataset to analyse")->required();
    app.add_option("--params", o.params, "Optional params file; enables s/g dynamics and steered confusion");
    app.add_option("--out-dir", o.out_dir, "Directory for report files")->required();
    app.add_option("--k", o.k, "Number of principal components (>= 2)")->capture_default_str();
    app.add_option("--seed", o.seed, "Seed for power-iteration start vectors")->capture_default_str();
}

std::vector<Label> gold_of(const std::vector<Sample>& s) {
    std::vector<Label> out;
    for (const auto& x : s) out.push_back(x.y);
    return out;
}

std::vector<Label> baseline_of(const std::vector<Sample>& s) {
    std::vector<Label> out;
    for (const auto& x : s) out.push_back(argmax_label(x.z));
    return out;
}

ordered_json collapse_section(const std::vector<Sample>& samples, const ParamsBundle* bundle, std::string& text,
                              const std::string& name) {
    ordered_json j;
    const ConfusionMatrix base = confusion(baseline_of(samples), gold_of(samples));
    j["baseline"] = to_json(base);
    text += render_confusion(base, name + " zero-shot") + "\n";
    if (bundle) {
        std::vector<Label> steered;
        for (const auto& s : samples) steered.push_back(predict(bundle->for_facet(s.facet), s).label);
        const ConfusionMatrix cal = confusion(steered, gold_of(samples));
        j["calibrated"] = to_json(cal);
        text += render_confusion(cal, name + " steered") + "\n";
    }
    return j;
}

int cmd_diagnose(const DiagnoseOptions& o, const std::vector<std::string>& argv, std::ostream& out) {
    if (o.k < 2) throw UsageError("--k must be >= 2");
    const Dataset ds = load_dataset(o.data);
    if (ds.samples.empty()) throw InvalidArgument("dataset '" + o.data + "' has no samples");
    std::optional<ParamsBundle> bundle;
    if (!o.params.empty()) {
        bundle = load_params(o.params);
        check_dims(*bundle, ds);
    }
    const ParamsBundle* bp = bundle ? &*bundle : nullptr;
    const fs::path dir(o.out_dir);
    fs::create_directories(dir);

    ordered_json summary;

    // Confusion / collapse.
    std::string collapse_text;
    ordered_json collapse;
    collapse["ALL"] = collapse_section(ds.samples, bp, collapse_text, "ALL");
    const std::vector<std::string> facets = facets_of(ds.samples);
    for (const auto& facet : facets) collapse[facet] = collapse_section(filter_facet(ds.samples, facet), bp, collapse_text, facet);
    write_text(dir / "collapse.json", collapse.dump(2) + "\n");
    write_text(dir / "collapse.txt", collapse_text);
    summary["collapse_fraction"] = collapse["ALL"]["baseline"]["collapse_fraction"];

    // Geometry per facet.
    std::string proj = "id\tPC1\tPC2\tlabel\tfacet\n";
    std::string geo =
        "facet\tn\tstatus\teig1\teig2\ttotal_variance\tmean_L\tmean_C\tmean_R\tordering_score\t"
        "pc1_std_L\tpc1_std_C\tpc1_std_R\tpc2_std_L\tpc2_std_C\tpc2_std_R\tcenter_tightest\n";
    ordered_json geometry = ordered_json::object();
    for (const auto& facet : facets) {
        const std::vector<Sample> part = filter_facet(ds.samples, facet);
        std::vector<HiddenVector> hs;
        for (const auto& s : part) hs.push_back(s.h);
        const std::vector<Label> labels = gold_of(part);
        ordered_json g;
        g["n"] = part.size();
        try {
            PcaOptions popts;
            popts.seed = o.seed;
            const PcaResult pca = pca_top_k(hs, o.k, popts);
            const OrderingReport ord = ordering_score(pca, labels);
            const CenterBandReport band = center_band_stats(pca, labels);
            for (std::size_t i = 0; i < part.size(); ++i) {
                proj += part[i].id + "\t" + num(pca.projections[i][0]) + "\t" + num(pca.projections[i][1]) + "\t" +
                        std::string(to_string(part[i].y)) + "\t" + facet + "\n";
            }
            const std::string tight = band.center_tightest ? (*band.center_tightest ? "true" : "false") : "n/a";
            geo += facet + "\t" + std::to_string(part.size()) + "\tok\t" + num(pca.eigenvalues[0]) + "\t" +
                   num(pca.eigenvalues[1]) + "\t" + num(pca.total_variance) + "\t" + num(ord.class_means[0]) + "\t" +
                   num(ord.class_means[1]) + "\t" + num(ord.class_means[2]) + "\t" + num(ord.score) + "\t" +
                   num(band.pc1_std[0]) + "\t" + num(band.pc1_std[1]) + "\t" + num(band.pc1_std[2]) + "\t" +
                   num((*band.pc2_std)[0]) + "\t" + num((*band.pc2_std)[1]) + "\t" + num((*band.pc2_std)[2]) + "\t" +
                   tight + "\n";
            g["status"] = "ok";
            g["eigenvalues"] = pca.eigenvalues;
            g["total_variance"] = pca.total_variance;
            g["class_means_pc1"] = ord.class_means;
            g["ordering_score"] = ord.score;
            g["pc1_std"] = band.pc1_std;
            g["pc2_std"] = *band.pc2_std;
            g["center_tightest"] = band.center_tightest ? ordered_json(*band.center_tightest) : ordered_json(nullptr);
        } catch (const std::exception& e) {
            // A facet too small for PCA (or missing a class) is reported, not fatal.
            geo += facet + "\t" + std::to_string(part.size()) + "\tn/a: " + e.what() + std::string(14, '\t') + "\n";
            g["status"] = std::string("n/a: ") + e.what();
        }
        geometry[facet] = std::move(g);
    }
    write_text(dir / "pca_projections.tsv", proj);
    write_text(dir / "geometry.tsv", geo);
    summary["geometry"] = geometry;

    // Group dynamics.
    const GroupDynamics dyn = group_dynamics(bp, ds.samples);
    std::string groups = bp ? "group\tdescription\tcount\tmean_s\tmean_g\n" : "group\tdescription\tcount\n";
    ordered_json gj = ordered_json::object();
    for (Group g : kAllGroups) {
        const GroupStats& st = dyn[g];
        groups += std::string(to_string(g)) + "\t" + std::string(describe(g)) + "\t" + std::to_string(st.count);
        ordered_json e{{"description", describe(g)}, {"count", st.count}};
        if (bp) {
            groups += "\t" + (st.mean_s ? num(*st.mean_s) : std::string("n/a"));
            groups += "\t" + (st.mean_g ? num(*st.mean_g) : std::string("n/a"));
            e["mean_s"] = st.mean_s ? ordered_json(*st.mean_s) : ordered_json(nullptr);
            e["mean_g"] = st.mean_g ? ordered_json(*st.mean_g) : ordered_json(nullptr);
        }
        groups += "\n";
        gj[std::string(to_string(g))] = std::move(e);
    }
    groups += "other\tungrouped (gold, pred) pairs\t" + std::to_string(dyn.other) + (bp ? "\t\t\n" : "\n");
    gj["other"] = dyn.other;
    gj["rule"] = dyn.rule;
    write_text(dir / "groups.tsv", groups);
    summary["groups"] = gj;
    write_text(dir / "diagnose.json", summary.dump(2) + "\n");

    Manifest m;
    m.command = "diagnose";
    m.argv = argv;
    m.seed = o.seed;
    m.config = {{"k", o.k}, {"with_params", bp != nullptr}};
    m.inputs = {o.data};
    if (bp) m.inputs.push_back(o.params);
    for (const char* f : {"collapse.json", "collapse.txt", "pca_projections.tsv", "geometry.tsv", "groups.tsv", "diagnose.json"}) {
        m.outputs.push_back((dir / f).string());
    }
    m.write(dir / "manifest.json");

    out << collapse_text << geo << '\n' << groups;
    return kExitOk;
}

// ---------------------------------------------------------------------------

std::vector<std::string> manifest_argv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest '" + path + "'");
    const nlohmann::json j = nlohmann::json::parse(in);
    std::vector<std::string> argv = j.at("argv").get<std::vector<std::string>>();
    if (argv.empty() || argv.front() == "replay") throw std::runtime_error("manifest '" + path + "' has no replayable command");
    return argv;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dual-probe logit steering: synthesise, train, evaluate and diagnose steering heads", "dualprobe"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    SynthOptions synth_opts;
    TrainOptions train_opts;
    EvalOptions eval_opts;
    DiagnoseOptions diag_opts;
    std::string manifest_path;

    CLI::App* synth = app.add_subcommand("synth", "Generate a planted-structure dataset");
    add_synth(*synth, synth_opts);
    CLI::App* train_cmd = app.add_subcommand("train", "Few-shot split and per-facet head training");
    add_train(*train_cmd, train_opts);
    CLI::App* eval_cmd = app.add_subcommand("eval", "Accuracy / macro-F1 against the zero-shot baseline");
    add_eval(*eval_cmd, eval_opts);
    CLI::App* diag = app.add_subcommand("diagnose", "Collapse, PCA geometry and group dynamics reports");
    add_diagnose(*diag, diag_opts);
    CLI::App* replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
    replay->add_option("--manifest", manifest_path, "Manifest JSON")->required();

    std::vector<std::string> argv_store{"dualprobe"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());

    CLI::App* active = &app;
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
        for (CLI::App* sub : {synth, train_cmd, eval_cmd, diag, replay}) {
            if (sub->parsed()) active = sub;
        }
        if (synth->parsed()) return cmd_synth(synth_opts, args, out);
        if (train_cmd->parsed()) return cmd_train(train_opts, args, out);
        if (eval_cmd->parsed()) return cmd_eval(eval_opts, args, out);
        if (diag->parsed()) return cmd_diagnose(diag_opts, args, out);
        if (replay->parsed()) return run(manifest_argv(manifest_path), out, err);
        return kExitUsage;
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        for (CLI::App* sub : {synth, train_cmd, eval_cmd, diag, replay}) {
            if (sub->parsed()) active = sub;
        }
        err << "error: " << e.what() << "\n\n" << active->help();
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n\n" << active->help();
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace dualprobe::cli
