#include "sagc/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "numfmt.hpp"
#include "sagc/evaluation.hpp"
#include "sagc/features.hpp"
#include "sagc/graph.hpp"

namespace sagc::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::IoFailure:
        case ErrorKind::CorruptPayload:
        case ErrorKind::VersionMismatch:
        case ErrorKind::InvalidArgument:
            return kIoOrUsage;
        case ErrorKind::NumericalFault:
        case ErrorKind::NonFiniteLoss:
        case ErrorKind::NonConvergence:
            return kNumerical;
        default:
            return kDomainFailure;
    }
}

fs::path default_out_dir() {
    if (const char* env = std::getenv("SAGC_OUT"); env != nullptr && *env != '\0') return env;
    return "sagc_out";
}

fs::path checkpoint_path(const RunConfig& cfg) {
    if (!cfg.checkpoint.empty()) return cfg.checkpoint;
    const fs::path out = cfg.out_dir.empty() ? default_out_dir() : cfg.out_dir;
    return out / "checkpoint.sagc";
}

fs::path split_manifest_path(const RunConfig& cfg) {
    if (!cfg.split_manifest.empty()) return cfg.split_manifest;
    return checkpoint_path(cfg).parent_path() / "split.json";
}

namespace {

fs::path out_dir(const RunConfig& cfg) { return cfg.out_dir.empty() ? default_out_dir() : cfg.out_dir; }

void ensure_dir(const fs::path& dir) {
    if (dir.empty()) return;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    ensure_dir(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    f << text;
    if (!f) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

std::string file_stem(const std::string& graph_name) {
    std::string s = graph_name;
    std::replace_if(s.begin(), s.end(), [](char c) { return c == '/' || c == '\\' || c == ':'; }, '_');
    return s;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Featurized graphs are cached under a key derived from the canonical graph
// document, so edited inputs never hit a stale entry.
FeaturizedGraph featurize_cached(const SpaceAccessGraph& g, const std::optional<fs::path>& cache) {
    if (!cache) return featurize(g);
    char key[17];
    std::snprintf(key, sizeof key, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(g).dump())));
    const fs::path entry = *cache / (file_stem(g.name) + "." + key + ".json");
    std::error_code ec;
    if (fs::is_regular_file(entry, ec)) {
        try {
            return featurized_from_json(read_text(entry));
        } catch (const Error&) {
            // unreadable entries are rebuilt below
        }
    }
    auto fg = featurize(g);
    write_text(entry, featurized_to_json(fg));
    return fg;
}

std::vector<FeaturizedGraph> featurize_all(std::span<const SpaceAccessGraph> graphs,
                                           const std::optional<fs::path>& cache) {
    std::vector<FeaturizedGraph> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) out.push_back(featurize_cached(g, cache));
    return out;
}

Dataset require_dataset(const RunConfig& cfg, bool require_labels) {
    if (cfg.dataset.empty()) throw Error(ErrorKind::InvalidArgument, "--dataset is required");
    ParseOptions opts;
    opts.require_labels = require_labels;
    return load_dataset(cfg.dataset, opts);
}

std::vector<SpaceAccessGraph> select(const Dataset& ds, const std::vector<std::string>& names) {
    std::map<std::string, const SpaceAccessGraph*> by_name;
    for (const auto& g : ds.graphs) by_name[g.name] = &g;
    std::vector<SpaceAccessGraph> out;
    for (const auto& n : names) {
        auto it = by_name.find(n);
        if (it == by_name.end()) {
            throw Error(ErrorKind::MissingField, "split manifest names graph '" + n + "' which is not in the dataset");
        }
        out.push_back(*it->second);
    }
    return out;
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const fs::filesystem_error& e) {
        err << "error: IoFailure: " << e.what() << "\n";
        return kIoOrUsage;
    }
}

}  // namespace

int cmd_validate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (cfg.dataset.empty()) throw Error(ErrorKind::InvalidArgument, "--dataset is required");
        std::error_code ec;
        std::vector<fs::path> files;
        if (fs::is_regular_file(cfg.dataset, ec)) {
            files.push_back(cfg.dataset);
        } else if (fs::is_directory(cfg.dataset, ec)) {
            for (const auto& entry : fs::directory_iterator(cfg.dataset)) {
                if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end());
        } else {
            throw Error(ErrorKind::IoFailure, "no such file or directory: " + cfg.dataset.string());
        }
        if (files.empty()) throw Error(ErrorKind::EmptyDirectory, "no graph documents in " + cfg.dataset.string());

        std::size_t bad = 0;
        std::set<std::string> names;
        for (const auto& f : files) {
            const std::string fname = f.filename().string();
            std::vector<std::string> warnings;
            SpaceAccessGraph g;
            try {
                g = read_graph_file(f, {}, &warnings);
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::IoFailure) throw;
                out << fname << ": " << e.what() << "\n";
                ++bad;
                continue;
            }
            for (const auto& w : warnings) err << fname << ": warning: " << w << "\n";
            const auto report = validate_graph(g);
            for (const auto& finding : report.findings) {
                out << fname << ": " << to_string(finding.kind) << " " << finding.subject << ": " << finding.message
                    << "\n";
            }
            if (!names.insert(g.name).second) {
                out << fname << ": DuplicateId: graph name '" << g.name << "' already used\n";
                ++bad;
            } else if (!report.ok()) {
                ++bad;
            }
        }
        if (bad == 0) {
            out << files.size() << " graphs OK\n";
            return static_cast<int>(kOk);
        }
        out << bad << " of " << files.size() << " graphs failed validation\n";
        return static_cast<int>(kDomainFailure);
    });
}

int cmd_featurize(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto ds = require_dataset(cfg, false);
        const fs::path dir = out_dir(cfg) / "features";
        ensure_dir(dir);
        std::size_t nodes = 0, edges = 0;
        for (const auto& g : ds.graphs) {
            const auto fg = featurize_cached(g, cfg.cache_dir);
            write_text(dir / (file_stem(g.name) + ".json"), featurized_to_json(fg));
            nodes += fg.node_count();
            edges += fg.edge_count();
        }
        err << "wrote " << ds.graphs.size() << " feature files to " << dir.string() << "\n";
        out << "featurized " << ds.graphs.size() << " graphs: " << nodes << " nodes x " << kNodeFeatureDim
            << " features, " << edges << " edges x " << kEdgeFeatureDim << " features\n";
        return static_cast<int>(kOk);
    });
}

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!cfg.seed) throw Error(ErrorKind::InvalidArgument, "--seed is required for training");
        TrainConfig tc = cfg.train;
        tc.seed = *cfg.seed;
        tc.check();
        const auto ds = require_dataset(cfg, true);
        const auto split = split_dataset(ds, tc.split_ratio, tc.seed);
        const auto train_graphs = select(ds, split.train);
        const auto features = featurize_all(train_graphs, cfg.cache_dir);
        err << "training on " << split.train.size() << " graphs, holding out " << split.test.size() << "\n";

        const int every = std::max(1, cfg.log_every);
        auto progress = [&](const TrainProgress& p) {
            if (p.epoch % every == 0 || p.epoch == tc.epochs) {
                err << "epoch " << p.epoch << "/" << tc.epochs << " loss " << detail::fmt17(p.loss) << " best "
                    << detail::fmt17(p.best_loss) << "\n";
            }
        };
        const auto result = train(features, tc, ModelConfig::standard(), progress);

        const fs::path ckpt = checkpoint_path(cfg);
        ensure_dir(ckpt.parent_path());
        save_checkpoint(result.checkpoint, ckpt);
        json manifest = to_json(split);
        manifest["dataset"] = ds.source;
        manifest["checkpoint"] = ckpt.filename().string();
        write_text(split_manifest_path(cfg), manifest.dump(2) + "\n");
        const fs::path trace = ckpt.parent_path() / "loss_trace.csv";
        write_text(trace, loss_trace_csv(result.loss_trace));

        out << "trained " << tc.epochs << " epochs on " << split.train.size() << " graphs; best loss "
            << detail::fmt17(result.checkpoint.best_loss) << " at epoch " << result.checkpoint.best_epoch
            << "; checkpoint " << ckpt.string() << "\n";
        return static_cast<int>(kOk);
    });
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const fs::path ckpt_path = checkpoint_path(cfg);
        const fs::path manifest_path = split_manifest_path(cfg);
        std::error_code ec;
        if (!fs::is_regular_file(ckpt_path, ec)) throw Error(ErrorKind::IoFailure, "missing checkpoint " + ckpt_path.string());
        if (!fs::is_regular_file(manifest_path, ec)) {
            throw Error(ErrorKind::IoFailure, "missing split manifest " + manifest_path.string());
        }
        const auto ckpt = load_checkpoint(ckpt_path);
        json manifest_doc;
        try {
            manifest_doc = json::parse(read_text(manifest_path));
        } catch (const json::parse_error& e) {
            throw Error(ErrorKind::MalformedDocument, manifest_path.string() + ": " + e.what());
        }
        const auto split = split_from_json(manifest_doc);
        if (split.train != ckpt.train_graphs) {
            throw Error(ErrorKind::DimensionMismatch, "split manifest training graphs do not match the checkpoint");
        }
        const auto ds = require_dataset(cfg, true);
        const auto train_graphs = select(ds, split.train);
        const std::string which = cfg.evaluate_train_split ? "train" : "test";
        const auto eval_graphs = cfg.evaluate_train_split ? train_graphs : select(ds, split.test);

        ClassTally train_counts{};
        for (const auto& g : train_graphs) {
            const auto c = class_counts(g);
            for (std::size_t i = 0; i < train_counts.size(); ++i) train_counts[i] += c.per_class[i];
        }
        const auto features = featurize_all(eval_graphs, cfg.cache_dir);
        const auto report = evaluate(ckpt, features, train_counts, which);

        const fs::path dir = out_dir(cfg);
        write_text(dir / ("report_" + which + ".json"), to_json(report).dump(2) + "\n");
        const std::string table = report_table(report);
        write_text(dir / ("report_" + which + ".txt"), table);
        write_text(dir / ("confusion_" + which + ".csv"), confusion_csv(report.confusion));
        write_text(dir / ("confusion_" + which + "_percent.csv"), normalized_confusion_csv(report.confusion));
        err << table;
        out << "evaluated " << which << " split (" << report.graphs.size() << " graphs, " << report.total_support
            << " nodes): weighted precision " << detail::fmt17(report.weighted_precision) << " recall "
            << detail::fmt17(report.weighted_recall) << " f1 " << detail::fmt17(report.weighted_f1) << "\n";
        return static_cast<int>(kOk);
    });
}

int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (cfg.graph_file.empty()) throw Error(ErrorKind::InvalidArgument, "--graph is required");
        const auto ckpt = load_checkpoint(checkpoint_path(cfg));
        ParseOptions opts;
        opts.require_labels = false;
        SpaceAccessGraph g;
        try {
            g = read_graph_file(cfg.graph_file, opts);
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
            return static_cast<int>(kIoOrUsage);
        }
        auto fg = featurize(g);
        std::fill(fg.labels.begin(), fg.labels.end(), kUnlabeled);
        const auto pred = predict(ckpt, fg);
        for (std::size_t i = 0; i < fg.node_count(); ++i) {
            const int c = pred.predicted[i];
            out << fg.node_ids[i] << "\t" << label(c).name << "\t"
                << detail::fmt17(pred.probabilities(i, static_cast<std::size_t>(c))) << "\n";
        }
        return static_cast<int>(kOk);
    });
}

int cmd_export_embeddings(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto ckpt = load_checkpoint(checkpoint_path(cfg));
        const auto ds = require_dataset(cfg, false);
        const auto features = featurize_all(ds.graphs, cfg.cache_dir);
        const fs::path path = out_dir(cfg) / "embeddings.csv";
        ensure_dir(path.parent_path());
        const auto rows = export_embeddings(ckpt, features, path);
        out << "exported " << rows << " embeddings of width " << ckpt.model_config.penultimate_width() << " to "
            << path.string() << "\n";
        return static_cast<int>(kOk);
    });
}

int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (cfg.synth_count < 1 || cfg.synth_spaces < 1) {
            throw Error(ErrorKind::InvalidArgument, "--count and --spaces must be >= 1");
        }
        const fs::path dir = out_dir(cfg);
        ensure_dir(dir);
        const std::uint64_t seed = cfg.seed.value_or(0);
        for (int i = 0; i < cfg.synth_count; ++i) {
            auto g = synth_fixture(seed + static_cast<std::uint64_t>(i), cfg.synth_spaces);
            write_graph_file(g, dir / (file_stem(g.name) + ".json"));
        }
        out << "wrote " << cfg.synth_count << " synthetic graphs to " << dir.string() << "\n";
        return static_cast<int>(kOk);
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Space access graph classification"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string dataset, out_path, checkpoint, manifest, graph, cache;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--dataset", dataset, "Directory of graph JSON documents");
        sub->add_option("--out", out_path, "Output directory (default $SAGC_OUT or ./sagc_out)");
        sub->add_option("--cache", cache, "Cache directory for featurized graphs");
    };
    auto add_checkpoint = [&](CLI::App* sub) {
        sub->add_option("--checkpoint", checkpoint, "Checkpoint file");
        sub->add_option("--split-manifest", manifest, "Split manifest JSON");
    };

    auto* validate = app.add_subcommand("validate", "Check graph documents for structural and geometric errors");
    validate->add_option("--dataset", dataset, "Directory or single graph file")->required();

    auto* featurize_cmd = app.add_subcommand("featurize", "Write node and edge feature matrices");
    add_common(featurize_cmd);

    auto* train_cmd = app.add_subcommand("train", "Split, standardize and train");
    add_common(train_cmd);
    add_checkpoint(train_cmd);
    train_cmd->add_option("--seed", seed, "Seed for split and initialization")->required();
    train_cmd->add_option("--split-ratio", cfg.train.split_ratio, "Fraction of graphs used for training");
    train_cmd->add_option("--lr", cfg.train.learning_rate, "Adam learning rate");
    train_cmd->add_option("--epochs", cfg.train.epochs, "Number of full-batch epochs");
    train_cmd->add_option("--gamma", cfg.train.gamma, "Focal loss focusing parameter");
    bool no_weights = false;
    train_cmd->add_flag("--no-class-weights", no_weights, "Use unit class weights");
    train_cmd->add_option("--log-every", cfg.log_every, "Progress interval in epochs");

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a checkpoint on its held-out split");
    add_common(evaluate_cmd);
    add_checkpoint(evaluate_cmd);
    evaluate_cmd->add_flag("--train-split", cfg.evaluate_train_split, "Evaluate the training split instead");

    auto* predict_cmd = app.add_subcommand("predict", "Classify every node of one graph");
    predict_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file");
    predict_cmd->add_option("--out", out_path, "Output directory holding the default checkpoint");
    predict_cmd->add_option("--graph", graph, "Graph JSON document")->required();

    auto* export_cmd = app.add_subcommand("export-embeddings", "Write penultimate-layer node embeddings");
    add_common(export_cmd);
    export_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file");

    auto* synth_cmd = app.add_subcommand("synth", "Write synthetic labelled floor graphs");
    synth_cmd->add_option("--out", out_path, "Output directory");
    synth_cmd->add_option("--seed", seed, "First seed");
    synth_cmd->add_option("--count", cfg.synth_count, "Number of graphs");
    synth_cmd->add_option("--spaces", cfg.synth_spaces, "Spaces per graph");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? static_cast<int>(kOk) : static_cast<int>(kIoOrUsage);
    }

    cfg.dataset = dataset;
    cfg.out_dir = out_path;
    cfg.checkpoint = checkpoint;
    cfg.split_manifest = manifest;
    cfg.graph_file = graph;
    if (!cache.empty()) cfg.cache_dir = fs::path(cache);
    if (train_cmd->parsed() || synth_cmd->count("--seed") > 0) cfg.seed = seed;
    cfg.train.use_class_weights = !no_weights;

    if (validate->parsed()) return cmd_validate(cfg, out, err);
    if (featurize_cmd->parsed()) return cmd_featurize(cfg, out, err);
    if (train_cmd->parsed()) return cmd_train(cfg, out, err);
    if (evaluate_cmd->parsed()) return cmd_evaluate(cfg, out, err);
    if (predict_cmd->parsed()) return cmd_predict(cfg, out, err);
    if (export_cmd->parsed()) return cmd_export_embeddings(cfg, out, err);
    return cmd_synth(cfg, out, err);
}

}  // namespace sagc::cli
