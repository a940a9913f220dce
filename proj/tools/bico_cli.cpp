#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bico/data_io.hpp"
#include "bico/diagnostics.hpp"
#include "bico/mitweet_convert.hpp"
#include "bico/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct DataOptions {
    std::string schema = bico::default_schema_path().string();
    std::string manifest;
    std::string embeddings;
    std::string val_manifest;
    std::string test_manifest;
    std::string split = "random";
    std::string holdout_topics;
    std::string ratios = "0.8,0.1,0.1";
    double val_ratio = 0.1;
    std::uint64_t split_seed = 0;

    void add_to(CLI::App* app) {
        app->add_option("--schema", schema, "Concept schema JSON")->capture_default_str();
        app->add_option("--manifest", manifest, "Sample manifest (JSON Lines)")->required();
        app->add_option("--embeddings", embeddings, "Embedding binary")->required();
        app->add_option("--val-manifest", val_manifest, "Separate validation manifest (disables --split)");
        app->add_option("--test-manifest", test_manifest, "Separate test manifest (disables --split)");
        app->add_option("--split", split, "Split mode")->check(CLI::IsMember({"random", "topic"}))->capture_default_str();
        app->add_option("--holdout-topics", holdout_topics, "Comma-separated test topics (topic split)");
        app->add_option("--ratios", ratios, "Train,val,test fractions (random split)")->capture_default_str();
        app->add_option("--val-ratio", val_ratio, "Validation fraction of non-holdout samples (topic split)")
            ->capture_default_str();
        app->add_option("--split-seed", split_seed, "Seed of the data split")->capture_default_str();
    }
};

struct Loaded {
    bico::Dataset data;
    bico::Split split;
};

Loaded load_data(const DataOptions& o) {
    bico::SchemaSpec schema = bico::load_schema(o.schema);
    const auto codes = schema.facet_codes();
    auto samples = bico::read_manifest(o.manifest, codes);
    bico::Split split;
    if (!o.val_manifest.empty() || !o.test_manifest.empty()) {
        for (std::size_t i = 0; i < samples.size(); ++i) split.train.push_back(i);
        auto append = [&](const std::string& path, std::vector<std::size_t>& into) {
            if (path.empty()) return;
            auto more = bico::read_manifest(path, codes);
            for (auto& s : more) {
                into.push_back(samples.size());
                samples.push_back(std::move(s));
            }
        };
        append(o.val_manifest, split.val);
        append(o.test_manifest, split.test);
    } else {
        bico::SplitSpec spec;
        spec.seed = o.split_seed;
        if (o.split == "topic") {
            spec.mode = bico::SplitMode::Topic;
            spec.holdout = split_csv(o.holdout_topics);
            spec.val_ratio = o.val_ratio;
        } else {
            const auto parts = split_csv(o.ratios);
            if (parts.size() != 3) throw std::invalid_argument("--ratios needs three comma-separated values");
            for (std::size_t i = 0; i < 3; ++i) spec.ratios[i] = std::stod(parts[i]);
        }
        split = bico::split_dataset(samples, spec);
    }
    auto store = bico::read_embeddings(o.embeddings);
    return {bico::Dataset::assemble(std::move(schema), std::move(samples), std::move(store)), std::move(split)};
}

struct ModelOptions {
    std::string subtask = "ideology";
    std::size_t iters = 0;
    double tau = 0.0;
    double lambda = 0.0;
    std::size_t batch_size = 0;
    double lr = 0.0;
    std::size_t epochs = 0;
    std::size_t hidden = 0;
    std::uint64_t seed = 1;
    bool no_diffusion = false;
    bool no_aggregation = false;
    std::string adapter = "on";
    std::size_t runs = 1;
    std::string out;

    CLI::Option *o_iters{}, *o_tau{}, *o_lambda{}, *o_batch{}, *o_lr{}, *o_epochs{}, *o_hidden{};

    void add_to(CLI::App* app, bool with_runs) {
        app->add_option("--subtask", subtask, "relevance or ideology")
            ->check(CLI::IsMember({"relevance", "ideology"}))
            ->capture_default_str();
        o_iters = app->add_option("--iters", iters, "Concept flow iterations k (default 4 relevance, 2 ideology)");
        o_tau = app->add_option("--tau", tau, "Contrastive temperature (default 0.5 relevance, 0.1 ideology)");
        o_lambda = app->add_option("--lambda", lambda, "Contrastive weight (default 0.3)");
        o_batch = app->add_option("--batch-size", batch_size, "Batch size (default 64)");
        o_lr = app->add_option("--lr", lr, "AdamW learning rate (default 2e-5)");
        o_epochs = app->add_option("--epochs", epochs, "Training epochs (default 30)");
        o_hidden = app->add_option("--hidden", hidden, "Classifier hidden size (default 512)");
        app->add_option("--seed", seed, "Model and shuffling seed")->capture_default_str();
        app->add_flag("--disable-diffusion", no_diffusion, "Turn off root-to-leaf diffusion");
        app->add_flag("--disable-aggregation", no_aggregation, "Turn off leaf-to-root aggregation");
        app->add_option("--adapter", adapter, "Shared affine adapter on text and concept vectors")
            ->check(CLI::IsMember({"on", "off"}))
            ->capture_default_str();
        if (with_runs) {
            app->add_option("--runs", runs, "Independent runs with seeds seed..seed+runs-1")->capture_default_str();
        }
        app->add_option("--out", out, "Output directory");
    }

    bico::TrainConfig config() const {
        auto c = bico::TrainConfig::defaults(*bico::parse_subtask(subtask));
        if (o_iters->count()) c.flow.iterations = iters;
        if (o_tau->count()) c.loss.tau = tau;
        if (o_lambda->count()) c.loss.lambda = lambda;
        if (o_batch->count()) c.batch_size = batch_size;
        if (o_lr->count()) c.optim.lr = lr;
        if (o_epochs->count()) c.epochs = epochs;
        if (o_hidden->count()) c.hidden = hidden;
        c.flow.diffusion = !no_diffusion;
        c.flow.aggregation = !no_aggregation;
        c.adapter = adapter == "on";
        c.seed = seed;
        c.validate();
        return c;
    }
};

json config_json(const bico::TrainConfig& c) {
    return {{"subtask", std::string(bico::subtask_name(c.subtask))},
            {"iters", c.flow.iterations},
            {"diffusion", c.flow.diffusion},
            {"aggregation", c.flow.aggregation},
            {"tau", c.loss.tau},
            {"lambda", c.loss.lambda},
            {"batch_size", c.batch_size},
            {"lr", c.optim.lr},
            {"epochs", c.epochs},
            {"hidden", c.hidden},
            {"adapter", c.adapter},
            {"seed", c.seed}};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw bico::DataError("cannot write " + path.string());
    out << text << '\n';
}

const std::vector<std::size_t>& pick_set(const Loaded& l, const std::string& which, std::vector<std::size_t>& all) {
    if (which == "train") return l.split.train;
    if (which == "val") return l.split.val;
    if (which == "test") return l.split.test;
    all.resize(l.data.samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
}

json summary_stats(const std::vector<bico::MetricsReport>& reports) {
    json mean, stdev;
    auto field = [&](const char* name, auto get) {
        std::vector<double> v;
        for (const auto& r : reports) {
            if (const auto x = get(r)) v.push_back(*x);
        }
        if (v.empty()) return;
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        s = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
        mean[name] = m;
        stdev[name] = s;
    };
    field("macro_f1", [](const bico::MetricsReport& r) { return r.macro_f1; });
    field("micro_f1", [](const bico::MetricsReport& r) { return r.micro_f1; });
    field("macro_acc", [](const bico::MetricsReport& r) { return r.macro_acc; });
    field("micro_acc", [](const bico::MetricsReport& r) { return r.micro_acc; });
    return {{"mean", mean}, {"std", stdev}};
}

int cmd_train(const DataOptions& d, const ModelOptions& m) {
    const auto base = m.config();
    const Loaded l = load_data(d);
    if (!m.out.empty()) fs::create_directories(m.out);
    std::vector<bico::MetricsReport> reports;
    json per_run = json::array();
    for (std::size_t r = 0; r < std::max<std::size_t>(1, m.runs); ++r) {
        auto c = base;
        c.seed = base.seed + r;
        std::ofstream log;
        const std::string suffix = m.runs > 1 ? "-run" + std::to_string(r) : "";
        if (!m.out.empty()) log.open(fs::path(m.out) / ("log" + suffix + ".jsonl"));
        const auto result = bico::train(l.data, l.split, c, [&](const bico::EpochLog& e) {
            std::fprintf(stderr, "[run %zu] epoch %zu/%zu loss %.6f", r, e.epoch, c.epochs, e.train_loss);
            if (e.val_micro_f1) std::fprintf(stderr, " val_micro_f1 %.4f", *e.val_micro_f1);
            std::fprintf(stderr, "\n");
            if (log) {
                json j{{"epoch", e.epoch}, {"train_loss", e.train_loss}};
                j["val_micro_f1"] = e.val_micro_f1 ? json(*e.val_micro_f1) : json(nullptr);
                log << j.dump() << '\n';
            }
        });
        const auto& eval_set = l.split.test.empty() ? l.split.val : l.split.test;
        if (eval_set.empty()) throw std::invalid_argument("no test or validation samples to evaluate on");
        auto report = bico::evaluate(result.best, l.data, eval_set);
        if (!m.out.empty()) {
            bico::save_params(result.best, fs::path(m.out) / ("params" + suffix + ".json"));
            write_text(fs::path(m.out) / ("metrics" + suffix + ".json"), report.to_json());
        }
        json run = json::parse(report.to_json());
        run["seed"] = c.seed;
        run["best_epoch"] = result.best_epoch;
        per_run.push_back(run);
        reports.push_back(std::move(report));
    }
    json out;
    if (reports.size() == 1) {
        out = per_run[0];
    } else {
        out = summary_stats(reports);
        out["runs"] = per_run;
    }
    out["config"] = config_json(base);
    std::cout << out.dump(2) << '\n';
    if (!m.out.empty() && reports.size() > 1) write_text(fs::path(m.out) / "summary.json", out.dump(2));
    return 0;
}

int cmd_eval(const DataOptions& d, const std::string& params_path, const std::string& which, const std::string& out) {
    const auto params = bico::load_params(params_path);
    const Loaded l = load_data(d);
    std::vector<std::size_t> all;
    const auto report = bico::evaluate(params, l.data, pick_set(l, which, all));
    std::cout << report.to_json() << '\n';
    if (!out.empty()) {
        fs::create_directories(out);
        write_text(fs::path(out) / "metrics.json", report.to_json());
    }
    return 0;
}

int cmd_gradcheck(const std::string& subtask, std::size_t dim, std::size_t hidden, double h, double tol,
                  std::uint64_t seed, bool exhaustive) {
    bico::GradCheckProblem p;
    p.subtask = *bico::parse_subtask(subtask);
    p.dim = dim;
    p.hidden = hidden;
    p.seed = seed;
    bico::GradCheckOptions o;
    o.step = h;
    o.tolerance = tol;
    if (exhaustive) o.exhaustive_limit = static_cast<std::size_t>(-1);
    const auto r = bico::check_loss_gradients(p, o);
    json j{{"subtask", subtask},
           {"dim", dim},
           {"h", h},
           {"tolerance", tol},
           {"coordinates_checked", r.coordinates_checked},
           {"max_rel_error", r.max_rel_error},
           {"worst_group", r.worst_group},
           {"worst_index", r.worst_index},
           {"worst_analytic", r.worst_analytic},
           {"worst_numeric", r.worst_numeric},
           {"passed", r.passed}};
    std::cout << j.dump(2) << '\n';
    std::cout << (r.passed ? "PASS" : "FAIL") << " max relative error " << r.max_rel_error << " (tol " << tol << ")\n";
    return r.passed ? 0 : kExitNumeric;
}

int cmd_synth(const bico::SynthConfig& c, const std::string& schema_path, const std::string& out) {
    const auto schema = bico::load_schema(schema_path);
    const auto data = bico::synth_generate(schema.facet_codes(), c);
    fs::create_directories(out);
    bico::write_manifest(fs::path(out) / "manifest.jsonl", data.samples, schema.facet_codes());
    bico::write_embeddings(fs::path(out) / "embeddings.bin", data.store);
    std::cout << json{{"samples", data.samples.size()}, {"records", data.store.size()}, {"dim", c.dim}}.dump() << '\n';
    return 0;
}

int cmd_sweep(const DataOptions& d, ModelOptions& m, std::size_t kmin, std::size_t kmax) {
    if (kmin > kmax) throw std::invalid_argument("--min must not exceed --max");
    const Loaded l = load_data(d);
    const auto base = m.config();
    const auto& eval_set = l.split.test.empty() ? l.split.val : l.split.test;
    if (eval_set.empty()) throw std::invalid_argument("no test or validation samples to evaluate on");
    json rows = json::array();
    for (std::size_t k = kmin; k <= kmax; ++k) {
        auto c = base;
        c.flow.iterations = k;
        const auto result = bico::train(l.data, l.split, c);
        const auto report = bico::evaluate(result.best, l.data, eval_set);
        json row{{"iters", k}};
        row["macro_f1"] = report.macro_f1 ? json(*report.macro_f1) : json(nullptr);
        row["micro_f1"] = report.micro_f1 ? json(*report.micro_f1) : json(nullptr);
        std::cout << row.dump() << '\n';
        rows.push_back(row);
    }
    if (!m.out.empty()) {
        fs::create_directories(m.out);
        write_text(fs::path(m.out) / "sweep.json", rows.dump(2));
    }
    return 0;
}

int cmd_export(const DataOptions& d, const std::string& params_path, const std::string& facet,
               const std::string& which, const std::string& out) {
    const auto params = bico::load_params(params_path);
    const Loaded l = load_data(d);
    std::vector<std::size_t> all;
    const auto reps = bico::export_representations(params, l.data, pick_set(l, which, all), facet);
    bico::write_representations(reps, out);
    std::cout << json{{"facet", facet}, {"texts", reps.ids.size()}, {"rows", reps.ids.size() + 3}}.dump() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multifaceted ideology detection with concept-semantics flow"};
    app.require_subcommand(1);

    DataOptions data;
    ModelOptions model;

    auto* train = app.add_subcommand("train", "Train a relevance or ideology model");
    data.add_to(train);
    model.add_to(train, true);

    std::string params_path, eval_set = "test", eval_out;
    auto* eval = app.add_subcommand("eval", "Evaluate saved parameters");
    DataOptions eval_data;
    eval_data.add_to(eval);
    eval->add_option("--params", params_path, "Parameter file from train")->required();
    eval->add_option("--eval-set", eval_set, "Which split to score")
        ->check(CLI::IsMember({"test", "val", "train", "all"}))
        ->capture_default_str();
    eval->add_option("--out", eval_out, "Output directory");

    std::string gc_subtask = "ideology";
    std::size_t gc_dim = 8, gc_hidden = 16;
    double gc_h = 1e-5, gc_tol = 1e-4;
    std::uint64_t gc_seed = 11;
    bool gc_exhaustive = false;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the training loss");
    gradcheck->set_help_flag("--help", "Print this help message and exit");
    gradcheck->add_option("--subtask", gc_subtask)->check(CLI::IsMember({"relevance", "ideology"}))->capture_default_str();
    gradcheck->add_option("--dim", gc_dim, "Embedding dimension (even)")->capture_default_str();
    gradcheck->add_option("--hidden", gc_hidden, "Classifier hidden size")->capture_default_str();
    gradcheck->add_option("--h", gc_h, "Central-difference step")->capture_default_str();
    gradcheck->add_option("--tol", gc_tol, "Maximum relative error")->capture_default_str();
    gradcheck->add_option("--seed", gc_seed)->capture_default_str();
    gradcheck->add_flag("--exhaustive", gc_exhaustive, "Check every coordinate instead of a sample");

    bico::SynthConfig sc;
    std::string synth_out, synth_schema = bico::default_schema_path().string();
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    synth->add_option("--n", sc.n_per_class, "Samples per facet and class")->capture_default_str();
    synth->add_option("--dim", sc.dim, "Embedding dimension (even)")->capture_default_str();
    synth->add_option("--sigma", sc.sigma, "Noise standard deviation")->capture_default_str();
    synth->add_option("--seed", sc.seed)->capture_default_str();
    synth->add_option("--tokens", sc.token_rows, "Token rows per relevance record")->capture_default_str();
    synth->add_option("--topics", sc.topics, "Number of topics")->capture_default_str();
    synth->add_option("--schema", synth_schema)->capture_default_str();
    synth->add_option("--out", synth_out, "Output directory")->required();

    std::size_t kmin = 1, kmax = 6;
    DataOptions sweep_data;
    ModelOptions sweep_model;
    auto* sweep = app.add_subcommand("sweep-iters", "Train once per iteration count and report test metrics");
    sweep_data.add_to(sweep);
    sweep_model.add_to(sweep, false);
    sweep->add_option("--min", kmin)->capture_default_str();
    sweep->add_option("--max", kmax)->capture_default_str();

    std::string facet, reps_params, reps_out, reps_set = "test";
    DataOptions reps_data;
    auto* reps = app.add_subcommand("export-reps", "Write one facet's text representations and concept anchors");
    reps_data.add_to(reps);
    reps->add_option("--params", reps_params, "Ideology parameter file")->required();
    reps->add_option("--facet", facet, "Facet code")->required();
    reps->add_option("--eval-set", reps_set)->check(CLI::IsMember({"test", "val", "train", "all"}))->capture_default_str();
    reps->add_option("--out", reps_out, "Output prefix (.bin and .json are appended)")->required();

    std::string conv_in, conv_out, conv_schema = bico::default_schema_path().string();
    auto* convert = app.add_subcommand("convert-mitweet", "Convert MITweet CSV files to manifests");
    convert->add_option("--in", conv_in, "Directory with train/val/test CSV files")->required();
    convert->add_option("--out", conv_out, "Output directory")->required();
    convert->add_option("--schema", conv_schema)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*train) return cmd_train(data, model);
        if (*eval) return cmd_eval(eval_data, params_path, eval_set, eval_out);
        if (*gradcheck) return cmd_gradcheck(gc_subtask, gc_dim, gc_hidden, gc_h, gc_tol, gc_seed, gc_exhaustive);
        if (*synth) return cmd_synth(sc, synth_schema, synth_out);
        if (*sweep) return cmd_sweep(sweep_data, sweep_model, kmin, kmax);
        if (*reps) return cmd_export(reps_data, reps_params, facet, reps_set, reps_out);
        if (*convert) {
            const auto summary =
                bico::convert_mitweet(conv_in, conv_out, bico::load_schema(conv_schema).facet_codes());
            std::cout << json{{"train", summary.train}, {"val", summary.val}, {"test", summary.test},
                              {"total", summary.total()}}
                             .dump()
                      << '\n';
            return 0;
        }
    } catch (const bico::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const bico::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitUsage;
}
