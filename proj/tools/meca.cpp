// meca: command-line front end. One experiment per process; every
// subcommand reads --config and then applies per-key overrides.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>

#include "meca/checkpoint.hpp"
#include "meca/errors.hpp"
#include "meca/experiment.hpp"

namespace fs = std::filesystem;
using namespace meca;
using namespace meca::eval;

namespace {

struct Options {
    std::string config;
    std::map<std::string, std::string> overrides;
    std::string checkpoint;
    bool relearn = false;
};

void add_config_options(CLI::App* sub, Options& opts) {
    sub->add_option("--config", opts.config, "run configuration file")->check(CLI::ExistingFile);
    for (const auto& k : config_keys()) {
        sub->add_option_function<std::string>(
            "--" + k.name, [&opts, name = k.name](const std::string& v) { opts.overrides[name] = v; }, k.help);
    }
}

RunConfig resolve(const Options& opts) {
    RunConfig cfg = opts.config.empty() ? RunConfig{} : load_config(opts.config);
    for (const auto& [key, value] : opts.overrides) set_key(cfg, key, value);
    finalize(cfg);
    return cfg;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw RuntimeFailure("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nn::ParamSet load_compatible(const fs::path& path, const nn::ModelSpec& spec) {
    nn::ParamSet params = nn::load_checkpoint(path);
    const nn::ParamSet expected = nn::zero_params(spec);
    bool ok = params.names == expected.names;
    for (std::size_t i = 0; ok && i < params.values.size(); ++i) ok = params.values[i].dims() == expected.values[i].dims();
    if (!ok) throw ConfigError(path.string() + " does not match the configured model");
    return params;
}

void print_metrics(const std::string& label, const Metrics& m) {
    std::printf("%-10s acc=%.4f asr=%.4f defense_success=%s\n", label.c_str(), m.acc, m.asr,
                m.defense_success ? "yes" : "no");
}

int cmd_gen_data(const Options& opts) {
    const RunConfig cfg = resolve(opts);
    const fs::path out(cfg.out);
    fs::create_directories(out / "data");
    data::save_dataset(out / "data" / "train.manifest", load_split(cfg, data::Split::train));
    data::save_dataset(out / "data" / "test.manifest", load_split(cfg, data::Split::test));
    write_file(out / "config.txt", echo(cfg));
    std::printf("wrote %s\n", (out / "data").string().c_str());
    return 0;
}

int cmd_poison(const Options& opts) {
    RunConfig cfg = resolve(opts);
    if (cfg.attack == "none") throw ConfigError("attack = none: nothing to poison");
    const Prepared prep = prepare(cfg);
    const fs::path out(cfg.out);
    fs::create_directories(out / "data");
    data::save_dataset(out / "data" / "train.manifest", prep.train);
    data::save_dataset(out / "data" / "test.manifest", prep.test);
    data::save_dataset(out / "data" / "asr.manifest", prep.asr_set);
    write_file(out / "config.txt", echo(cfg));
    std::size_t payload = 0, cover = 0;
    for (const auto& s : prep.train.samples) {
        payload += s.provenance == data::Provenance::poison_payload;
        cover += s.provenance == data::Provenance::poison_cover;
    }
    std::printf("poisoned %zu of %zu samples (%zu payload, %zu cover) -> %s\n", payload + cover, prep.train.size(),
                payload, cover, (out / "data").string().c_str());
    return 0;
}

int cmd_train(const Options& opts) {
    const RunConfig cfg = resolve(opts);
    const Prepared prep = prepare(cfg);
    const TrainResult res = train_undefended(cfg, prep);
    const fs::path out(cfg.out);
    fs::create_directories(out / "checkpoints");
    write_file(out / "config.txt", echo(cfg));
    write_metrics_csv(out / "metrics.csv", res.rows);
    nn::save_checkpoint(out / "checkpoints" / "undefended.ckpt", res.params);
    const nlohmann::json report = {{"attack", cfg.attack},
                                   {"config_hash", config_hash(cfg)},
                                   {"seed", cfg.seed},
                                   {"acc", res.metrics.acc},
                                   {"asr", res.metrics.asr},
                                   {"defense_success", res.metrics.defense_success}};
    write_file(out / "report.json", report.dump(2) + "\n");
    print_metrics("undefended", res.metrics);
    return 0;
}

int cmd_defend(const Options& opts) {
    const RunConfig cfg = resolve(opts);
    const Prepared prep = prepare(cfg);
    const DefenseOutcome o = run_defense(cfg, prep, opts.relearn, cfg.out);
    print_metrics("before", o.before);
    print_metrics("enhanced", o.enhanced);
    print_metrics("clean", o.clean);
    if (o.relearn) print_metrics("relearn", *o.relearn);
    std::printf("extracted %zu samples (%zu payload); precision=%.4f recall=%.4f f1=%.4f\n", o.extracted.size(),
                o.extracted_payload, o.detection.precision, o.detection.recall, o.detection.f1);
    std::printf("run directory: %s\n", cfg.out.c_str());
    return 0;
}

int cmd_eval(const Options& opts) {
    if (opts.checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
    const RunConfig cfg = resolve(opts);
    const Prepared prep = prepare(cfg);
    const nn::ParamSet params = load_compatible(opts.checkpoint, prep.spec);
    const Metrics m = make_metrics(compute_acc(prep.spec, params, data::untrusted_view(prep.test)),
                                   compute_asr(prep.spec, params, data::untrusted_view(prep.asr_set), prep.trigger.target));
    print_metrics("eval", m);
    return 0;
}

int cmd_kl_hist(const Options& opts) {
    const RunConfig cfg = resolve(opts);
    const Prepared prep = prepare(cfg);
    const nn::ParamSet params = opts.checkpoint.empty() ? train_undefended(cfg, prep).params
                                                        : load_compatible(opts.checkpoint, prep.spec);
    const Separability s = separability(cfg, prep, params);
    const fs::path dir = fs::path(cfg.out) / "scores";
    fs::create_directories(dir);
    export_histogram(s.outcome, prep.train, dir / "kl_scores.csv", dir / "kl_hist.csv");
    std::printf("auc=%.4f median_clean=%.6g median_poison=%.6g\nwrote %s\n", s.auc, s.median_clean, s.median_poison,
                dir.string().c_str());
    return 0;
}

int cmd_kernel_check(const Options& opts) {
    const RunConfig cfg = resolve(opts);
    const auto rows = run_kernel_check(cfg);
    const fs::path path = fs::path(cfg.out) / "kernel_check.csv";
    fs::create_directories(path.parent_path());
    kernel::write_oracle_csv(path, rows);
    std::cout << read_file(path);
    return 0;
}

int cmd_report(const Options& opts) {
    const RunConfig cfg = resolve(opts);
    const fs::path dir(cfg.out);
    const auto rows = read_metrics_csv(dir / "metrics.csv");
    nlohmann::json report;
    try {
        report = nlohmann::json::parse(read_file(dir / "report.json"));
    } catch (const nlohmann::json::exception& e) {
        throw LoadError((dir / "report.json").string() + ": " + e.what());
    }
    std::printf("%-6s %-8s %-8s %-8s %-8s %s\n", "epoch", "phase", "acc", "asr", "n_clean", "p");
    for (const auto& r : rows) {
        std::printf("%-6zu %-8s %-8.4f %-8.4f %-8zu %s\n", r.epoch, r.phase.c_str(), r.acc, r.asr, r.n_clean,
                    r.p ? format_double(*r.p).c_str() : "");
    }
    std::printf("%s", report.dump(2).c_str());
    std::printf("\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MeCa backdoor-defense experiments"};
    app.require_subcommand(1);
    Options opts;

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const Options&);
    };
    const Command commands[] = {
        {"gen-data", "write the configured clean train/test split as manifests", cmd_gen_data},
        {"poison", "poison the training split and write manifests", cmd_poison},
        {"train", "train the undefended baseline", cmd_train},
        {"defend", "run backdoor enhancement, extraction and clean training", cmd_defend},
        {"eval", "evaluate a checkpoint", cmd_eval},
        {"kl-hist", "score the training set and write KL histograms", cmd_kl_hist},
        {"kernel-check", "run the RBF kernel oracle over poison ratios", cmd_kernel_check},
        {"report", "print metrics.csv and report.json of a run directory", cmd_report},
    };
    std::map<CLI::App*, int (*)(const Options&)> dispatch;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_config_options(sub, opts);
        dispatch[sub] = c.run;
        if (std::string(c.name) == "defend") sub->add_flag("--relearn", opts.relearn, "also relabel and relearn");
        if (std::string(c.name) == "eval" || std::string(c.name) == "kl-hist") {
            sub->add_option("--checkpoint", opts.checkpoint, "model checkpoint")->check(CLI::ExistingFile);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return 1;
    }

    try {
        for (const auto& [sub, run] : dispatch) {
            if (sub->parsed()) return run(opts);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
