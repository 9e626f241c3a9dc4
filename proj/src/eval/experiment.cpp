#include "meca/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "meca/checkpoint.hpp"
#include "meca/errors.hpp"
#include "meca/loaders.hpp"
#include "meca/train.hpp"

namespace meca::eval {

namespace fs = std::filesystem;
using data::LabeledDataset;
using data::Split;

LabeledDataset load_split(const RunConfig& cfg, Split split) {
    const fs::path root(cfg.data_dir);
    const bool train = split == Split::train;
    const std::size_t per_class = train ? cfg.train_per_class : cfg.test_per_class;
    if (cfg.dataset == "mnist") {
        const std::string stem = train ? "train" : "test";
        auto ds = data::load_idx(root / "mnist-5k" / (stem + "-images-idx3-ubyte"),
                                 root / "mnist-5k" / (stem + "-labels-idx1-ubyte"), split);
        return data::subsample(ds, per_class, cfg.subsample_seed);
    }
    if (cfg.dataset == "cifar") {
        return data::subsample(data::load_cifar_bin(root / "cifar-10-batches-bin", split), per_class,
                               cfg.subsample_seed);
    }
    if (cfg.dataset == "synthetic") {
        const Shape shape{cfg.synth_channels, cfg.synth_side, cfg.synth_side};
        auto ds = data::gen_synthetic(cfg.synth_classes, per_class, shape,
                                      train ? cfg.subsample_seed : cfg.subsample_seed + 0x9e3779b9ULL);
        ds.split = split;
        return ds;
    }
    auto ds = data::load_dataset(train ? cfg.train_manifest : cfg.test_manifest);
    if (ds.split != split) throw ConfigError("manifest split is " + data::to_string(ds.split) + ", expected " + data::to_string(split));
    return ds;
}

attacks::TriggerSpec make_trigger(const RunConfig& cfg, const Shape& shape) {
    const std::string& a = cfg.attack;
    if (a == "badnet" || a == "tact" || a == "none") return attacks::make_badnet(shape, cfg.target);
    if (a == "sig") return attacks::make_sig(shape, cfg.delta, cfg.freq, cfg.target);
    const Tensor pattern = cfg.pattern_file.empty() ? attacks::procedural_pattern(shape, cfg.pattern_seed)
                                                    : data::load_image(cfg.pattern_file);
    return attacks::make_blend(pattern, shape, cfg.alpha, cfg.target);
}

attacks::PoisonPlan make_plan(const RunConfig& cfg, const Shape& shape) {
    if (cfg.attack == "none") throw ConfigError("attack = none has no poisoning plan");
    attacks::PoisonPlan plan;
    plan.kind = attacks::attack_from_string(cfg.attack);
    plan.poison_ratio = cfg.pr;
    plan.cover_rate = cfg.cover;
    plan.source_class = cfg.source;
    plan.trigger = make_trigger(cfg, shape);
    plan.seed = cfg.poison_seed;
    return plan;
}

nn::ModelSpec make_model(const RunConfig& cfg, const Shape& shape, std::size_t num_classes) {
    return cfg.model == "mlp" ? nn::default_mlp(shape, num_classes, cfg.hidden) : nn::default_cnn(shape, num_classes);
}

defense::DefenseSchedule make_schedule(const RunConfig& cfg) {
    defense::DefenseSchedule s;
    s.gamma = cfg.gamma;
    s.enhance_epochs = cfg.E_b;
    s.standard_epochs = cfg.E_s;
    s.lr_train = cfg.lr_train;
    s.lr_unlearn = cfg.lr_unlearn;
    s.batch_size = cfg.batch;
    s.unlearn_clip = cfg.unlearn_clip;
    s.partition.eps = cfg.eps;
    s.partition.patch = cfg.r;
    s.partition.mode = cfg.patch_mode == "additive" ? partition::PatchMode::additive : partition::PatchMode::replace;
    defense::validate(s);
    return s;
}

Prepared prepare(const RunConfig& cfg) {
    Prepared prep;
    prep.train = load_split(cfg, Split::train);
    prep.test = load_split(cfg, Split::test);
    if (prep.train.shape != prep.test.shape || prep.train.num_classes != prep.test.num_classes) {
        throw ConfigError("training and test data disagree on shape or class count");
    }
    prep.trigger = make_trigger(cfg, prep.train.shape);
    const bool already_poisoned = std::any_of(prep.train.samples.begin(), prep.train.samples.end(),
                                              [](const auto& s) { return s.provenance != data::Provenance::clean; });
    if (cfg.attack != "none" && !already_poisoned) {
        prep.train = attacks::poison_dataset(prep.train, make_plan(cfg, prep.train.shape));
    }
    std::optional<std::size_t> source;
    if (cfg.attack == "tact") source = cfg.source;
    prep.asr_set = attacks::make_asr_testset(prep.test, prep.trigger, source);
    prep.spec = make_model(cfg, prep.train.shape, prep.train.num_classes);
    return prep;
}

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows) {
    CsvTable t{{"epoch", "phase", "acc", "asr", "n_clean", "p"}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({std::to_string(r.epoch), r.phase, format_double(r.acc), format_double(r.asr),
                          std::to_string(r.n_clean), r.p ? format_double(*r.p) : ""});
    }
    write_csv(path, t);
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t ce = t.column("epoch"), cph = t.column("phase"), ca = t.column("acc"), cs = t.column("asr"),
                      cn = t.column("n_clean"), cp = t.column("p");
    std::vector<MetricsRow> rows;
    try {
        for (const auto& f : t.rows) {
            MetricsRow r{std::stoul(f[ce]), f[cph], std::stod(f[ca]), std::stod(f[cs]), std::stoul(f[cn]), std::nullopt};
            if (!f[cp].empty()) r.p = std::stod(f[cp]);
            rows.push_back(r);
        }
    } catch (const std::logic_error&) {
        throw LoadError(path.string() + ": malformed metrics row");
    }
    return rows;
}

namespace {

struct Evaluator {
    const Prepared& prep;
    SampleSet test = data::untrusted_view(prep.test);
    SampleSet asr = data::untrusted_view(prep.asr_set);

    Metrics operator()(const nn::ParamSet& params) const {
        return make_metrics(compute_acc(prep.spec, params, test), compute_asr(prep.spec, params, asr, prep.trigger.target));
    }
};

nlohmann::json metrics_json(const Metrics& m) {
    return {{"acc", m.acc}, {"asr", m.asr}, {"defense_success", m.defense_success}};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw RuntimeFailure("cannot write " + path.string());
}

}  // namespace

TrainResult train_undefended(const RunConfig& cfg, const Prepared& prep) {
    const SampleSet set = data::untrusted_view(prep.train);
    const Evaluator eval{prep};
    Rng rng = Rng(cfg.seed).fork("undefended");
    Rng init_rng = rng.fork("init");
    Rng train_rng = rng.fork("train");
    TrainResult res;
    res.params = nn::init_params(prep.spec, init_rng);
    const nn::EpochOptions opts{cfg.lr_train, cfg.batch, nn::Direction::descend, 0.0};
    for (std::size_t e = 0; e < cfg.train_epochs; ++e) {
        nn::run_epoch(prep.spec, res.params, set, opts, train_rng);
        const Metrics m = eval(res.params);
        res.rows.push_back({e, "train", m.acc, m.asr, set.size(), std::nullopt});
    }
    res.metrics = eval(res.params);
    return res;
}

DefenseOutcome run_defense(const RunConfig& cfg, const Prepared& prep, bool relearn, const fs::path& run_dir) {
    const defense::DefenseSchedule schedule = make_schedule(cfg);
    const SampleSet untrusted = data::untrusted_view(prep.train);
    const Evaluator eval{prep};
    const Rng root(cfg.seed);
    DefenseOutcome out;

    const TrainResult baseline = train_undefended(cfg, prep);
    out.before = baseline.metrics;

    Rng enhance_rng = root.fork("enhance");
    out.enhance = defense::enhance_backdoor(untrusted, prep.spec, schedule, enhance_rng,
                                            [&](const defense::EnhanceEpoch& rec, const nn::ParamSet& params) {
                                                const Metrics m = eval(params);
                                                out.rows.push_back({rec.epoch, "enhance", m.acc, m.asr, rec.n_clean, rec.p});
                                            });
    out.enhanced = eval(out.enhance.params);

    out.extracted = defense::extract_clean(untrusted, prep.spec, out.enhance.params);
    out.detection = detection_quality(out.extracted, prep.train);
    std::size_t n_true_clean = 0, extracted_clean = 0;
    for (const auto& s : prep.train.samples) n_true_clean += s.provenance == data::Provenance::clean;
    for (std::size_t i : out.extracted) {
        const auto prov = prep.train.samples[i].provenance;
        out.extracted_payload += prov == data::Provenance::poison_payload;
        extracted_clean += prov == data::Provenance::clean;
    }
    out.clean_recall = n_true_clean ? static_cast<double>(extracted_clean) / static_cast<double>(n_true_clean) : 0.0;

    Rng standard_rng = root.fork("standard");
    const nn::ParamSet clean_model =
        defense::train_clean(untrusted, out.extracted, prep.spec, schedule.standard_epochs, schedule.lr_train,
                             schedule.batch_size, standard_rng, [&](std::size_t e, const nn::ParamSet& params) {
                                 const Metrics m = eval(params);
                                 out.rows.push_back({e, "clean", m.acc, m.asr, out.extracted.size(), std::nullopt});
                             });
    out.clean = eval(clean_model);
    out.after = out.clean;

    std::optional<defense::RelearnResult> rr;
    if (relearn) {
        Rng relearn_rng = root.fork("relearn");
        rr = defense::relabel_relearn(untrusted, out.extracted, prep.spec, clean_model, cfg.relearn_epochs,
                                      cfg.lr_relearn, schedule.batch_size, relearn_rng,
                                      [&](std::size_t e, const nn::ParamSet& params) {
                                          const Metrics m = eval(params);
                                          out.rows.push_back({e, "relearn", m.acc, m.asr, out.extracted.size(), std::nullopt});
                                      });
        out.relearn = eval(rr->params);
        out.after = *out.relearn;
    }

    if (run_dir.empty()) return out;

    fs::create_directories(run_dir / "checkpoints");
    fs::create_directories(run_dir / "scores");
    write_text(run_dir / "config.txt", echo(cfg));
    write_metrics_csv(run_dir / "metrics.csv", out.rows);
    nn::save_checkpoint(run_dir / "checkpoints" / "undefended.ckpt", baseline.params);
    nn::save_checkpoint(run_dir / "checkpoints" / "enhanced.ckpt", out.enhance.params);
    nn::save_checkpoint(run_dir / "checkpoints" / "clean.ckpt", clean_model);
    if (rr) nn::save_checkpoint(run_dir / "checkpoints" / "relearn.ckpt", rr->params);
    export_histogram(out.enhance.last_partition, prep.train, run_dir / "scores" / "partition_scores.csv",
                     run_dir / "scores" / "partition_hist.csv");
    CsvTable extracted{{"index"}, {}};
    for (std::size_t i : out.extracted) extracted.rows.push_back({std::to_string(i)});
    write_csv(run_dir / "scores" / "extracted.csv", extracted);

    nlohmann::json report = {
        {"attack", cfg.attack},
        {"config_hash", config_hash(cfg)},
        {"seed", cfg.seed},
        {"acc_before", out.before.acc},
        {"asr_before", out.before.asr},
        {"acc_after", out.after.acc},
        {"asr_after", out.after.asr},
        {"defense_success", out.after.defense_success},
        {"precision", out.detection.precision},
        {"recall", out.detection.recall},
        {"f1", out.detection.f1},
        {"n_train", prep.train.size()},
        {"n_extracted", out.extracted.size()},
        {"extracted_payload", out.extracted_payload},
        {"clean_recall", out.clean_recall},
        {"enhanced", metrics_json(out.enhanced)},
        {"clean", metrics_json(out.clean)},
    };
    if (out.relearn) report["relearn"] = metrics_json(*out.relearn);
    write_text(run_dir / "report.json", report.dump(2) + "\n");
    return out;
}

Separability separability(const RunConfig& cfg, const Prepared& prep, const nn::ParamSet& params) {
    const defense::DefenseSchedule schedule = make_schedule(cfg);
    const SampleSet set = data::untrusted_view(prep.train);
    Rng rng = Rng(cfg.seed).fork("kl-hist");
    Separability s;
    s.outcome = partition::partition_dataset(set, prep.spec, params, schedule.partition,
                                             defense::partition_rate(schedule.enhance_epochs - 1, schedule.gamma), rng);
    std::vector<bool> is_clean(set.size());
    std::vector<double> clean, poison;
    for (std::size_t i = 0; i < set.size(); ++i) {
        is_clean[i] = prep.train.samples[i].provenance == data::Provenance::clean;
        (is_clean[i] ? clean : poison).push_back(s.outcome.scores[i]);
    }
    if (clean.empty() || poison.empty()) throw ConfigError("separability needs both clean and poisoned samples");
    s.auc = roc_auc(s.outcome.scores, is_clean);
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    s.median_clean = median(clean);
    s.median_poison = median(poison);
    return s;
}

data::LabeledDataset oracle_dataset(const RunConfig& cfg) {
    return data::gen_synthetic(cfg.oracle_classes, cfg.oracle_per_class, Shape{1, cfg.synth_side, cfg.synth_side},
                               cfg.subsample_seed);
}

std::vector<kernel::OracleRow> run_kernel_check(const RunConfig& cfg) {
    const auto base = oracle_dataset(cfg);
    const auto trigger = attacks::make_badnet(base.shape, cfg.target % base.num_classes);
    const auto ratios = parse_double_list(cfg.ratios);
    return kernel::poison_share_check(base, trigger, ratios, {cfg.eps, cfg.r, cfg.gamma_k, cfg.seed});
}

}  // namespace meca::eval
