#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "meca/attacks.hpp"
#include "meca/config.hpp"
#include "meca/dataset.hpp"
#include "meca/defense.hpp"
#include "meca/kernel.hpp"
#include "meca/metrics.hpp"
#include "meca/nn.hpp"

namespace meca::eval {

// Everything a run needs, built deterministically from a finalized config.
struct Prepared {
    data::LabeledDataset train;  // poisoned unless attack = none; carries provenance
    data::LabeledDataset test;
    attacks::TriggerSpec trigger;  // a BadNet patch stands in when attack = none
    data::LabeledDataset asr_set;
    nn::ModelSpec spec;
};

data::LabeledDataset load_split(const RunConfig& cfg, data::Split split);
attacks::TriggerSpec make_trigger(const RunConfig& cfg, const Shape& shape);
attacks::PoisonPlan make_plan(const RunConfig& cfg, const Shape& shape);
nn::ModelSpec make_model(const RunConfig& cfg, const Shape& shape, std::size_t num_classes);
defense::DefenseSchedule make_schedule(const RunConfig& cfg);

// Loads, poisons (unless the training data already carries poison or the
// attack is none) and builds the ASR set.
Prepared prepare(const RunConfig& cfg);

// One row of metrics.csv.
struct MetricsRow {
    std::size_t epoch = 0;
    std::string phase;  // train | enhance | clean | relearn
    double acc = 0.0;
    double asr = 0.0;
    std::size_t n_clean = 0;
    std::optional<double> p;
};

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct TrainResult {
    nn::ParamSet params;
    Metrics metrics;
    std::vector<MetricsRow> rows;
};

// Plain training on the (possibly poisoned) training set for train_epochs.
TrainResult train_undefended(const RunConfig& cfg, const Prepared& prep);

struct DefenseOutcome {
    Metrics before;                 // undefended model, same data and budget
    Metrics enhanced;               // enhanced model after the last epoch
    Metrics clean;                  // model trained on the extracted set
    std::optional<Metrics> relearn;
    Metrics after;                  // relearn if run, otherwise clean
    DetectionQuality detection;
    std::vector<std::size_t> extracted;
    std::size_t extracted_payload = 0;  // ground-truth contamination of D_clean
    double clean_recall = 0.0;          // share of truly clean samples extracted
    std::vector<MetricsRow> rows;
    defense::EnhanceResult enhance;
};

// Full pipeline: undefended reference, enhancement, extraction, standard
// training and optionally relabel-relearn. With a non-empty run_dir, writes
// config.txt, metrics.csv, report.json, checkpoints/ and scores/ there.
DefenseOutcome run_defense(const RunConfig& cfg, const Prepared& prep, bool relearn,
                           const std::filesystem::path& run_dir = {});

struct Separability {
    double auc = 0.0;  // clean samples are the positives
    double median_clean = 0.0;
    double median_poison = 0.0;
    partition::PartitionOutcome outcome;
};

// Scores the training set with a model and reports how well the KL score
// separates clean from poisoned samples. The split uses the schedule's final
// partition rate.
Separability separability(const RunConfig& cfg, const Prepared& prep, const nn::ParamSet& params);

// Synthetic set for the kernel oracle, built from the oracle_* keys.
data::LabeledDataset oracle_dataset(const RunConfig& cfg);
std::vector<kernel::OracleRow> run_kernel_check(const RunConfig& cfg);

}  // namespace meca::eval
