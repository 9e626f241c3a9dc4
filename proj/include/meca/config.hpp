#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace meca::eval {

// Every knob of one experiment. Defaults follow the published setup where it gives a
// value and the desk-scale choices otherwise.
struct RunConfig {
    // data
    std::string dataset = "mnist";  // mnist | cifar | synthetic | manifest
    std::string data_dir;           // empty: $MECA_DATA_DIR, then the build-time default
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 100;
    std::uint64_t subsample_seed = 1;
    std::size_t synth_classes = 10;
    std::size_t synth_side = 8;
    std::size_t synth_channels = 1;
    std::string train_manifest;
    std::string test_manifest;

    // attack
    std::string attack = "badnet";  // badnet | blend | sig | tact | adaptive_blend | none
    double pr = 0.05;
    double cover = -1.0;  // negative: 0.01 for tact and adaptive_blend, 0 otherwise
    std::size_t target = 1;
    std::size_t source = 0;
    double alpha = 0.2;
    double delta = 20.0 / 255.0;
    double freq = 6.0;
    std::uint64_t pattern_seed = 7;
    std::string pattern_file;
    std::uint64_t poison_seed = 3;

    // model and training
    std::string model = "cnn";  // cnn | mlp
    std::size_t hidden = 32;
    std::size_t train_epochs = 10;
    double lr_train = 0.05;
    std::size_t batch = 32;

    // defense
    double gamma = 0.05;
    std::size_t E_b = 10;
    std::size_t E_s = 30;
    double lr_unlearn = 1e-4;
    double unlearn_clip = 5.0;
    double eps = 0.001;
    std::size_t r = 2;
    std::string patch_mode = "replace";  // replace | additive
    std::size_t relearn_epochs = 5;
    double lr_relearn = 0.01;

    // kernel oracle
    double gamma_k = 0.0;  // 0: 1 / (2 d)
    std::string ratios = "0.1,0.25,0.5,1.0";
    std::size_t oracle_classes = 10;
    std::size_t oracle_per_class = 20;

    // run
    std::uint64_t seed = 0;
    std::string out = "runs/run";
};

struct ConfigKey {
    std::string name;
    std::string help;
    bool affects_results = true;  // false for paths that only say where things live
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

// All keys in echo order.
const std::vector<ConfigKey>& config_keys();

// Sets one key from text. Throws ConfigError on an unknown key or a value
// that does not parse.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

// Reads a flat key = value file ('#' comments; [section] headers are allowed
// and ignored). Throws ConfigError on a missing file or unknown key.
RunConfig load_config(const std::filesystem::path& path);

// Resolves defaults that depend on other keys or the environment, then checks
// ranges and that every referenced file exists. Throws ConfigError.
void finalize(RunConfig& cfg);

// "key = value" lines in config_keys() order.
std::string echo(const RunConfig& cfg);

// FNV-1a 64 over the echo of the result-affecting keys, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

// Comma-separated list of doubles. Throws ConfigError.
std::vector<double> parse_double_list(const std::string& text);

}  // namespace meca::eval
