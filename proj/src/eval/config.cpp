#include "meca/config.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "meca/errors.hpp"
#include "meca/metrics.hpp"

#ifndef MECA_DEFAULT_DATA_DIR
#define MECA_DEFAULT_DATA_DIR "data"
#endif

namespace meca::eval {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    T v{};
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw ConfigError("config key '" + key + "': cannot parse '" + text + "'");
    }
    return v;
}

template <class T>
ConfigKey number_key(std::string name, T RunConfig::*field, std::string help) {
    ConfigKey k;
    k.name = name;
    k.help = std::move(help);
    k.set = [name, field](RunConfig& c, const std::string& v) { c.*field = parse_number<T>(name, v); };
    if constexpr (std::is_floating_point_v<T>) {
        k.get = [field](const RunConfig& c) { return format_double(c.*field); };
    } else {
        k.get = [field](const RunConfig& c) { return std::to_string(c.*field); };
    }
    return k;
}

ConfigKey text_key(std::string name, std::string RunConfig::*field, std::string help, bool affects_results = true) {
    ConfigKey k;
    k.name = std::move(name);
    k.help = std::move(help);
    k.affects_results = affects_results;
    k.set = [field](RunConfig& c, const std::string& v) { c.*field = trim(v); };
    k.get = [field](const RunConfig& c) { return c.*field; };
    return k;
}

std::vector<ConfigKey> build_keys() {
    return {
        text_key("dataset", &RunConfig::dataset, "mnist | cifar | synthetic | manifest"),
        text_key("data_dir", &RunConfig::data_dir, "data root (default $MECA_DATA_DIR)", false),
        number_key("train_per_class", &RunConfig::train_per_class, "training samples per class"),
        number_key("test_per_class", &RunConfig::test_per_class, "test samples per class"),
        number_key("subsample_seed", &RunConfig::subsample_seed, "seed of the class-balanced subset"),
        number_key("synth_classes", &RunConfig::synth_classes, "synthetic class count"),
        number_key("synth_side", &RunConfig::synth_side, "synthetic image side"),
        number_key("synth_channels", &RunConfig::synth_channels, "synthetic channel count"),
        text_key("train_manifest", &RunConfig::train_manifest, "training manifest (dataset = manifest)"),
        text_key("test_manifest", &RunConfig::test_manifest, "test manifest (dataset = manifest)"),
        text_key("attack", &RunConfig::attack, "badnet | blend | sig | tact | adaptive_blend | none"),
        number_key("pr", &RunConfig::pr, "poison ratio"),
        number_key("cover", &RunConfig::cover, "cover rate (negative: attack default)"),
        number_key("target", &RunConfig::target, "target class"),
        number_key("source", &RunConfig::source, "TaCT source class"),
        number_key("alpha", &RunConfig::alpha, "blend alpha"),
        number_key("delta", &RunConfig::delta, "SIG amplitude"),
        number_key("freq", &RunConfig::freq, "SIG frequency"),
        number_key("pattern_seed", &RunConfig::pattern_seed, "seed of the procedural blend pattern"),
        text_key("pattern_file", &RunConfig::pattern_file, "blend pattern image (MECAIMG1); empty: procedural"),
        number_key("poison_seed", &RunConfig::poison_seed, "seed of the poisoning draw"),
        text_key("model", &RunConfig::model, "cnn | mlp"),
        number_key("hidden", &RunConfig::hidden, "MLP hidden width"),
        number_key("train_epochs", &RunConfig::train_epochs, "undefended training epochs"),
        number_key("lr_train", &RunConfig::lr_train, "SGD step size for training"),
        number_key("batch", &RunConfig::batch, "mini-batch size"),
        number_key("gamma", &RunConfig::gamma, "partition-rate increment per enhancement epoch"),
        number_key("E_b", &RunConfig::E_b, "backdoor-enhancement epochs"),
        number_key("E_s", &RunConfig::E_s, "standard-training epochs"),
        number_key("lr_unlearn", &RunConfig::lr_unlearn, "gradient-ascent step size"),
        number_key("unlearn_clip", &RunConfig::unlearn_clip, "per-batch gradient L2 clip while unlearning"),
        number_key("eps", &RunConfig::eps, "perturbation bound"),
        number_key("r", &RunConfig::r, "patch side"),
        text_key("patch_mode", &RunConfig::patch_mode, "replace | additive"),
        number_key("relearn_epochs", &RunConfig::relearn_epochs, "relabel-and-relearn epochs"),
        number_key("lr_relearn", &RunConfig::lr_relearn, "relearn step size"),
        number_key("gamma_k", &RunConfig::gamma_k, "RBF width (0: 1/(2d))"),
        text_key("ratios", &RunConfig::ratios, "oracle poison ratios N_p/N_b"),
        number_key("oracle_classes", &RunConfig::oracle_classes, "oracle synthetic class count"),
        number_key("oracle_per_class", &RunConfig::oracle_per_class, "oracle synthetic samples per class"),
        number_key("seed", &RunConfig::seed, "run seed"),
        text_key("out", &RunConfig::out, "run directory", false),
    };
}

const ConfigKey& find_key(const std::string& name) {
    for (const auto& k : config_keys())
        if (k.name == name) return k;
    throw ConfigError("unknown config key '" + name + "'");
}

void require_file(const std::filesystem::path& p, const std::string& what) {
    if (!std::filesystem::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

void require_one_of(const std::string& key, const std::string& value, std::initializer_list<const char*> allowed) {
    std::string list;
    for (const char* a : allowed) {
        if (value == a) return;
        list += list.empty() ? a : std::string(", ") + a;
    }
    throw ConfigError("config key '" + key + "' must be one of " + list + " (got '" + value + "')");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = build_keys();
    return keys;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) { find_key(key).set(cfg, value); }

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_config(in);
    } catch (const CLI::Error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    RunConfig cfg;
    for (const auto& item : items) {
        // Section markers emitted by the reader.
        if (item.name == "++" || item.name == "--") continue;
        std::string value;
        for (std::size_t i = 0; i < item.inputs.size(); ++i) {
            if (i) value += ',';
            value += item.inputs[i];
        }
        set_key(cfg, item.name, value);
    }
    return cfg;
}

void finalize(RunConfig& cfg) {
    if (cfg.data_dir.empty()) {
        const char* env = std::getenv("MECA_DATA_DIR");
        cfg.data_dir = env && *env ? env : MECA_DEFAULT_DATA_DIR;
    }
    if (cfg.cover < 0.0) cfg.cover = (cfg.attack == "tact" || cfg.attack == "adaptive_blend") ? 0.01 : 0.0;

    require_one_of("dataset", cfg.dataset, {"mnist", "cifar", "synthetic", "manifest"});
    require_one_of("attack", cfg.attack, {"badnet", "blend", "sig", "tact", "adaptive_blend", "none"});
    require_one_of("model", cfg.model, {"cnn", "mlp"});
    require_one_of("patch_mode", cfg.patch_mode, {"replace", "additive"});
    if (cfg.batch == 0) throw ConfigError("batch must be positive");
    if (!(cfg.lr_train > 0.0)) throw ConfigError("lr_train must be positive");
    if (!(cfg.lr_relearn > 0.0)) throw ConfigError("lr_relearn must be positive");
    if (cfg.gamma_k < 0.0) throw ConfigError("gamma_k must be non-negative");
    parse_double_list(cfg.ratios);

    const std::filesystem::path root(cfg.data_dir);
    if (cfg.dataset == "mnist") {
        for (const char* f : {"train-images-idx3-ubyte", "train-labels-idx1-ubyte", "test-images-idx3-ubyte",
                              "test-labels-idx1-ubyte"}) {
            require_file(root / "mnist-5k" / f, "MNIST file");
        }
    } else if (cfg.dataset == "cifar") {
        require_file(root / "cifar-10-batches-bin" / "test_batch.bin", "CIFAR-10 test batch");
    } else if (cfg.dataset == "manifest") {
        if (cfg.train_manifest.empty() || cfg.test_manifest.empty()) {
            throw ConfigError("dataset = manifest needs train_manifest and test_manifest");
        }
        require_file(cfg.train_manifest, "training manifest");
        require_file(cfg.test_manifest, "test manifest");
    }
    if (!cfg.pattern_file.empty()) require_file(cfg.pattern_file, "blend pattern");
}

std::string echo(const RunConfig& cfg) {
    std::string out;
    for (const auto& k : config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
    return out;
}

std::string config_hash(const RunConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& k : config_keys()) {
        if (!k.affects_results) continue;
        for (unsigned char ch : k.name + "=" + k.get(cfg) + "\n") {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty() && item.front() == '[') item.erase(0, 1);
        if (!item.empty() && item.back() == ']') item.pop_back();
        if (item.empty()) continue;
        out.push_back(parse_number<double>("ratios", item));
    }
    if (out.empty()) throw ConfigError("empty list '" + text + "'");
    return out;
}

}  // namespace meca::eval
