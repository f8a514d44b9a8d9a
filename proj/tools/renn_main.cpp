// Command-line front end: dataset generation, two-stage training, evaluation,
// inference, and trace export over the renn_core library.

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "renn/dataset_io.hpp"
#include "renn/errors.hpp"
#include "renn/pipeline.hpp"
#include "renn/rulemod.hpp"
#include "renn/weights_io.hpp"

namespace fs = std::filesystem;
using namespace renn;

namespace {

std::map<std::string, std::string> read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t");
        const std::string body = line.substr(first, last - first + 1);
        const auto eq = body.find('=');
        if (eq == std::string::npos || eq == 0)
            throw UsageError("config " + path.string() + ":" + std::to_string(lineno) +
                             ": expected key=value");
        kv[body.substr(0, eq)] = body.substr(eq + 1);
    }
    return kv;
}

double parse_double(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw UsageError("config key " + key + ": not a number: " + value);
    return v;
}

long parse_long(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const long v = std::strtol(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0')
        throw UsageError("config key " + key + ": not an integer: " + value);
    return v;
}

std::uint64_t parse_seed(const std::string& who, const std::string& value) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0') throw UsageError(who + ": not a seed: " + value);
    return static_cast<std::uint64_t>(v);
}

// RENN_SEED wins over --seed whenever it is set.
void apply_env_seed(std::uint64_t& seed) {
    const char* env = std::getenv("RENN_SEED");
    if (env && *env) seed = parse_seed("RENN_SEED", env);
}

// Config-file keys fill in only the fields whose flag was not passed.
void apply_gen_config(GenOptions& opt, const std::map<std::string, std::string>& kv,
                      const std::map<std::string, bool>& flag_set) {
    for (const auto& [key, value] : kv) {
        auto set = [&](const char* name) { return flag_set.count(name) && flag_set.at(name); };
        if (key == "count") {
            if (!set("count")) opt.count = static_cast<int>(parse_long(key, value));
        } else if (key == "seed") {
            if (!set("seed")) opt.seed = parse_seed(key, value);
        } else if (key == "noise_level") {
            if (!set("noise_level")) opt.noise_level = parse_double(key, value);
        } else if (key == "duration_s") {
            opt.duration_s = parse_double(key, value);
        } else if (key == "fs") {
            opt.fs = static_cast<int>(parse_long(key, value));
        } else if (key == "rr_jitter_s") {
            opt.rr_jitter_s = parse_double(key, value);
        } else if (key == "mean_rr_s") {
            opt.mean_rr_s = parse_double(key, value);
        } else if (key == "r_amplitude_mv") {
            opt.r_amplitude_mv = parse_double(key, value);
        } else if (key == "white_sigma_mv") {
            opt.white_sigma_mv = parse_double(key, value);
        } else if (key == "baseline_amp_mv") {
            opt.baseline_amp_mv = parse_double(key, value);
        } else if (key == "baseline_freq_hz") {
            opt.baseline_freq_hz = parse_double(key, value);
        } else if (key == "ac_amp_mv") {
            opt.ac_amp_mv = parse_double(key, value);
        } else if (key == "ac_freq_hz") {
            opt.ac_freq_hz = parse_double(key, value);
        } else if (key == "dropout_prob") {
            opt.dropout_prob = parse_double(key, value);
        } else {
            throw UsageError("unknown config key: " + key);
        }
    }
}

void apply_train_config(TrainConfig& tc, const std::map<std::string, std::string>& kv,
                        const std::map<std::string, bool>& flag_set) {
    for (const auto& [key, value] : kv) {
        auto set = [&](const char* name) { return flag_set.count(name) && flag_set.at(name); };
        if (key == "channels") {
            if (!set("channels")) tc.channels = static_cast<int>(parse_long(key, value));
        } else if (key == "epochs") {
            if (!set("epochs")) tc.epochs = static_cast<int>(parse_long(key, value));
        } else if (key == "seed") {
            if (!set("seed")) tc.seed = parse_seed(key, value);
        } else if (key == "lr0") {
            tc.lr0 = parse_double(key, value);
        } else if (key == "decay_rate") {
            tc.decay_rate = parse_double(key, value);
        } else if (key == "decay_every_steps") {
            tc.decay_every_steps = parse_long(key, value);
        } else if (key == "w_pos") {
            tc.w_pos = value == "auto" ? 0.0 : parse_double(key, value);
        } else {
            throw UsageError("unknown config key: " + key);
        }
    }
}

struct ModelMeta {
    int fs = 0;
    int channels = 0;
};

void write_model_meta(const fs::path& dir, const ModelMeta& meta) {
    std::ofstream out(dir / "meta", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "meta").string());
    out << "fs=" << meta.fs << "\nchannels=" << meta.channels << "\nversion=1\n";
}

ModelMeta read_model_meta(const fs::path& dir) {
    std::ifstream in(dir / "meta");
    if (!in) throw IoError("cannot open " + (dir / "meta").string() + "; train a model first");
    ModelMeta meta;
    int version = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw CsvError("model meta: expected key=value, got: " + line);
        const std::string key = line.substr(0, eq);
        const long value = parse_long(key, line.substr(eq + 1));
        if (key == "fs")
            meta.fs = static_cast<int>(value);
        else if (key == "channels")
            meta.channels = static_cast<int>(value);
        else if (key == "version")
            version = static_cast<int>(value);
        else
            throw CsvError("model meta: unknown key: " + key);
    }
    if (version != 1) throw VersionError("model meta: unsupported version");
    if (meta.fs < 1 || meta.channels < 1) throw CsvError("model meta: missing fs or channels");
    return meta;
}

void write_loss_csv(const fs::path& path, const LossHistory& h) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < h.epoch_loss.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, h.epoch_loss[i]);
        out << buf;
    }
}

int tolerance_samples(int tolerance_ms, int fs) {
    if (tolerance_ms < 0) throw UsageError("--tolerance-ms must be non-negative");
    const long exact = static_cast<long>(tolerance_ms) * fs;
    if (exact % 1000 != 0)
        std::fprintf(stderr, "warning: %d ms is not a whole number of samples at %d Hz; rounding down\n",
                     tolerance_ms, fs);
    return static_cast<int>(exact / 1000);
}

std::vector<int> flags_from_indices(const std::vector<int>& indices, int length) {
    std::vector<int> flags(length, 0);
    for (int i : indices)
        if (i >= 0 && i < length) flags[i] = 1;
    return flags;
}

int cmd_gen(const fs::path& out_dir, GenOptions opt) {
    if (opt.count < 1) throw UsageError("--count must be at least 1");
    if (opt.noise_level < 0.0) throw UsageError("--noise-level must be non-negative");
    const Dataset ds = make_dataset(opt);
    write_dataset(ds.records, ds.manifest, out_dir);
    long n_train = 0;
    for (const auto& e : ds.manifest.entries)
        if (e.split == Split::Train) ++n_train;
    std::printf("wrote %zu records (%ld train / %ld test) at %d Hz to %s\n", ds.records.size(), n_train,
                static_cast<long>(ds.records.size()) - n_train, ds.manifest.fs, out_dir.string().c_str());
    return 0;
}

int cmd_train(const fs::path& data_dir, const fs::path& model_dir, const std::string& stage, TrainConfig tc,
              bool channels_given) {
    if (stage != "1" && stage != "2" && stage != "both")
        throw UsageError("--stage must be 1, 2, or both");
    const Dataset ds = read_dataset(data_dir);
    const auto train = split_records(ds, Split::Train);
    fs::create_directories(model_dir);

    Model f{};
    if (stage == "2") {
        const fs::path f_path = model_dir / "f.weights";
        if (!fs::exists(f_path)) throw IoError("stage 2 needs " + f_path.string() + "; run stage 1 first");
        const FcnConfig stored = peek_weights_config(f_path);
        if (channels_given && tc.channels != stored.hidden_channels)
            throw UsageError("--channels " + std::to_string(tc.channels) +
                             " does not match the stored feature model (C=" +
                             std::to_string(stored.hidden_channels) + ")");
        tc.channels = stored.hidden_channels;
        f = load_weights(f_path, stored);
    } else {
        LossHistory h1;
        std::tie(f, h1) = train_stage1(train, tc);
        save_weights(f, model_dir / "f.weights");
        write_loss_csv(model_dir / "loss_stage1.csv", h1);
        std::printf("stage 1: %d epochs over %zu records, final loss %.6g\n", tc.epochs, train.size(),
                    h1.epoch_loss.back());
    }

    if (stage != "1") {
        auto [g, h2] = train_stage2(train, f, tc);
        save_weights(g, model_dir / "g.weights");
        write_loss_csv(model_dir / "loss_stage2.csv", h2);
        std::printf("stage 2: %d epochs over %zu records, final loss %.6g\n", tc.epochs, train.size(),
                    h2.epoch_loss.back());
    }

    write_model_meta(model_dir, ModelMeta{ds.manifest.fs, tc.channels});
    return 0;
}

int cmd_eval(const fs::path& data_dir, const fs::path& model_dir, const std::string& mode, int tolerance_ms,
             fs::path out_path) {
    if (mode != "" && mode != "local" && mode != "global")
        throw UsageError("--mode must be local or global");
    const ModelMeta meta = read_model_meta(model_dir);
    const Dataset ds = read_dataset(data_dir, meta.fs);
    const auto test = split_records(ds, Split::Test);
    if (test.empty()) throw IoError("dataset has no test split");
    const int tol = tolerance_samples(tolerance_ms, meta.fs);

    const FcnConfig f_cfg{1, meta.channels, 0};
    std::vector<TableRow> rows;
    if (mode != "global") {
        const Model f = load_weights(model_dir / "f.weights", f_cfg);
        std::vector<DetectionReport> parts;
        for (const auto& rec : test) {
            const auto detected = pick_candidates(local_probability(f, rec), kCandidateThreshold,
                                                  kMinPeakSeparationS, rec.fs);
            parts.push_back(evaluate(detected, rec.labels, tol));
        }
        const DetectionReport r = merge_reports(parts);
        rows.push_back(TableRow{"local", meta.channels, r.tp, r.fp, r.fn, r.f1});
    }
    if (mode != "local") {
        const Model f = load_weights(model_dir / "f.weights", f_cfg);
        const Model g = load_weights(model_dir / "g.weights", FcnConfig{3, meta.channels, 0});
        std::vector<DetectionReport> parts;
        for (const auto& rec : test) {
            const InferenceTrace tr = infer(f, g, rec, meta.fs);
            parts.push_back(evaluate(tr.detected, rec.labels, tol));
        }
        const DetectionReport r = merge_reports(parts);
        rows.push_back(TableRow{"global", meta.channels, r.tp, r.fp, r.fn, r.f1});
    }

    const std::string csv = format_table_csv(rows);
    std::fputs(csv.c_str(), stdout);
    if (out_path.empty()) out_path = model_dir / "eval.csv";
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + out_path.string());
    out << csv;
    return 0;
}

int cmd_trace(const fs::path& record_path, const fs::path& model_dir, const fs::path& out_path) {
    const ModelMeta meta = read_model_meta(model_dir);
    const Model f = load_weights(model_dir / "f.weights", FcnConfig{1, meta.channels, 0});
    const Model g = load_weights(model_dir / "g.weights", FcnConfig{3, meta.channels, 0});
    const EcgRecord rec = read_record_csv(record_path, meta.fs);
    const InferenceTrace tr = infer(f, g, rec, meta.fs);

    const int T = static_cast<int>(tr.x.size());
    if (out_path.empty()) {
        for (int i : tr.detected) std::printf("%d\n", i);
        return 0;
    }
    const auto label_flags = flags_from_indices(tr.labels, T);
    const auto det_flags = flags_from_indices(tr.detected, T);
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot write " + out_path.string());
    out << "t,x,f,r,o,label,detected\n";
    char buf[160];
    for (int t = 0; t < T; ++t) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%d,%d\n", t, tr.x[t], tr.f_pos[t],
                      tr.r[t], tr.o_pos[t], label_flags[t], det_flags[t]);
        out << buf;
    }
    std::printf("wrote %d rows to %s\n", T, out_path.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rule-embedded ECG R-peak detector"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "synthesize a labeled dataset");
    std::string gen_out;
    std::string gen_config;
    GenOptions opt;
    gen->add_option("--out", gen_out, "dataset directory")->required();
    auto* g_count = gen->add_option("--count", opt.count, "number of records");
    auto* g_seed = gen->add_option("--seed", opt.seed, "base seed");
    auto* g_noise = gen->add_option("--noise-level", opt.noise_level, "noise scale, 0 = clean");
    gen->add_option("--config", gen_config, "key=value file with generator fields");

    // train
    auto* train = app.add_subcommand("train", "train the two-stage detector");
    std::string train_data, train_out, train_stage = "both", train_config;
    TrainConfig tc;
    train->add_option("--data", train_data, "dataset directory")->required();
    train->add_option("--out", train_out, "model directory")->required();
    auto* t_channels = train->add_option("--channels", tc.channels, "hidden channel width C");
    train->add_option("--stage", train_stage, "1, 2, or both");
    auto* t_epochs = train->add_option("--epochs", tc.epochs, "training epochs per stage");
    auto* t_seed = train->add_option("--seed", tc.seed, "training seed");
    train->add_option("--config", train_config, "key=value file with training fields");

    // eval
    auto* eval = app.add_subcommand("eval", "score the test split");
    std::string eval_data, eval_models, eval_mode, eval_out;
    int eval_tol_ms = 16;
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--models", eval_models, "model directory")->required();
    eval->add_option("--mode", eval_mode, "local or global; both when omitted");
    eval->add_option("--tolerance-ms", eval_tol_ms, "match tolerance in milliseconds");
    eval->add_option("--out", eval_out, "report CSV path (default: MODELDIR/eval.csv)");

    // trace / infer
    auto* trace = app.add_subcommand("trace", "export aligned x/f/r/o series for one record");
    std::string trace_record, trace_models, trace_out;
    trace->add_option("--record", trace_record, "record CSV")->required();
    trace->add_option("--models", trace_models, "model directory")->required();
    trace->add_option("--out", trace_out, "trace CSV path")->required();

    auto* infer_cmd = app.add_subcommand("infer", "print detected R-peak indices for one record");
    std::string infer_record, infer_models;
    infer_cmd->add_option("--record", infer_record, "record CSV")->required();
    infer_cmd->add_option("--models", infer_models, "model directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            std::map<std::string, bool> flag_set{{"count", g_count->count() > 0},
                                                 {"seed", g_seed->count() > 0},
                                                 {"noise_level", g_noise->count() > 0}};
            if (!gen_config.empty()) apply_gen_config(opt, read_config_file(gen_config), flag_set);
            apply_env_seed(opt.seed);
            return cmd_gen(gen_out, opt);
        }
        if (train->parsed()) {
            std::map<std::string, bool> flag_set{{"channels", t_channels->count() > 0},
                                                 {"epochs", t_epochs->count() > 0},
                                                 {"seed", t_seed->count() > 0}};
            if (!train_config.empty()) apply_train_config(tc, read_config_file(train_config), flag_set);
            apply_env_seed(tc.seed);
            return cmd_train(train_data, train_out, train_stage, tc, t_channels->count() > 0);
        }
        if (eval->parsed()) return cmd_eval(eval_data, eval_models, eval_mode, eval_tol_ms, eval_out);
        if (trace->parsed()) return cmd_trace(trace_record, trace_models, trace_out);
        if (infer_cmd->parsed()) return cmd_trace(infer_record, infer_models, "");
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
