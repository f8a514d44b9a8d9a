#include "renn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "renn/errors.hpp"
#include "renn/rng.hpp"
#include "renn/rulemod.hpp"

namespace renn {

double lr_at(const TrainConfig& cfg, long step) {
    if (step < 0) throw UsageError("lr_at: step must be non-negative");
    return cfg.lr0 * std::pow(cfg.decay_rate, static_cast<double>(step / cfg.decay_every_steps));
}

double resolve_w_pos(const std::vector<EcgRecord>& records, double w_pos) {
    if (w_pos > 0.0) return w_pos;
    long pos = 0, total = 0;
    for (const EcgRecord& r : records) {
        pos += static_cast<long>(r.labels.size());
        total += static_cast<long>(r.signal.size());
    }
    if (pos == 0) throw ConfigError("resolve_w_pos: training set has no positive samples");
    return std::min(kWPosCap, static_cast<double>(total - pos) / static_cast<double>(pos));
}

static void validate_records(const std::vector<EcgRecord>& records, const char* who) {
    if (records.empty()) throw ConfigError(std::string(who) + ": no records");
    const int fs = records.front().fs;
    for (const EcgRecord& r : records) {
        if (r.fs != fs) throw ConfigError(std::string(who) + ": mixed sampling rates");
        if (r.signal.empty()) throw ConfigError(std::string(who) + ": empty record");
        int prev = -1;
        for (int l : r.labels) {
            if (l <= prev || l < 0 || l >= static_cast<int>(r.signal.size()))
                throw ConfigError(std::string(who) + ": labels must be ascending and in range");
            prev = l;
        }
    }
}

static std::vector<std::uint8_t> label_flags(const EcgRecord& r) {
    std::vector<std::uint8_t> f(r.signal.size(), 0);
    for (int l : r.labels) f[l] = 1;
    return f;
}

static Series as_series(const std::vector<double>& x) {
    Series s(1, static_cast<int>(x.size()));
    std::copy(x.begin(), x.end(), s.row(0));
    return s;
}

// Shared epoch loop: shuffled one-record steps, Adam with the decayed rate.
static LossHistory run_epochs(Model& model, const std::vector<Series>& inputs,
                              const std::vector<std::vector<std::uint8_t>>& labels,
                              const std::vector<int>& valid_lens, double w_pos, const TrainConfig& cfg) {
    model.training = true;
    ModelAdam adam;
    Rng shuffle_rng(derive_seed(cfg.seed, 0x51));
    LossHistory hist;
    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        double sum = 0.0;
        for (std::size_t idx : order) {
            ForwardCache cache;
            model_forward(model, inputs[idx], &cache);
            update_running_stats(model, cache);
            ModelGrads grads;
            sum += model_backward(model, cache, labels[idx], w_pos, valid_lens[idx], grads);
            adam_step_model(model, grads, adam, lr_at(cfg, step));
            ++step;
        }
        hist.epoch_loss.push_back(sum / inputs.size());
        hist.lr_samples.emplace_back(step, lr_at(cfg, step));
    }
    model.training = false;
    return hist;
}

std::pair<Model, LossHistory> train_stage1(const std::vector<EcgRecord>& records, const TrainConfig& cfg) {
    validate_records(records, "train_stage1");
    if (cfg.epochs < 1) throw ConfigError("train_stage1: epochs must be positive");
    const double w_pos = resolve_w_pos(records, cfg.w_pos);

    std::vector<Series> inputs;
    std::vector<std::vector<std::uint8_t>> labels;
    std::vector<int> valid_lens;
    for (const EcgRecord& r : records) {
        auto [padded, orig] = pad_to_pool(as_series(r.signal));
        inputs.push_back(std::move(padded));
        labels.push_back(label_flags(r));
        valid_lens.push_back(orig);
    }

    Model f = build_fcn(FcnConfig{1, cfg.channels, cfg.seed});
    LossHistory hist = run_epochs(f, inputs, labels, valid_lens, w_pos, cfg);
    return {std::move(f), std::move(hist)};
}

// [signal; rule map; peak probability] for one record, padded for the model.
static std::pair<Series, int> global_input(const Model& f, const EcgRecord& rec) {
    const int T = static_cast<int>(rec.signal.size());
    auto [xp, orig] = pad_to_pool(as_series(rec.signal));
    const Series fmap = trim_to(model_forward(f, xp), orig);
    const std::vector<double> rmap = rule_modulate(fmap, static_cast<double>(rec.fs));
    Series x3(3, T);
    std::copy(rec.signal.begin(), rec.signal.end(), x3.row(0));
    std::copy(rmap.begin(), rmap.end(), x3.row(1));
    const double* fpos = fmap.row(kPositiveChannel);
    std::copy(fpos, fpos + T, x3.row(2));
    return pad_to_pool(x3);
}

std::pair<Model, LossHistory> train_stage2(const std::vector<EcgRecord>& records, const Model& f,
                                           const TrainConfig& cfg) {
    validate_records(records, "train_stage2");
    if (f.training) throw UsageError("train_stage2: the feature model must be frozen first");
    if (f.config.in_channels != 1) throw ConfigError("train_stage2: the feature model must take one channel");
    const double w_pos = resolve_w_pos(records, cfg.w_pos);

    // f is fixed, so its map and the rule map are precomputed once per record
    std::vector<Series> inputs;
    std::vector<std::vector<std::uint8_t>> labels;
    std::vector<int> valid_lens;
    for (const EcgRecord& r : records) {
        auto [x3, orig] = global_input(f, r);
        inputs.push_back(std::move(x3));
        labels.push_back(label_flags(r));
        valid_lens.push_back(orig);
    }

    Model g = build_fcn(FcnConfig{3, cfg.channels, derive_seed(cfg.seed, 0x9)});
    LossHistory hist = run_epochs(g, inputs, labels, valid_lens, w_pos, cfg);
    return {std::move(g), std::move(hist)};
}

std::vector<double> local_probability(const Model& f, const EcgRecord& rec) {
    if (f.training) throw UsageError("local_probability: model must be in inference mode");
    const int T = static_cast<int>(rec.signal.size());
    auto [xp, orig] = pad_to_pool(as_series(rec.signal));
    const Series fmap = trim_to(model_forward(f, xp), orig);
    const double* fpos = fmap.row(kPositiveChannel);
    return {fpos, fpos + T};
}

InferenceTrace infer(const Model& f, const Model& g, const EcgRecord& rec, int expected_fs) {
    if (f.training || g.training) throw UsageError("infer: both models must be in inference mode");
    if (expected_fs > 0 && rec.fs != expected_fs)
        throw ConfigError("infer: record sampled at " + std::to_string(rec.fs) + " Hz but the models expect " +
                          std::to_string(expected_fs) + " Hz");
    validate_records({rec}, "infer");
    const int T = static_cast<int>(rec.signal.size());
    const double fs = static_cast<double>(rec.fs);

    auto [xp, orig] = pad_to_pool(as_series(rec.signal));
    const Series fmap = trim_to(model_forward(f, xp), orig);
    const std::vector<double> rmap = rule_modulate(fmap, fs);

    Series x3(3, T);
    std::copy(rec.signal.begin(), rec.signal.end(), x3.row(0));
    std::copy(rmap.begin(), rmap.end(), x3.row(1));
    const double* fpos = fmap.row(kPositiveChannel);
    std::copy(fpos, fpos + T, x3.row(2));
    auto [x3p, orig3] = pad_to_pool(x3);
    const Series omap = trim_to(model_forward(g, x3p), orig3);

    InferenceTrace tr;
    tr.x = rec.signal;
    tr.f_pos.assign(fpos, fpos + T);
    tr.r = rmap;
    const double* opos = omap.row(kPositiveChannel);
    tr.o_pos.assign(opos, opos + T);
    tr.detected = pick_candidates(tr.o_pos, kCandidateThreshold, kMinPeakSeparationS, fs);
    tr.labels = rec.labels;
    return tr;
}

DetectionReport evaluate(const std::vector<int>& detected, const std::vector<int>& labels,
                         int tolerance_samples) {
    if (tolerance_samples < 0) throw ConfigError("evaluate: tolerance must be non-negative");
    for (std::size_t i = 1; i < detected.size(); ++i)
        if (detected[i] < detected[i - 1]) throw UsageError("evaluate: detections must be sorted");
    for (std::size_t i = 1; i < labels.size(); ++i)
        if (labels[i] < labels[i - 1]) throw UsageError("evaluate: labels must be sorted");

    DetectionReport rep;
    std::size_t i = 0, j = 0;
    while (i < detected.size() && j < labels.size()) {
        const long diff = static_cast<long>(detected[i]) - static_cast<long>(labels[j]);
        if (std::labs(diff) <= tolerance_samples) {
            ++rep.tp, ++i, ++j;
        } else if (diff < 0) {
            ++rep.fp, ++i;
        } else {
            ++rep.fn, ++j;
        }
    }
    rep.fp += static_cast<long>(detected.size() - i);
    rep.fn += static_cast<long>(labels.size() - j);
    const double denom = static_cast<double>(2 * rep.tp + rep.fp + rep.fn);
    rep.f1 = denom > 0.0 ? 2.0 * static_cast<double>(rep.tp) / denom : 0.0;
    return rep;
}

DetectionReport merge_reports(const std::vector<DetectionReport>& parts) {
    DetectionReport total;
    for (const DetectionReport& p : parts) {
        total.tp += p.tp;
        total.fp += p.fp;
        total.fn += p.fn;
    }
    const double denom = static_cast<double>(2 * total.tp + total.fp + total.fn);
    total.f1 = denom > 0.0 ? 2.0 * static_cast<double>(total.tp) / denom : 0.0;
    return total;
}

std::vector<TableRow> run_experiment(const Dataset& ds, const std::vector<int>& channel_widths,
                                     const TrainConfig& base, std::vector<StageHistories>* histories) {
    const std::vector<EcgRecord> train = split_records(ds, Split::Train);
    const std::vector<EcgRecord> test = split_records(ds, Split::Test);
    if (train.empty() || test.empty()) throw ConfigError("run_experiment: both splits must be non-empty");
    const double fs = static_cast<double>(ds.manifest.fs);

    std::vector<TableRow> locals, globals;
    for (int C : channel_widths) {
        TrainConfig cfg = base;
        cfg.channels = C;
        auto [f, hist1] = train_stage1(train, cfg);

        std::vector<DetectionReport> local_parts;
        for (const EcgRecord& r : test) {
            const auto det = pick_candidates(local_probability(f, r), kCandidateThreshold,
                                             kMinPeakSeparationS, fs);
            local_parts.push_back(evaluate(det, r.labels));
        }
        const DetectionReport lr = merge_reports(local_parts);
        locals.push_back(TableRow{"local", C, lr.tp, lr.fp, lr.fn, lr.f1});

        auto [g, hist2] = train_stage2(train, f, cfg);
        std::vector<DetectionReport> global_parts;
        for (const EcgRecord& r : test) {
            const InferenceTrace tr = infer(f, g, r, ds.manifest.fs);
            global_parts.push_back(evaluate(tr.detected, tr.labels));
        }
        const DetectionReport gr = merge_reports(global_parts);
        globals.push_back(TableRow{"global", C, gr.tp, gr.fp, gr.fn, gr.f1});

        if (histories) histories->push_back(StageHistories{C, std::move(hist1), std::move(hist2)});
    }
    locals.insert(locals.end(), globals.begin(), globals.end());
    return locals;
}

std::string format_table_csv(const std::vector<TableRow>& rows) {
    std::string out = "type,channels,tp,fp,fn,f1\n";
    char buf[128];
    for (const TableRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%ld,%ld,%ld,%.4f\n", r.type.c_str(), r.channels, r.tp, r.fp,
                      r.fn, r.f1);
        out += buf;
    }
    return out;
}

}  // namespace renn
