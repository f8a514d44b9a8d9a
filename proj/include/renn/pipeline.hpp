#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "renn/dataset_io.hpp"
#include "renn/ecgsynth.hpp"
#include "renn/fcn.hpp"

namespace renn {

struct TrainConfig {
    int channels = 8;
    int epochs = 20;
    double lr0 = 1e-4;
    double decay_rate = 0.99;
    long decay_every_steps = 1000;
    double w_pos = 0.0;  // <= 0: negative/positive sample ratio, capped
    std::uint64_t seed = 1;
};

inline constexpr double kWPosCap = 100.0;

double lr_at(const TrainConfig& cfg, long step);  // step counts from 0
double resolve_w_pos(const std::vector<EcgRecord>& records, double w_pos);

struct LossHistory {
    std::vector<double> epoch_loss;                    // mean per-record loss per epoch
    std::vector<std::pair<long, double>> lr_samples;   // (steps taken, lr) at each epoch end
};

// Stage one: the feature mapper f, one channel in, trained on the raw signal
// against the peak labels. Comes back frozen (inference mode).
std::pair<Model, LossHistory> train_stage1(const std::vector<EcgRecord>& records, const TrainConfig& cfg);

// Stage two: the global mapper g over [signal; rule map; peak probability],
// with f frozen. f must already be in inference mode.
std::pair<Model, LossHistory> train_stage2(const std::vector<EcgRecord>& records, const Model& f,
                                           const TrainConfig& cfg);

// f's positive-channel probability over the record, trimmed to its length.
std::vector<double> local_probability(const Model& f, const EcgRecord& rec);

struct InferenceTrace {
    std::vector<double> x, f_pos, r, o_pos;
    std::vector<int> detected, labels;
};

// Full two-model pass over one record plus peak picking on the output map.
// expected_fs of 0 skips the rate check.
InferenceTrace infer(const Model& f, const Model& g, const EcgRecord& rec, int expected_fs = 0);

struct DetectionReport {
    long tp = 0, fp = 0, fn = 0;
    double f1 = 0.0;
};

// Greedy one-to-one matching in time order with an inclusive tolerance.
// Both index lists must be ascending.
DetectionReport evaluate(const std::vector<int>& detected, const std::vector<int>& labels,
                         int tolerance_samples = 2);

DetectionReport merge_reports(const std::vector<DetectionReport>& parts);

struct TableRow {
    std::string type;  // "local" or "global"
    int channels = 0;
    long tp = 0, fp = 0, fn = 0;
    double f1 = 0.0;
};

struct StageHistories {
    int channels = 0;
    LossHistory stage1, stage2;
};

// Trains both stages per channel width and scores the test split twice: from
// f's own map ("local") and from the full pass ("global"). Local rows come
// first, then global rows, each ordered by channel width.
std::vector<TableRow> run_experiment(const Dataset& ds, const std::vector<int>& channel_widths,
                                     const TrainConfig& base, std::vector<StageHistories>* histories = nullptr);

std::string format_table_csv(const std::vector<TableRow>& rows);

}  // namespace renn
