#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "renn/ecgsynth.hpp"

namespace renn {

enum class Split { Train, Test };

struct ManifestEntry {
    std::string path;  // record CSV, relative to the dataset directory
    Split split{};
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    int fs = 125;
    int version = 1;
};

struct Dataset {
    std::vector<EcgRecord> records;  // aligned with manifest.entries
    DatasetManifest manifest;
};

// One record per CSV with header "sample,voltage_mv,label"; voltages carry 17
// significant digits so a write-read trip is bit exact.
void write_record_csv(const EcgRecord& rec, const std::filesystem::path& path);
EcgRecord read_record_csv(const std::filesystem::path& path, int fs);

// Directory layout: manifest.csv (header "path,split"), a "meta" sidecar with
// fs=<int> and version=1 lines, and the record files.
void write_dataset(const std::vector<EcgRecord>& records, const DatasetManifest& manifest,
                   const std::filesystem::path& dir);
// expected_fs of 0 accepts whatever the sidecar declares.
Dataset read_dataset(const std::filesystem::path& dir, int expected_fs = 0);

std::vector<EcgRecord> split_records(const Dataset& ds, Split split);

// Defaults for generated corpora. NaN fields fall back to a per-record draw
// (mean RR and R amplitude) or to the noise-level-scaled default (noise).
struct GenOptions {
    int count = 500;
    std::uint64_t seed = 1;
    double noise_level = 1.0;
    double duration_s = 12.0;
    int fs = 125;
    double rr_jitter_s = 0.02;
    double mean_rr_s = NAN;        // default: uniform in [0.6, 1.0] per record
    double r_amplitude_mv = NAN;   // default: uniform in [0.2, 1.0] per record
    double white_sigma_mv = NAN;   // default: 0.03 * noise_level
    double baseline_amp_mv = NAN;  // default: 0.12 * noise_level
    double baseline_freq_hz = NAN;
    double ac_amp_mv = NAN;  // default: 0.05 * noise_level
    double ac_freq_hz = NAN;
    double dropout_prob = NAN;  // default: 0.02 * noise_level
};

// Independent per-record streams (seed hashed with the record index), noisy
// then band-passed, 80/20 train/test split in index order.
Dataset make_dataset(const GenOptions& opt);

}  // namespace renn
