#include "renn/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>

#include "renn/errors.hpp"
#include "renn/rng.hpp"

namespace renn {

static const char* kRecordHeader = "sample,voltage_mv,label";

void write_record_csv(const EcgRecord& rec, const std::filesystem::path& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << kRecordHeader << '\n';
    std::set<int> labels(rec.labels.begin(), rec.labels.end());
    char buf[64];
    for (std::size_t i = 0; i < rec.signal.size(); ++i) {
        const int flag = labels.count(static_cast<int>(i)) ? 1 : 0;
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%d\n", i, rec.signal[i], flag);
        f << buf;
    }
    if (!f) throw IoError("short write to " + path.string());
}

static std::string next_line(std::istream& in) {
    std::string line;
    std::getline(in, line);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

EcgRecord read_record_csv(const std::filesystem::path& path, int fs) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    if (next_line(f) != kRecordHeader)
        throw CsvError(path.string() + ": expected header '" + kRecordHeader + "'");
    EcgRecord rec;
    rec.fs = fs;
    rec.record_id = path.stem().string();
    long expected = 0;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t c1 = line.find(',');
        const std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
            throw CsvError(path.string() + ": expected three fields, got '" + line + "'");
        char* end = nullptr;
        const std::string s0 = line.substr(0, c1);
        const long sample = std::strtol(s0.c_str(), &end, 10);
        if (end == s0.c_str() || *end != '\0')
            throw CsvError(path.string() + ": bad sample index '" + s0 + "'");
        if (sample != expected) {
            if (sample < expected)
                throw LabelError(path.string() + ": sample index " + std::to_string(sample) +
                                 " out of order (expected " + std::to_string(expected) + ")");
            throw CsvError(path.string() + ": sample index gap (expected " + std::to_string(expected) + ")");
        }
        const std::string s1 = line.substr(c1 + 1, c2 - c1 - 1);
        const double v = std::strtod(s1.c_str(), &end);
        if (end == s1.c_str() || *end != '\0' || !std::isfinite(v))
            throw CsvError(path.string() + ": bad voltage '" + s1 + "'");
        const std::string s2 = line.substr(c2 + 1);
        if (s2 != "0" && s2 != "1")
            throw CsvError(path.string() + ": label flag must be 0 or 1, got '" + s2 + "'");
        rec.signal.push_back(v);
        if (s2 == "1") rec.labels.push_back(static_cast<int>(sample));
        ++expected;
    }
    return rec;
}

static const char* split_name(Split s) { return s == Split::Train ? "train" : "test"; }

void write_dataset(const std::vector<EcgRecord>& records, const DatasetManifest& manifest,
                   const std::filesystem::path& dir) {
    if (records.size() != manifest.entries.size())
        throw ConfigError("write_dataset: record/manifest count mismatch");
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < records.size(); ++i)
        write_record_csv(records[i], dir / manifest.entries[i].path);

    std::ofstream mf(dir / "manifest.csv", std::ios::binary | std::ios::trunc);
    if (!mf) throw IoError("cannot write manifest in " + dir.string());
    mf << "path,split\n";
    for (const ManifestEntry& e : manifest.entries) mf << e.path << ',' << split_name(e.split) << '\n';

    std::ofstream meta(dir / "meta", std::ios::binary | std::ios::trunc);
    if (!meta) throw IoError("cannot write meta in " + dir.string());
    meta << "fs=" << manifest.fs << "\nversion=" << manifest.version << '\n';
}

// key=value sidecar shared by datasets and model directories
static int parse_meta_int(const std::filesystem::path& path, const std::string& key) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.rfind(key + "=", 0) == 0) {
            const std::string v = line.substr(key.size() + 1);
            char* end = nullptr;
            const long n = std::strtol(v.c_str(), &end, 10);
            if (end == v.c_str() || *end != '\0')
                throw CsvError(path.string() + ": bad value for " + key + ": '" + v + "'");
            return static_cast<int>(n);
        }
    }
    throw CsvError(path.string() + ": missing " + key);
}

Dataset read_dataset(const std::filesystem::path& dir, int expected_fs) {
    const auto meta = dir / "meta";
    DatasetManifest manifest;
    manifest.version = parse_meta_int(meta, "version");
    if (manifest.version != 1)
        throw VersionError(meta.string() + ": unsupported dataset version " +
                           std::to_string(manifest.version));
    manifest.fs = parse_meta_int(meta, "fs");
    if (manifest.fs < 1) throw CsvError(meta.string() + ": fs must be positive");
    if (expected_fs > 0 && manifest.fs != expected_fs)
        throw FsMismatchError(dir.string() + ": dataset is sampled at " + std::to_string(manifest.fs) +
                              " Hz, expected " + std::to_string(expected_fs));

    std::ifstream mf(dir / "manifest.csv", std::ios::binary);
    if (!mf) throw IoError("cannot open manifest in " + dir.string());
    if (next_line(mf) != "path,split") throw CsvError(dir.string() + ": manifest header must be 'path,split'");
    Dataset ds;
    ds.manifest = manifest;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(mf, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t c = line.find(',');
        if (c == std::string::npos || line.find(',', c + 1) != std::string::npos)
            throw CsvError(dir.string() + ": bad manifest row '" + line + "'");
        ManifestEntry e;
        e.path = line.substr(0, c);
        const std::string s = line.substr(c + 1);
        if (s == "train")
            e.split = Split::Train;
        else if (s == "test")
            e.split = Split::Test;
        else
            throw CsvError(dir.string() + ": split must be train or test, got '" + s + "'");
        if (!seen.insert(e.path).second) throw CsvError(dir.string() + ": duplicate record path " + e.path);
        ds.manifest.entries.push_back(e);
        ds.records.push_back(read_record_csv(dir / e.path, ds.manifest.fs));
    }
    return ds;
}

std::vector<EcgRecord> split_records(const Dataset& ds, Split split) {
    std::vector<EcgRecord> out;
    for (std::size_t i = 0; i < ds.records.size(); ++i)
        if (ds.manifest.entries[i].split == split) out.push_back(ds.records[i]);
    return out;
}

Dataset make_dataset(const GenOptions& opt) {
    if (opt.count < 1) throw ConfigError("make_dataset: count must be positive");
    if (!(opt.noise_level >= 0.0)) throw ConfigError("make_dataset: noise level must be non-negative");
    auto pick = [](double explicit_v, double fallback) { return std::isnan(explicit_v) ? fallback : explicit_v; };
    NoiseConfig noise;
    noise.white_sigma_mv = pick(opt.white_sigma_mv, 0.03 * opt.noise_level);
    noise.baseline_amp_mv = pick(opt.baseline_amp_mv, 0.12 * opt.noise_level);
    noise.baseline_freq_hz = pick(opt.baseline_freq_hz, 0.30);
    noise.ac_amp_mv = pick(opt.ac_amp_mv, 0.05 * opt.noise_level);
    noise.ac_freq_hz = pick(opt.ac_freq_hz, 50.0);
    noise.dropout_prob = std::min(0.5, pick(opt.dropout_prob, 0.02 * opt.noise_level));

    Dataset ds;
    ds.manifest.fs = opt.fs;
    const int n_test = opt.count / 5;  // 80/20 split by index order
    char name[32];
    for (int i = 0; i < opt.count; ++i) {
        Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(i)));
        SynthConfig sc;
        sc.duration_s = opt.duration_s;
        sc.fs = opt.fs;
        sc.rr_jitter_s = opt.rr_jitter_s;
        sc.mean_rr_s = std::isnan(opt.mean_rr_s) ? rng.uniform(0.6, 1.0) : opt.mean_rr_s;
        sc.r_amplitude_mv = std::isnan(opt.r_amplitude_mv) ? rng.uniform(0.2, 1.0) : opt.r_amplitude_mv;
        sc.noise = noise;
        sc.seed = rng.next_u64();
        EcgRecord rec = synth_ecg(sc);
        rec = add_noise(rec, noise, rng.next_u64());
        rec = bandpass(rec);
        std::snprintf(name, sizeof name, "rec%04d", i);
        rec.record_id = name;
        ds.records.push_back(std::move(rec));
        ManifestEntry e;
        e.path = std::string(name) + ".csv";
        e.split = i < opt.count - n_test ? Split::Train : Split::Test;
        ds.manifest.entries.push_back(e);
    }
    return ds;
}

}  // namespace renn
