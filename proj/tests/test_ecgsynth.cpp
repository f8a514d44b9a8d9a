#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "renn/dataset_io.hpp"
#include "renn/ecgsynth.hpp"
#include "renn/errors.hpp"
#include "testutil.hpp"

using namespace renn;

namespace {

SynthConfig clean_config() {
    SynthConfig cfg;
    cfg.duration_s = 12.0;
    cfg.fs = 125;
    cfg.mean_rr_s = 0.8;
    cfg.rr_jitter_s = 0.0;
    cfg.r_amplitude_mv = 1.0;
    cfg.seed = 7;
    return cfg;
}

double rms(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += v[i] * v[i];
    return std::sqrt(s / static_cast<double>(hi - lo));
}

EcgRecord sine_record(double freq_hz, double duration_s, int fs) {
    EcgRecord rec;
    rec.fs = fs;
    const std::size_t n = static_cast<std::size_t>(duration_s * fs);
    for (std::size_t i = 0; i < n; ++i)
        rec.signal.push_back(std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / fs));
    return rec;
}

}  // namespace

TEST_CASE("jitter-free train puts beats on a fixed grid") {
    const EcgRecord rec = synth_ecg(clean_config());
    CHECK(rec.signal.size() == 1500);
    std::vector<int> want;
    for (int i = 0; i < 14; ++i) want.push_back(50 + 100 * i);
    CHECK(rec.labels == want);  // a 15th beat would spill its tail past the record
}

TEST_CASE("labelled samples carry the configured amplitude") {
    SynthConfig cfg = clean_config();
    cfg.r_amplitude_mv = 0.65;
    const EcgRecord rec = synth_ecg(cfg);
    for (int lab : rec.labels)
        CHECK(rec.signal[static_cast<std::size_t>(lab)] == doctest::Approx(0.65).epsilon(1e-4));
}

TEST_CASE("synthesis is a pure function of its config") {
    SynthConfig cfg = clean_config();
    cfg.rr_jitter_s = 0.02;
    const EcgRecord a = synth_ecg(cfg);
    const EcgRecord b = synth_ecg(cfg);
    CHECK(a.signal == b.signal);
    CHECK(a.labels == b.labels);
    cfg.seed = 8;
    const EcgRecord c = synth_ecg(cfg);
    CHECK(a.labels != c.labels);
}

TEST_CASE("synthesis rejects unusable configs") {
    auto bad = [](auto mutate) {
        SynthConfig cfg = clean_config();
        mutate(cfg);
        CHECK_THROWS_AS(synth_ecg(cfg), ConfigError);
    };
    bad([](SynthConfig& c) { c.duration_s = 0.0; });
    bad([](SynthConfig& c) { c.fs = 0; });
    bad([](SynthConfig& c) { c.mean_rr_s = 0.2; });
    bad([](SynthConfig& c) { c.mean_rr_s = 1.6; });
    bad([](SynthConfig& c) { c.rr_jitter_s = -0.01; });
    bad([](SynthConfig& c) { c.rr_jitter_s = 0.2; });  // a quarter of the mean interval
    bad([](SynthConfig& c) { c.r_amplitude_mv = 0.0; });
    bad([](SynthConfig& c) { c.noise.dropout_prob = 1.5; });
}

TEST_CASE("interval statistics follow the jitter setting") {
    SynthConfig cfg = clean_config();
    cfg.duration_s = 500.0;
    cfg.rr_jitter_s = 0.02;
    const EcgRecord rec = synth_ecg(cfg);
    REQUIRE(rec.labels.size() > 500);
    std::vector<double> dt;
    for (std::size_t i = 1; i < rec.labels.size(); ++i)
        dt.push_back((rec.labels[i] - rec.labels[i - 1]) / 125.0);
    double mean = 0.0;
    for (double x : dt) mean += x;
    mean /= static_cast<double>(dt.size());
    double var = 0.0;
    for (double x : dt) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(dt.size()));
    CHECK(std::abs(mean - 0.8) < 0.016);
    CHECK(std::abs(sd - 0.02) < 0.003);
}

TEST_CASE("dropout removes whole beats") {
    SynthConfig cfg = clean_config();
    const std::size_t full = synth_ecg(cfg).labels.size();
    cfg.noise.dropout_prob = 0.4;
    const EcgRecord rec = synth_ecg(cfg);
    CHECK(rec.labels.size() < full);
    // surviving beats keep their grid positions
    for (int lab : rec.labels) CHECK((lab - 50) % 100 == 0);
}

TEST_CASE("zero-amplitude noise is the identity") {
    const EcgRecord rec = synth_ecg(clean_config());
    const EcgRecord out = add_noise(rec, NoiseConfig{}, 3);
    CHECK(out.signal == rec.signal);
    CHECK(out.labels == rec.labels);
    NoiseConfig neg;
    neg.white_sigma_mv = -0.1;
    CHECK_THROWS_AS(add_noise(rec, neg, 3), ConfigError);
}

TEST_CASE("noise perturbs the waveform but not the labels") {
    const EcgRecord rec = synth_ecg(clean_config());
    NoiseConfig n;
    n.white_sigma_mv = 0.05;
    n.baseline_amp_mv = 0.1;
    n.ac_amp_mv = 0.05;
    const EcgRecord a = add_noise(rec, n, 3);
    CHECK(a.signal != rec.signal);
    CHECK(a.labels == rec.labels);
    CHECK(add_noise(rec, n, 3).signal == a.signal);
    CHECK(add_noise(rec, n, 4).signal != a.signal);
}

TEST_CASE("band-pass removes a constant offset completely") {
    EcgRecord rec;
    rec.fs = 125;
    rec.signal.assign(1000, 1.0);
    const EcgRecord out = bandpass(rec);
    for (double v : out.signal) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("band-pass keeps the QRS band and rejects the edges") {
    const std::size_t lo = 250, hi = 2250;  // central window, transients excluded
    const EcgRecord in10 = sine_record(10.0, 20.0, 125);
    const double r10 = rms(bandpass(in10).signal, lo, hi) / rms(in10.signal, lo, hi);
    CHECK(r10 > 0.708);  // within 3 dB
    CHECK(r10 < 1.02);

    const EcgRecord in50 = sine_record(50.0, 20.0, 125);
    const double r50 = rms(bandpass(in50).signal, lo, hi) / rms(in50.signal, lo, hi);
    CHECK(r50 < 0.1);  // at least 20 dB down

    const EcgRecord in02 = sine_record(0.2, 20.0, 125);
    const double r02 = rms(bandpass(in02).signal, lo, hi) / rms(in02.signal, lo, hi);
    CHECK(r02 < 0.01);
}

TEST_CASE("zero-phase filtering leaves R peaks in place") {
    const EcgRecord rec = synth_ecg(clean_config());
    const EcgRecord out = bandpass(rec);
    for (int lab : rec.labels) {
        int am = lab - 4;
        for (int i = lab - 4; i <= lab + 4; ++i)
            if (out.signal[static_cast<std::size_t>(i)] > out.signal[static_cast<std::size_t>(am)]) am = i;
        CHECK(std::abs(am - lab) <= 1);
    }
}

TEST_CASE("band-pass needs headroom above its corner frequencies") {
    EcgRecord rec;
    rec.fs = 64;
    rec.signal.assign(100, 0.0);
    CHECK_THROWS_AS(bandpass(rec), ConfigError);
}

TEST_CASE("record files round-trip bit for bit") {
    testutil::TmpDir tmp("record-csv");
    SynthConfig cfg = clean_config();
    cfg.rr_jitter_s = 0.02;
    NoiseConfig n;
    n.white_sigma_mv = 0.03;
    const EcgRecord rec = add_noise(synth_ecg(cfg), n, 5);
    const auto path = tmp.path() / "r1.csv";
    write_record_csv(rec, path);
    const EcgRecord back = read_record_csv(path, 125);
    CHECK(back.signal == rec.signal);
    CHECK(back.labels == rec.labels);
    CHECK(back.fs == 125);
    CHECK(back.record_id == "r1");
}

TEST_CASE("malformed record rows are rejected with the right errors") {
    testutil::TmpDir tmp("record-bad");
    auto write = [&](const char* name, const std::string& body) {
        std::ofstream(tmp.path() / name, std::ios::binary) << body;
        return tmp.path() / name;
    };
    const std::string head = "sample,voltage_mv,label\n";
    CHECK_THROWS_AS(read_record_csv(tmp.path() / "missing.csv", 125), IoError);
    CHECK_THROWS_AS(read_record_csv(write("h.csv", "a,b\n0,1,0\n"), 125), CsvError);
    CHECK_THROWS_AS(read_record_csv(write("f.csv", head + "0,1.0,2\n"), 125), CsvError);
    CHECK_THROWS_AS(read_record_csv(write("v.csv", head + "0,abc,0\n"), 125), CsvError);
    CHECK_THROWS_AS(read_record_csv(write("c.csv", head + "0,1.0,0,9\n"), 125), CsvError);
    CHECK_THROWS_AS(read_record_csv(write("g.csv", head + "0,1.0,0\n2,1.0,0\n"), 125), CsvError);
    CHECK_THROWS_AS(read_record_csv(write("o.csv", head + "0,1.0,0\n0,1.0,0\n"), 125), LabelError);
}

TEST_CASE("dataset directories round-trip") {
    testutil::TmpDir tmp("dataset-trip");
    GenOptions opt;
    opt.count = 5;
    opt.duration_s = 8.0;
    opt.seed = 11;
    const Dataset ds = make_dataset(opt);
    write_dataset(ds.records, ds.manifest, tmp.path() / "d");
    const Dataset back = read_dataset(tmp.path() / "d");
    REQUIRE(back.records.size() == 5);
    CHECK(back.manifest.fs == 125);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(back.records[i].signal == ds.records[i].signal);
        CHECK(back.records[i].labels == ds.records[i].labels);
        CHECK(back.manifest.entries[i].split == ds.manifest.entries[i].split);
    }
    CHECK_THROWS_AS(read_dataset(tmp.path() / "d", 250), FsMismatchError);
    CHECK(read_dataset(tmp.path() / "d", 125).records.size() == 5);
}

TEST_CASE("dataset sidecar and manifest are validated") {
    testutil::TmpDir tmp("dataset-bad");
    GenOptions opt;
    opt.count = 2;
    opt.duration_s = 6.0;
    const Dataset ds = make_dataset(opt);

    write_dataset(ds.records, ds.manifest, tmp.path() / "v");
    std::ofstream(tmp.path() / "v" / "meta", std::ios::binary) << "fs=125\nversion=2\n";
    CHECK_THROWS_AS(read_dataset(tmp.path() / "v"), VersionError);

    write_dataset(ds.records, ds.manifest, tmp.path() / "m");
    std::ofstream(tmp.path() / "m" / "meta", std::ios::binary) << "version=1\n";
    CHECK_THROWS_AS(read_dataset(tmp.path() / "m"), CsvError);

    write_dataset(ds.records, ds.manifest, tmp.path() / "s");
    std::ofstream(tmp.path() / "s" / "manifest.csv", std::ios::binary)
        << "path,split\nrec0000.csv,dev\n";
    CHECK_THROWS_AS(read_dataset(tmp.path() / "s"), CsvError);

    write_dataset(ds.records, ds.manifest, tmp.path() / "dup");
    std::ofstream(tmp.path() / "dup" / "manifest.csv", std::ios::binary)
        << "path,split\nrec0000.csv,train\nrec0000.csv,test\n";
    CHECK_THROWS_AS(read_dataset(tmp.path() / "dup"), CsvError);

    CHECK_THROWS_AS(read_dataset(tmp.path() / "nowhere"), IoError);
}

TEST_CASE("generated corpora split four to one") {
    GenOptions opt;
    opt.count = 10;
    opt.duration_s = 6.0;
    const Dataset ds = make_dataset(opt);
    CHECK(split_records(ds, Split::Train).size() == 8);
    CHECK(split_records(ds, Split::Test).size() == 2);
    // the tail of the index order is the held-out part
    CHECK(ds.manifest.entries[7].split == Split::Train);
    CHECK(ds.manifest.entries[8].split == Split::Test);
}

TEST_CASE("generated records are deterministic and well-formed") {
    GenOptions opt;
    opt.count = 3;
    opt.duration_s = 8.0;
    opt.seed = 21;
    const Dataset a = make_dataset(opt);
    const Dataset b = make_dataset(opt);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].signal == b.records[i].signal);
        CHECK(a.records[i].labels == b.records[i].labels);
        REQUIRE(!a.records[i].labels.empty());
        for (std::size_t j = 1; j < a.records[i].labels.size(); ++j)
            CHECK(a.records[i].labels[j] > a.records[i].labels[j - 1]);
        CHECK(a.records[i].labels.back() < static_cast<int>(a.records[i].signal.size()));
    }
    CHECK(a.records[0].signal != a.records[1].signal);

    CHECK_THROWS_AS(make_dataset(GenOptions{0}), ConfigError);
    GenOptions negnoise;
    negnoise.noise_level = -1.0;
    CHECK_THROWS_AS(make_dataset(negnoise), ConfigError);
}
