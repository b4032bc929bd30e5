#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "tsadapt/data.hpp"
#include "tsadapt/errors.hpp"

using namespace tsadapt;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& contents) {
        static int counter = 0;
        path = "tsadapt_test_" + std::to_string(counter++) + ".csv";
        std::ofstream(path) << contents;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

SeriesTable table_of(std::size_t rows, std::size_t vars) {
    SeriesTable t;
    t.n_rows = rows;
    t.n_vars = vars;
    t.values.resize(rows * vars);
    for (std::size_t i = 0; i < t.values.size(); ++i)
        t.values[i] = static_cast<double>(i);
    return t;
}

}  // namespace

TEST_CASE("csv ingestion") {
    TempFile f("a,b\n1,2\n3,4\n5,6\n");
    CsvSchema schema;
    SeriesTable t = load_csv(f.path, schema, "toy");
    CHECK(t.n_rows == 3);
    CHECK(t.n_vars == 2);
    CHECK(t.at(0, 0) == 1.0);
    CHECK(t.at(2, 1) == 6.0);

    TempFile ts("date,x\n2020-01-01,1.5\n2020-01-02,2.5\n");
    CsvSchema with_ts;
    with_ts.has_timestamp_column = true;
    SeriesTable t2 = load_csv(ts.path, with_ts);
    CHECK(t2.n_vars == 1);
    CHECK(t2.at(1, 0) == 2.5);
    CHECK(t2.timestamps.size() == 2);
    CHECK(t2.timestamps[0] == "2020-01-01");
}

TEST_CASE("csv rejects non-finite cells with coordinates") {
    TempFile f("a,b\n1,2\n3,nan\n");
    try {
        load_csv(f.path, CsvSchema{});
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        // file line 3, value column 2
        CHECK(msg.find("3") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
        CHECK(msg.find("nan") != std::string::npos);
    }

    TempFile bad("a,b\n1,2\n3\n");
    CHECK_THROWS_AS(load_csv(bad.path, CsvSchema{}), ValidationError);

    TempFile cols("a,b\n1,2\n");
    CsvSchema expect3;
    expect3.expected_columns = 3;
    CHECK_THROWS_AS(load_csv(cols.path, expect3), ValidationError);

    CHECK_THROWS_AS(load_csv("does_not_exist.csv", CsvSchema{}), ValidationError);
}

TEST_CASE("window counting formula") {
    // T=10 rows, L=4, horizon=2 → 10-4-2+1 = 5 windows at stride 1.
    CHECK(window_count(10, 4, 2, 1) == 5);
    CHECK(window_count(10, 4, 2, 2) == 3);  // starts 0,2,4
    CHECK(window_count(5, 4, 2, 1) == 0);   // too short
    CHECK(window_count(6, 4, 2, 1) == 1);
}

TEST_CASE("window count matches exhaustive enumeration") {
    const std::size_t Ls[] = {1, 3, 7}, hs[] = {1, 2, 5}, strides[] = {1, 2, 3};
    for (std::size_t len = 1; len <= 50; ++len) {
        for (std::size_t L : Ls) {
            for (std::size_t h : hs) {
                for (std::size_t stride : strides) {
                    std::size_t brute = 0;
                    for (std::size_t s = 0; s + L + h <= len; s += stride) ++brute;
                    CHECK(window_count(len, L, h, stride) == brute);
                }
            }
        }
    }
}

TEST_CASE("splits never leak across boundaries") {
    SeriesTable t = table_of(100, 1);
    SplitSpec split = SplitSpec::from_ratios(100, 0.7, 0.1);
    CHECK(split.train_end == 70);
    CHECK(split.val_end == 80);

    DatasetWindows w = make_windows(t, 8, 4, split);
    CHECK(w.train.size() == window_count(70, 8, 4));
    CHECK(w.val.size() == window_count(10, 8, 4));
    CHECK(w.test.size() == window_count(20, 8, 4));

    // Every train window (input + target) ends before row 70; val windows
    // live in [70, 80); test in [80, 100).
    for (const Window& win : w.train.windows) CHECK(win.start + 8 + 4 <= 70);
    for (const Window& win : w.val.windows) {
        CHECK(win.start >= 70);
        CHECK(win.start + 8 + 4 <= 80);
    }
    for (const Window& win : w.test.windows) {
        CHECK(win.start >= 80);
        CHECK(win.start + 8 + 4 <= 100);
    }

    // Window contents come straight from the table.
    const Window& first = w.train.windows[0];
    CHECK(first.input.at(0, 0) == t.at(first.start, 0));
    CHECK(first.target.at(0, 0) == t.at(first.start + 8, 0));
}

TEST_CASE("few-shot keeps a chronological prefix and nests") {
    SeriesTable t = table_of(200, 2);
    auto train_starts = [&](double frac) {
        SplitSpec split = SplitSpec::from_ratios(200, 0.7, 0.1);
        split.few_shot_fraction = frac;
        DatasetWindows w = make_windows(t, 8, 4, split);
        std::vector<std::size_t> starts;
        for (const Window& win : w.train.windows) starts.push_back(win.start);
        return starts;
    };
    auto full = train_starts(1.0);
    auto ten = train_starts(0.10);
    auto five = train_starts(0.05);
    CHECK(ten.size() <= full.size() / 9);  // ~10%
    CHECK(five.size() <= ten.size());
    CHECK(!five.empty());  // never degenerates to zero windows
    // prefix nesting: five ⊂ ten ⊂ full, all aligned at the front
    for (std::size_t i = 0; i < five.size(); ++i) CHECK(five[i] == ten[i]);
    for (std::size_t i = 0; i < ten.size(); ++i) CHECK(ten[i] == full[i]);
}

TEST_CASE("zero-shot horizons and pairing") {
    CHECK(zero_shot_horizon(Frequency::yearly) == 6);
    CHECK(zero_shot_horizon(Frequency::quarterly) == 8);
    CHECK(zero_shot_horizon(Frequency::monthly) == 18);
    CHECK_THROWS_AS(zero_shot_horizon(Frequency::hourly), DomainError);

    SeriesTable y1 = table_of(50, 1);
    y1.frequency = Frequency::yearly;
    y1.name = "src-year";
    SeriesTable m1 = table_of(80, 1);
    m1.frequency = Frequency::monthly;
    m1.name = "src-month";
    SeriesTable y2 = table_of(40, 1);
    y2.frequency = Frequency::yearly;
    y2.name = "tgt-year";

    std::vector<SeriesTable> sources{y1, m1};
    std::vector<SeriesTable> targets{y2};
    auto plans = zero_shot_pair(sources, targets);
    REQUIRE(plans.size() == 1);
    CHECK(plans[0].frequency == Frequency::yearly);
    CHECK(plans[0].horizon == 6);
    CHECK(plans[0].source->name == "src-year");
    CHECK(plans[0].target->name == "tgt-year");

    SeriesTable q = table_of(30, 1);
    q.frequency = Frequency::quarterly;
    CHECK_THROWS_AS(zero_shot_pair({y1}, {q}), DomainError);
}

TEST_CASE("frequency string roundtrip") {
    for (Frequency f : {Frequency::hourly, Frequency::min15, Frequency::min10,
                        Frequency::yearly, Frequency::quarterly, Frequency::monthly}) {
        CHECK(frequency_from_string(frequency_to_string(f)) == f);
    }
    CHECK_THROWS_AS(frequency_from_string("fortnightly"), ValidationError);
}

TEST_CASE("synth determinism and structure") {
    SeriesTable a = synth(SynthKind::multi_sine, 128, 3, 42);
    SeriesTable b = synth(SynthKind::multi_sine, 128, 3, 42);
    CHECK(a.values == b.values);
    SeriesTable c = synth(SynthKind::multi_sine, 128, 3, 43);
    CHECK(a.values != c.values);
    CHECK(a.n_rows == 128);
    CHECK(a.n_vars == 3);
    for (double v : a.values) CHECK(std::isfinite(v));

    // Noise-free multi-sine is exactly periodic at the common period (LCM of
    // 24 and 96 = 96), so a seasonal-naive forecast is perfect.
    SynthParams clean;
    clean.noise_sigma = 0.0;
    SeriesTable s = synth(SynthKind::multi_sine, 400, 1, 7, clean);
    for (std::size_t t = 96; t < 400; ++t)
        CHECK(s.at(t, 0) == doctest::Approx(s.at(t - 96, 0)).epsilon(1e-9));

    SeriesTable tr = synth(SynthKind::trend_season_noise, 64, 2, 3);
    CHECK(tr.n_rows == 64);
}

TEST_CASE("csv writer roundtrips synth") {
    SeriesTable s = synth(SynthKind::multi_sine, 20, 2, 9);
    TempFile f(series_to_csv(s));
    SeriesTable back = load_csv(f.path, CsvSchema{});
    REQUIRE(back.n_rows == 20);
    REQUIRE(back.n_vars == 2);
    for (std::size_t i = 0; i < s.values.size(); ++i)
        CHECK(back.values[i] == s.values[i]);  // shortest round-trip formatting
}
