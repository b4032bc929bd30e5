#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tsadapt/errors.hpp"
#include "tsadapt/metrics.hpp"

using namespace tsadapt;

namespace {

// Independent oracles: reverse-order accumulation, no shared helpers.
double oracle_mse(const std::vector<double>& y, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = y.size(); i-- > 0;) s += std::pow(y[i] - p[i], 2.0);
    return s / static_cast<double>(y.size());
}

double oracle_mae(const std::vector<double>& y, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = y.size(); i-- > 0;) s += std::fabs(y[i] - p[i]);
    return s / static_cast<double>(y.size());
}

double oracle_smape(const std::vector<double>& y, const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = y.size(); i-- > 0;) {
        const double d = std::fabs(y[i]) + std::fabs(p[i]);
        if (d != 0.0) s += 2.0 * std::fabs(y[i] - p[i]) / d;
    }
    return 100.0 * s / static_cast<double>(y.size());
}

double oracle_mase(const std::vector<double>& y, const std::vector<double>& p,
                   std::size_t m) {
    double denom = 0.0;
    for (std::size_t i = y.size(); i-- > m;) denom += std::fabs(y[i] - y[i - m]);
    denom /= static_cast<double>(y.size() - m);
    return oracle_mae(y, p) / denom;
}

ForecastPair random_pair(std::size_t n, std::uint64_t seed, std::size_t m = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(-5.0, 5.0);
    ForecastPair pr;
    pr.seasonal_period = m;
    for (std::size_t i = 0; i < n; ++i) {
        pr.truth.push_back(ud(rng));
        pr.pred.push_back(ud(rng));
    }
    return pr;
}

}  // namespace

TEST_CASE("point metrics agree with independent oracles on 100 instances") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        ForecastPair p = random_pair(16 + seed % 48, seed, 1 + seed % 4);
        CHECK(mse(p) == doctest::Approx(oracle_mse(p.truth, p.pred)).epsilon(1e-12));
        CHECK(mae(p) == doctest::Approx(oracle_mae(p.truth, p.pred)).epsilon(1e-12));
        CHECK(smape(p) == doctest::Approx(oracle_smape(p.truth, p.pred)).epsilon(1e-12));
        MetricValue m = mase(p);
        REQUIRE(m.defined);
        CHECK(m.value ==
              doctest::Approx(oracle_mase(p.truth, p.pred, p.seasonal_period)).epsilon(1e-12));
    }
}

TEST_CASE("hand examples") {
    ForecastPair p;
    p.truth = {1, 2, 3, 4};
    p.pred = {1, 2, 3, 8};
    CHECK(mse(p) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(mae(p) == doctest::Approx(1.0).epsilon(1e-15));
    // sMAPE: only last term nonzero: |4-8|/((4+8)/2) = 2/3; 100 * (2/3)/4
    CHECK(smape(p) == doctest::Approx(100.0 * (2.0 / 3.0) / 4.0).epsilon(1e-12));

    ForecastPair exact;
    exact.truth = {1, 2, 3};
    exact.pred = {1, 2, 3};
    CHECK(mse(exact) == 0.0);
    CHECK(mae(exact) == 0.0);
    CHECK(smape(exact) == 0.0);

    // MASE with m=1: naive denom = mean(|diff|) = (1+1+1)/3 = 1; MAE = 0.5
    ForecastPair mp;
    mp.truth = {1, 2, 3, 4};
    mp.pred = {1.5, 2.5, 3.5, 4.5};
    mp.seasonal_period = 1;
    MetricValue m = mase(mp);
    REQUIRE(m.defined);
    CHECK(m.value == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("smape edge cases and symmetry") {
    ForecastPair zeros;
    zeros.truth = {0, 0};
    zeros.pred = {0, 0};
    CHECK(smape(zeros) == 0.0);  // both-zero terms contribute nothing

    ForecastPair one_sided;
    one_sided.truth = {0.0};
    one_sided.pred = {2.0};
    CHECK(smape(one_sided) == doctest::Approx(200.0).epsilon(1e-12));  // saturates

    ForecastPair a = random_pair(32, 5);
    ForecastPair b = a;
    std::swap(b.truth, b.pred);
    CHECK(smape(a) == doctest::Approx(smape(b)).epsilon(1e-15));
}

TEST_CASE("metric scaling properties") {
    ForecastPair p = random_pair(40, 11);
    ForecastPair p2 = p;
    for (double& v : p2.truth) v *= 3.0;
    for (double& v : p2.pred) v *= 3.0;
    CHECK(mse(p2) == doctest::Approx(9.0 * mse(p)).epsilon(1e-12));
    CHECK(mae(p2) == doctest::Approx(3.0 * mae(p)).epsilon(1e-12));
    CHECK(smape(p2) == doctest::Approx(smape(p)).epsilon(1e-12));  // scale-free
    MetricValue m1 = mase(p), m2 = mase(p2);
    CHECK(m2.value == doctest::Approx(m1.value).epsilon(1e-12));   // scale-free
}

TEST_CASE("mase degenerate denominators") {
    ForecastPair flat;
    flat.truth = {2, 2, 2, 2};
    flat.pred = {1, 1, 1, 1};
    flat.seasonal_period = 1;
    MetricValue m = mase(flat);
    CHECK(!m.defined);
    CHECK(!m.reason.empty());

    ForecastPair periodic;
    periodic.truth = {1, 2, 1, 2, 1, 2};
    periodic.pred = {0, 0, 0, 0, 0, 0};
    periodic.seasonal_period = 2;
    CHECK(!mase(periodic).defined);

    ForecastPair tiny;
    tiny.truth = {1};
    tiny.pred = {1};
    tiny.seasonal_period = 1;
    CHECK_THROWS_AS(mase(tiny), DomainError);  // needs N > m
}

TEST_CASE("owa") {
    // Model identical to naive → both ratios 1 → OWA 1.
    ForecastPair naive = random_pair(24, 17, 2);
    MetricValue same = owa(naive, naive);
    REQUIRE(same.defined);
    CHECK(same.value == doctest::Approx(1.0).epsilon(1e-12));

    // Model literally equal to the truth → OWA 0... except sMAPE/MASE of a
    // perfect forecast are 0, so the half-sum is 0.
    ForecastPair perfect = naive;
    perfect.pred = perfect.truth;
    MetricValue v = owa(perfect, naive);
    REQUIRE(v.defined);
    CHECK(v.value == doctest::Approx(0.0).epsilon(1e-12));

    // Direct value check against the oracle composition.
    ForecastPair model = random_pair(24, 18, 2);
    model.truth = naive.truth;
    MetricValue o = owa(model, naive);
    REQUIRE(o.defined);
    const double want = 0.5 * (oracle_smape(model.truth, model.pred) /
                                   oracle_smape(naive.truth, naive.pred) +
                               oracle_mase(model.truth, model.pred, 2) /
                                   oracle_mase(naive.truth, naive.pred, 2));
    CHECK(o.value == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("classification metrics") {
    // tp=40, fp=10, tn=45, fn=5: acc=0.85, prec=0.8, rec=8/9
    ConfusionCounts c{40, 10, 45, 5};
    ClassificationMetrics m = classification_metrics(c);
    CHECK(m.accuracy.value == doctest::Approx(0.85).epsilon(1e-15));
    CHECK(m.precision.value == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(m.recall.value == doctest::Approx(40.0 / 45.0).epsilon(1e-15));
    // F1 is the harmonic mean of precision and recall.
    const double hm = 2.0 / (1.0 / m.precision.value + 1.0 / m.recall.value);
    CHECK(m.f1.value == doctest::Approx(hm).epsilon(1e-12));

    // No positive predictions → precision and F1 undefined, recall fine.
    ClassificationMetrics none = classification_metrics(ConfusionCounts{0, 0, 90, 10});
    CHECK(!none.precision.defined);
    CHECK(none.recall.defined);
    CHECK(none.recall.value == 0.0);
    CHECK(!none.f1.defined);

    CHECK_THROWS_AS(classification_metrics(ConfusionCounts{}), DomainError);
}

TEST_CASE("seasonal naive forecast repeats the last cycle") {
    std::vector<double> hist{1, 2, 3, 4, 5, 6};
    auto f = seasonal_naive_forecast(hist, 3, 5);
    CHECK(f == std::vector<double>{4, 5, 6, 4, 5});
    auto f1 = seasonal_naive_forecast(hist, 1, 3);
    CHECK(f1 == std::vector<double>{6, 6, 6});
    CHECK_THROWS_AS(seasonal_naive_forecast({1.0}, 3, 2), DomainError);

    CHECK(seasonal_period_for("yearly") == 1);
    CHECK(seasonal_period_for("quarterly") == 4);
    CHECK(seasonal_period_for("monthly") == 12);
    CHECK_THROWS_AS(seasonal_period_for("hourly"), DomainError);
}

TEST_CASE("report serialization keeps sorted keys and undefined markers") {
    MetricReport r;
    r.set("mse", MetricValue::of(1.5));
    r.set("mase", MetricValue::undefined("flat truth"));
    std::string j = r.to_json();
    CHECK(j.find("\"mase\"") != std::string::npos);
    CHECK(j.find("flat truth") != std::string::npos);
    CHECK(j.find("\"mase\"") < j.find("\"mse\""));
}
