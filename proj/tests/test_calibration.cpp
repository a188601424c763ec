#include "intellipred/calibration.hpp"
#include "intellipred/csv.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace intellipred;
using intellipred::support::TempDir;

namespace {

std::vector<CalibrationPair> synthesize(const MappingParams& truth, std::vector<double> xs)
{
    std::vector<CalibrationPair> out;
    for (double x : xs)
        out.push_back({x, logistic_apply(truth, x)});
    return out;
}

std::vector<double> linspace(double lo, double hi, int n)
{
    std::vector<double> xs;
    for (int i = 0; i < n; ++i)
        xs.push_back(lo + (hi - lo) * i / (n - 1));
    return xs;
}

} // namespace

TEST(LogisticApply, Examples)
{
    for (double x : {-100.0, 0.0, 3.5, 1e6})
        EXPECT_EQ(logistic_apply({0, 0}, x), 0.5);
    EXPECT_NEAR(logistic_apply({-1, 0}, std::log(3.0)), 0.75, 1e-15);

    const double tiny = logistic_apply({1, 0}, 1000.0);
    EXPECT_GT(tiny, 0.0);
    EXPECT_LE(tiny, 1e-300);
    const double big = logistic_apply({-1, 0}, 1000.0);
    EXPECT_LT(big, 1.0);
    EXPECT_GT(big, 0.999);
    EXPECT_THROW(logistic_apply({1, 0}, std::nan("")), ValidationError);
}

TEST(LogisticApply, StrictlyMonotoneInActiveRegion)
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int c = 0; c < 200; ++c) {
        const MappingParams p{u(rng), u(rng)};
        if (p.a == 0)
            continue;
        const double x0 = (-p.b) / p.a;
        const double x1 = x0 + 0.5 / std::abs(p.a);
        const double f0 = logistic_apply(p, x0), f1 = logistic_apply(p, x1);
        if (p.a > 0)
            EXPECT_LT(f1, f0);
        else
            EXPECT_GT(f1, f0);
    }
}

TEST(FitLogistic, RecoversNoiselessParameters)
{
    const MappingParams truth{-4.0, 2.0};
    const auto data = synthesize(truth, linspace(-1.0, 2.0, 50));
    const auto p = fit_logistic(data);
    EXPECT_NEAR(p.a, -4.0, 1e-3);
    EXPECT_NEAR(p.b, 2.0, 1e-3);
}

TEST(FitLogistic, ConstantTargetGivesFlatMapping)
{
    std::vector<CalibrationPair> data;
    for (double x : linspace(-3, 7, 25))
        data.push_back({x, 0.5});
    const auto p = fit_logistic(data);
    for (const auto& q : data)
        EXPECT_LT(std::abs(logistic_apply(p, q.score) - 0.5), 1e-6);
}

TEST(FitLogistic, Preconditions)
{
    try {
        fit_logistic(std::vector<CalibrationPair>{{0.1, 0.5}});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("insufficient data"), std::string::npos);
    }
    EXPECT_THROW(fit_logistic(std::vector<CalibrationPair>{{1, 0.2}, {1, 0.8}}), ValidationError);
    EXPECT_THROW(fit_logistic(std::vector<CalibrationPair>{{1, 0.2}, {2, 1.5}}), ValidationError);
    EXPECT_THROW(fit_logistic(std::vector<CalibrationPair>{{1, 0.2}, {std::nan(""), 0.5}}), ValidationError);
}

TEST(FitLogistic, NeverWorseThanGridAndOrderInvariant)
{
    std::mt19937_64 rng(33);
    std::normal_distribution<double> g(0, 1);
    for (int c = 0; c < 10; ++c) {
        std::vector<CalibrationPair> data;
        for (int k = 0; k < 40; ++k) {
            const double x = g(rng);
            data.push_back({x, std::clamp(1.0 / (1.0 + std::exp(-2 * x)) + 0.2 * g(rng), 0.0, 1.0)});
        }
        const auto rep = fit_logistic_report(data);
        EXPECT_LE(rep.mse, rep.grid_mse);
        EXPECT_DOUBLE_EQ(rep.mse, mapping_mse(rep.params, data));

        auto shuffled = data;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_EQ(fit_logistic(shuffled), rep.params);
    }
}

TEST(Params, RoundTripAndSchema)
{
    TempDir dir;
    for (const MappingParams p : {MappingParams{-3.25, 0.5}, MappingParams{1e300, -1e-300},
                                  MappingParams{0.1 + 0.2, std::nextafter(1.0, 2.0)}}) {
        save_params(p, dir / "p.json");
        EXPECT_EQ(load_params(dir / "p.json"), p);
    }
    csv::write_text(dir / "nob.json", R"({"a": 1.0})");
    try {
        load_params(dir / "nob.json");
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("schema"), std::string::npos);
    }
    csv::write_text(dir / "bad.json", "{a:1");
    EXPECT_THROW(load_params(dir / "bad.json"), FormatError);
    EXPECT_THROW(load_params(dir / "missing.json"), IoError);
    EXPECT_THROW(save_params({std::nan(""), 0}, dir / "nan.json"), ValidationError);
}
