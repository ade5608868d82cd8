#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "stagedrisk/preprocess.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

using namespace staged;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Cohort make_cohort(const std::vector<std::string>& names,
                   const std::vector<std::vector<double>>& rows,
                   const std::vector<int>& outcomes = {},
                   const std::vector<Strata>& strata = {}) {
    std::vector<FeatureSpec> specs;
    for (const auto& n : names) specs.push_back({n, FeatureKind::numeric, StageTag::clinical});
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        Sample s;
        s.id = "r" + std::to_string(i);
        s.features = rows[i];
        s.outcome = outcomes.empty() ? static_cast<int>(i % 2) : outcomes[i];
        if (!strata.empty()) s.strata = strata[i];
        samples.push_back(std::move(s));
    }
    return Cohort(FeatureSchema(specs), std::move(samples));
}

double pearson(const Cohort& c, std::size_t i, std::size_t j) {
    double mi = 0, mj = 0;
    const double n = static_cast<double>(c.size());
    for (std::size_t r = 0; r < c.size(); ++r) {
        mi += c.value(r, i);
        mj += c.value(r, j);
    }
    mi /= n;
    mj /= n;
    double sij = 0, sii = 0, sjj = 0;
    for (std::size_t r = 0; r < c.size(); ++r) {
        sij += (c.value(r, i) - mi) * (c.value(r, j) - mj);
        sii += (c.value(r, i) - mi) * (c.value(r, i) - mi);
        sjj += (c.value(r, j) - mj) * (c.value(r, j) - mj);
    }
    if (sii == 0.0 || sjj == 0.0) return 0.0;
    return sij / std::sqrt(sii * sjj);
}

} // namespace

TEST_CASE("high-missing filter removes strictly above the cutoff only") {
    std::vector<std::vector<double>> rows(100, std::vector<double>{0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < 100; ++i) {
        rows[i][2] = static_cast<double>(i);
        if (i < 21) rows[i][0] = kNaN; // 21% missing
        if (i < 20) rows[i][1] = kNaN; // exactly 20% missing
    }
    Cohort cohort = make_cohort({"m21", "m20", "full"}, rows);
    auto [filtered, dropped] = drop_high_missing(cohort, 0.20);
    REQUIRE(dropped.size() == 1);
    CHECK(dropped[0].name == "m21");
    CHECK(dropped[0].reason == DropReason::high_missing);
    CHECK(filtered.schema().names() == std::vector<std::string>{"m20", "full"});
}

TEST_CASE("high-missing filter is the identity on complete data") {
    Cohort cohort = make_cohort({"a", "b"}, {{1, 2}, {3, 4}, {5, 6}});
    auto [filtered, dropped] = drop_high_missing(cohort, 0.20);
    CHECK(dropped.empty());
    CHECK(filtered.schema().size() == 2);
    CHECK(filtered.size() == 3);
}

TEST_CASE("incomplete-row removal keeps exactly the complete rows") {
    Cohort cohort = make_cohort({"a", "b"}, {{1, 2}, {kNaN, 4}, {5, 6}, {7, kNaN}});
    auto [filtered, n_dropped] = drop_incomplete_rows(cohort);
    CHECK(n_dropped == 2);
    REQUIRE(filtered.size() == 2);
    CHECK(filtered.sample(0).id == "r0");
    CHECK(filtered.sample(1).id == "r2");
}

TEST_CASE("incomplete-row removal fails when nothing survives") {
    Cohort cohort = make_cohort({"a", "b"}, {{kNaN, 2}, {3, kNaN}});
    CHECK_THROWS_WITH_AS(drop_incomplete_rows(cohort),
                         doctest::Contains("every row has a missing value"), std::runtime_error);
}

TEST_CASE("near-zero-variance filter drops constants and extreme imbalance") {
    std::vector<std::vector<double>> rows(1000, std::vector<double>(4, 0.0));
    for (std::size_t i = 0; i < 1000; ++i) {
        rows[i][0] = 7.0;                           // constant
        rows[i][1] = i == 0 ? 1.0 : 0.0;            // 999:1 binary
        rows[i][2] = i < 500 ? 0.0 : 1.0;           // balanced binary
        rows[i][3] = static_cast<double>(i) * 0.01; // continuous
    }
    Cohort cohort = make_cohort({"cst", "rare", "bal", "cont"}, rows);
    auto [filtered, dropped] = nzv_filter(cohort);
    REQUIRE(dropped.size() == 2);
    CHECK(dropped[0].name == "cst");
    CHECK(dropped[1].name == "rare");
    CHECK(dropped[1].reason == DropReason::nzv);
    CHECK(filtered.schema().names() == std::vector<std::string>{"bal", "cont"});
}

TEST_CASE("near-zero-variance ratio boundary is inclusive") {
    // 95:5 at 100 samples: ratio 19, distinct fraction 0.02 -> removed.
    std::vector<std::vector<double>> rows(100, std::vector<double>(2, 0.0));
    for (std::size_t i = 0; i < 100; ++i) {
        rows[i][0] = i < 5 ? 1.0 : 0.0;
        rows[i][1] = static_cast<double>(i);
    }
    Cohort cohort = make_cohort({"edge", "cont"}, rows);
    auto [filtered, dropped] = nzv_filter(cohort);
    REQUIRE(dropped.size() == 1);
    CHECK(dropped[0].name == "edge");
    CHECK(filtered.schema().names() == std::vector<std::string>{"cont"});
}

TEST_CASE("correlation filter drops one of a duplicated pair, keeping the smaller name") {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 40; ++i) {
        double v = std::sin(0.37 * i);
        double w = std::cos(1.1 * i);
        rows.push_back({v, v, w});
    }
    Cohort cohort = make_cohort({"dup_a", "dup_b", "other"}, rows);
    auto [filtered, dropped] = correlation_filter(cohort, 0.83);
    REQUIRE(dropped.size() == 1);
    CHECK(dropped[0].name == "dup_b");
    CHECK(dropped[0].reason == DropReason::correlated);
    CHECK(filtered.schema().contains("dup_a"));
    CHECK(filtered.schema().contains("other"));
}

TEST_CASE("correlation filter keeps moderately correlated pairs") {
    RngStream rng(8);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 500; ++i) {
        double x = rng.normal();
        double y = 0.5 * x + std::sqrt(1.0 - 0.25) * rng.normal();
        rows.push_back({x, y});
    }
    Cohort cohort = make_cohort({"x", "y"}, rows);
    REQUIRE(std::abs(pearson(cohort, 0, 1)) < 0.83);
    auto [filtered, dropped] = correlation_filter(cohort, 0.83);
    CHECK(dropped.empty());
    CHECK(filtered.schema().size() == 2);
}

TEST_CASE("no surviving pair exceeds the correlation cutoff") {
    RngStream rng(12);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 400; ++i) {
        double a = rng.normal();
        double b = 0.95 * a + 0.1 * rng.normal();
        double c = 0.9 * b + 0.2 * rng.normal();
        double d = rng.normal();
        rows.push_back({a, b, c, d});
    }
    Cohort cohort = make_cohort({"a", "b", "c", "d"}, rows);
    auto [filtered, dropped] = correlation_filter(cohort, 0.83);
    CHECK(!dropped.empty());
    for (std::size_t i = 0; i < filtered.schema().size(); ++i)
        for (std::size_t j = i + 1; j < filtered.schema().size(); ++j)
            CHECK(std::abs(pearson(filtered, i, j)) <= 0.83);
}

TEST_CASE("spatial sign projects a centered sample onto the unit circle") {
    PreprocessPipeline pipeline;
    pipeline.scaled_features = {"a", "b"};
    pipeline.center = {0.0, 0.0};
    pipeline.scale = {1.0, 1.0};
    Cohort raw = make_cohort({"a", "b"}, {{3.0, 4.0}}, {0});
    Cohort out = pipeline.apply(raw);
    CHECK(out.value(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(out.value(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("fit_apply_spatial_sign standardizes then normalizes, zero rows stay zero") {
    Cohort cohort = make_cohort({"a", "b"}, {{-1, -2}, {0, 0}, {1, 2}}, {0, 1, 0});
    auto [out, pipeline] = fit_apply_spatial_sign(cohort);
    CHECK(pipeline.center == std::vector<double>{0.0, 0.0});
    CHECK(pipeline.scale == std::vector<double>{1.0, 2.0});

    // The middle row sits at the training mean: all-zero after centering.
    CHECK(out.value(1, 0) == 0.0);
    CHECK(out.value(1, 1) == 0.0);

    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(out.value(0, 0) == doctest::Approx(-inv_sqrt2).epsilon(1e-14));
    CHECK(out.value(0, 1) == doctest::Approx(-inv_sqrt2).epsilon(1e-14));
    CHECK(out.value(2, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-14));
}

TEST_CASE("every transformed sample has unit norm unless all-zero") {
    RngStream rng(19);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 200; ++i)
        rows.push_back({rng.normal() * 3 + 1, rng.normal() * 0.5 - 2, rng.normal()});
    Cohort cohort = make_cohort({"a", "b", "c"}, rows);
    auto [out, pipeline] = fit_apply_spatial_sign(cohort);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double norm = 0;
        for (std::size_t j = 0; j < 3; ++j) norm += out.value(i, j) * out.value(i, j);
        norm = std::sqrt(norm);
        CHECK(std::abs(norm - 1.0) <= 1e-12);
    }
}

TEST_CASE("fit_apply_spatial_sign rejects constant features by name") {
    Cohort cohort = make_cohort({"flat", "ok"}, {{5, 1}, {5, 2}, {5, 3}});
    CHECK_THROWS_WITH_AS(fit_apply_spatial_sign(cohort), doctest::Contains("'flat'"),
                         std::runtime_error);
}

TEST_CASE("pipeline replay on the training data reproduces the fitted output") {
    RngStream rng(23);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 150; ++i) {
        double a = rng.normal();
        rows.push_back({a, a + 0.01 * rng.normal(), rng.normal(), rng.uniform01() < 0.02 ? 1.0 : 0.0});
    }
    rows[3][2] = kNaN;
    Cohort cohort = make_cohort({"a", "a_twin", "c", "rare"}, rows);

    PreprocessOptions options;
    auto [fitted, pipeline] = fit_pipeline(cohort, options);
    Cohort replayed = pipeline.apply(cohort);

    REQUIRE(replayed.size() == fitted.size());
    REQUIRE(replayed.schema().names() == fitted.schema().names());
    for (std::size_t i = 0; i < fitted.size(); ++i) {
        CHECK(replayed.sample(i).id == fitted.sample(i).id);
        for (std::size_t j = 0; j < fitted.schema().size(); ++j)
            CHECK(replayed.value(i, j) == fitted.value(i, j));
    }
}

TEST_CASE("pipeline stages run in the contract order") {
    // "gone" is 30% missing AND duplicates "keep"; the missing-value filter
    // must claim it before the correlation filter can.
    std::vector<std::vector<double>> rows;
    RngStream rng(29);
    for (int i = 0; i < 100; ++i) {
        double v = rng.normal();
        rows.push_back({v, i < 30 ? kNaN : v});
    }
    Cohort cohort = make_cohort({"keep", "gone"}, rows);
    PreprocessOptions options;
    auto [fitted, pipeline] = fit_pipeline(cohort, options);
    REQUIRE(pipeline.dropped.size() == 1);
    CHECK(pipeline.dropped[0].name == "gone");
    CHECK(pipeline.dropped[0].reason == DropReason::high_missing);
    CHECK(pipeline.row_drop_count == 0);
    CHECK(fitted.size() == 100);
}

TEST_CASE("t-value standardization uses the non-fracture stratum statistics") {
    Strata f{"F", "65-75", "W"};
    // Reference: three non-fracture subjects at 0.8 / 1.0 / 1.2 (mean 1.0,
    // sample SD 0.2) plus one fracture subject that must not contribute.
    Cohort reference = make_cohort({"bmd"}, {{0.8}, {1.0}, {1.2}, {9.9}}, {0, 0, 0, 1},
                                   {f, f, f, f});
    Cohort target = make_cohort({"bmd"}, {{0.9}, {1.0}}, {0, 1}, {f, f});
    Cohort out = t_value_transform(target, reference, {"bmd"});
    CHECK(out.value(0, 0) == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(out.value(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("t-value lookup fails loudly for unusable strata") {
    Strata f{"F", "65-75", "W"};
    Strata m{"M", "65-75", "W"};
    // Only one non-fracture male: that stratum has no usable reference.
    Cohort reference = make_cohort({"bmd"}, {{0.8}, {1.2}, {1.0}}, {0, 0, 0}, {f, f, m});
    Cohort target = make_cohort({"bmd"}, {{1.0}}, {0}, {m});
    CHECK_THROWS_WITH_AS(t_value_transform(target, reference, {"bmd"}),
                         doctest::Contains("(M, 65-75, W)"), std::runtime_error);
}

TEST_CASE("t-value lookup fails when the stratum SD is zero") {
    Strata f{"F", "65-75", "W"};
    Cohort reference = make_cohort({"bmd"}, {{1.0}, {1.0}, {1.0}}, {0, 0, 0}, {f, f, f});
    Cohort target = make_cohort({"bmd"}, {{1.0}}, {0}, {f});
    CHECK_THROWS_WITH_AS(t_value_transform(target, reference, {"bmd"}),
                         doctest::Contains("'bmd'"), std::runtime_error);
}

TEST_CASE("t-value self-transform yields mean zero, SD one per stratum") {
    RngStream rng(37);
    std::vector<std::vector<double>> rows;
    std::vector<int> outcomes;
    std::vector<Strata> strata;
    const char* sexes[] = {"F", "M"};
    const char* bands[] = {"65-75", "76-96"};
    for (int i = 0; i < 400; ++i) {
        rows.push_back({rng.normal() * 2 + 5, rng.normal()});
        outcomes.push_back(rng.uniform01() < 0.2 ? 1 : 0);
        strata.push_back({sexes[i % 2], bands[(i / 2) % 2], "W"});
    }
    Cohort cohort = make_cohort({"bmd", "tscore"}, rows, outcomes, strata);
    Cohort out = t_value_transform(cohort, cohort, {"bmd", "tscore"});

    for (const char* sex : sexes)
        for (const char* band : bands)
            for (std::size_t col = 0; col < 2; ++col) {
                std::vector<double> vals;
                for (std::size_t i = 0; i < out.size(); ++i) {
                    const Sample& s = out.sample(i);
                    if (s.outcome == 0 && s.strata.sex == sex && s.strata.age_band == band)
                        vals.push_back(out.value(i, col));
                }
                REQUIRE(vals.size() >= 2);
                double mean = 0;
                for (double v : vals) mean += v;
                mean /= static_cast<double>(vals.size());
                double var = 0;
                for (double v : vals) var += (v - mean) * (v - mean);
                var /= static_cast<double>(vals.size() - 1);
                CHECK(std::abs(mean) <= 1e-10);
                CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-10);
            }
}

TEST_CASE("t-value transform leaves missing values missing") {
    Strata f{"F", "65-75", "W"};
    Cohort reference = make_cohort({"bmd"}, {{0.8}, {1.2}}, {0, 0}, {f, f});
    Cohort target = make_cohort({"bmd"}, {{kNaN}}, {0}, {f});
    Cohort out = t_value_transform(target, reference, {"bmd"});
    CHECK(std::isnan(out.value(0, 0)));
}

TEST_CASE("fitted t-value table survives restore") {
    Strata f{"F", "65-75", "W"};
    Cohort reference = make_cohort({"bmd"}, {{0.8}, {1.0}, {1.2}}, {0, 0, 0}, {f, f, f});
    TValueTable fitted = TValueTable::fit(reference, {"bmd"});

    std::vector<std::tuple<TValueTable::Key, TValueTable::Entry>> entries;
    for (const auto& [key, entry] : fitted.entries()) entries.emplace_back(key, entry);
    TValueTable rebuilt = TValueTable::restore(fitted.features(), entries);

    const auto& e = rebuilt.lookup(f, "bmd");
    CHECK(e.mean == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(e.sd == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(e.n == 3);
}
