#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <regex>

#include "flatnet/report.hpp"
#include "flatnet/svg.hpp"
#include "oracles.hpp"

using namespace flatnet;

namespace {

RunRecord ok_row(std::uint64_t seed, double test_loss, double tr_hx, std::size_t layers = 2) {
    MetricsReport m;
    m.seed = seed;
    m.learning_rate = 0.05;
    m.iterations = 1000;
    m.train_loss = 0.5 * test_loss;
    m.test_loss = test_loss;
    m.gap = m.test_loss - m.train_loss;
    m.tr_input_hessian = tr_hx;
    m.jacobian_frobenius = 0.1 + tr_hx / 3.0;
    m.tr_weight_hessian_total = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
        m.tr_weight_hessian_per_layer.push_back(0.25 * static_cast<double>(l + 1) * tr_hx);
        *m.tr_weight_hessian_total += *m.tr_weight_hessian_per_layer.back();
    }
    m.scaled_quadform = -tr_hx / 7.0;
    RunRecord r;
    r.point = {0.05, std::nullopt, 1000};
    r.seed = seed;
    r.metrics = m;
    return r;
}

SweepReport random_report(std::size_t rows, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::lognormal_distribution<double> d(0.0, 1.0);
    SweepReport rep{2, {}};
    for (std::size_t i = 0; i < rows; ++i) rep.records.push_back(ok_row(i, d(rng), d(rng)));
    return rep;
}

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST(Stats, QuantilesAndRanks) {
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    EXPECT_EQ(interquartile_range({1.0, 2.0, 3.0, 4.0, 5.0}), 2.0);
    EXPECT_THROW(median({}), InvalidArgument);
    const std::vector<double> v{3.0, 1.0, 3.0, 2.0, 3.0, -1.0};
    EXPECT_EQ(average_ranks(v), oracle::naive_ranks(v));
}

TEST(Spearman, MatchesNaiveOracle) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> a(30), b(30);
        for (std::size_t i = 0; i < 30; ++i) {
            a[i] = std::round(4.0 * n(rng)) / 4.0;  // ties on purpose
            b[i] = a[i] + n(rng);
        }
        EXPECT_NEAR(spearman(a, b).value(), oracle::naive_spearman(a, b), 1e-12);
        EXPECT_NEAR(pearson(a, b).value(), oracle::naive_pearson(a, b), 1e-12);
    }
}

TEST(Spearman, MonotoneAndTransformInvariant) {
    std::vector<double> a, b, c;
    for (int i = 0; i < 10; ++i) {
        a.push_back(i);
        b.push_back(std::pow(i, 3));
        c.push_back(-std::exp(i));
    }
    EXPECT_DOUBLE_EQ(spearman(a, b).value(), 1.0);
    EXPECT_DOUBLE_EQ(spearman(a, c).value(), -1.0);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> x(50), y(50), ey(50);
    for (std::size_t i = 0; i < 50; ++i) {
        x[i] = n(rng);
        y[i] = x[i] + n(rng);
        ey[i] = std::exp(y[i]);
    }
    EXPECT_EQ(spearman(x, y).value(), spearman(x, ey).value());
}

TEST(Spearman, IndependentColumnsInsideNullBand) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> a(1000), b(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
        a[i] = n(rng);
        b[i] = n(rng);
    }
    const double rho = spearman(a, b).value();
    EXPECT_LT(std::abs(rho), 0.1);
    EXPECT_LT(std::abs(rho), oracle::permutation_band(a, b, 200, 4) * 1.5);
}

TEST(Spearman, DegenerateInputs) {
    const std::vector<double> c(6, 2.0), v{1, 2, 3, 4, 5, 6};
    EXPECT_FALSE(spearman(c, v).has_value());
    EXPECT_THROW(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 2, 3, 4}), InvalidArgument);
    EXPECT_THROW(spearman(v, std::vector<double>{1, 2, 3, 4, 5}), InvalidArgument);
}

TEST(ReportCsv, RoundTripIsBitExact) {
    auto rep = random_report(3, 5);
    rep.records[1].metrics->hit_rate = 0.53125;
    rep.records[2].point = {0.1, 10, 10000};
    rep.records[2].metrics->tr_input_hessian.reset();
    const auto text = report_csv(rep);
    const auto back = parse_report_csv(text);
    ASSERT_EQ(back.records.size(), 3u);
    EXPECT_EQ(back.layer_count, 2u);
    for (std::size_t i = 0; i < 3; ++i) {
        const auto cols = report_columns(2);
        for (std::size_t c = 0; c + 1 < cols.size(); ++c)
            EXPECT_EQ(column_value(back.records[i], cols[c]), column_value(rep.records[i], cols[c])) << cols[c];
    }
    EXPECT_EQ(report_csv(back), text);
}

TEST(ReportCsv, HeaderAndFailureRows) {
    SweepReport empty{3, {}};
    const auto text = report_csv(empty);
    EXPECT_EQ(text,
              "seed,eta,batch,iters,train_loss,test_loss,gap,tr_hx,jac_fro,tr_hw_total,tr_hw_layer_1,tr_hw_layer_2,"
              "tr_hw_layer_3,scaled_quadform,hit_rate,status\n");
    EXPECT_TRUE(parse_report_csv(text).records.empty());

    auto rep = random_report(2, 6);
    RunRecord bad;
    bad.seed = 9;
    bad.status = "diverged";
    bad.message = "training diverged";
    rep.records.push_back(bad);
    EXPECT_EQ(rep.ok_count(), 2u);
    EXPECT_EQ(rep.failure_count(), 1u);
    const auto back = parse_report_csv(report_csv(rep));
    EXPECT_EQ(back.records[2].status, "diverged");
    EXPECT_FALSE(back.records[2].metrics.has_value());
    EXPECT_THROW(parse_report_csv("a,b\n1,2\n"), ParseError);
}

TEST(ReportJson, AgreesWithCsv) {
    const auto rep = random_report(4, 7);
    const auto j = report_json(rep);
    const auto cols = report_columns(2);
    EXPECT_EQ(j["columns"].get<std::vector<std::string>>(), cols);
    ASSERT_EQ(j["rows"].size(), 4u);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t c = 4; c + 1 < cols.size(); ++c) {
            const auto v = column_value(rep.records[i], cols[c]);
            if (v)
                EXPECT_EQ(j["rows"][i][cols[c]].get<double>(), *v);
            else
                EXPECT_TRUE(j["rows"][i][cols[c]].is_null());
        }
    EXPECT_EQ(j["rows"][0]["batch"], "full");
}

TEST(ReportColumns, CorrelationAndUnknownColumns) {
    const auto rep = random_report(30, 8);
    const auto rho = rank_correlation(rep, "tr_hx", "jac_fro").value();
    EXPECT_DOUBLE_EQ(rho, 1.0);
    EXPECT_DOUBLE_EQ(rank_correlation(rep, "scaled_quadform", "tr_hx").value(), -1.0);
    EXPECT_THROW(rank_correlation(rep, "sharpness", "test_loss"), InvalidArgument);
    EXPECT_THROW(rank_correlation(random_report(4, 1), "tr_hx", "test_loss"), InvalidArgument);
    const auto summary = correlation_summary(rep);
    EXPECT_EQ(summary.size(), 8u);
    EXPECT_EQ(column_values(rep, "tr_hw_layer_2").size(), 30u);
}

TEST(Aggregate, MedianAndIqrPerGridPoint) {
    SweepReport rep{2, {}};
    for (std::uint64_t s = 0; s < 5; ++s) rep.records.push_back(ok_row(s, 1.0 + static_cast<double>(s), 1.0));
    for (std::uint64_t s = 0; s < 3; ++s) {
        auto r = ok_row(s, 10.0 * static_cast<double>(s + 1), 2.0);
        r.point.iterations = 10000;
        rep.records.push_back(r);
    }
    RunRecord failed;
    failed.point = {0.05, std::nullopt, 10000};
    failed.status = "error";
    rep.records.push_back(failed);
    const auto aggs = aggregate(rep);
    ASSERT_EQ(aggs.size(), 2u);
    EXPECT_EQ(aggs[0].runs, 5u);
    EXPECT_EQ(aggs[0].median_iqr.at("test_loss").first, 3.0);
    EXPECT_EQ(aggs[0].median_iqr.at("test_loss").second, 2.0);
    EXPECT_EQ(aggs[1].runs, 3u);
    EXPECT_EQ(aggs[1].failures, 1u);
    EXPECT_EQ(aggs[1].median_iqr.at("test_loss").first, 20.0);
    EXPECT_FALSE(aggs[1].median_iqr.count("hit_rate"));
    const auto csv = aggregate_csv(aggs);
    EXPECT_EQ(count(csv, "\n"), 3u);
}

TEST(Scatter, MarkerCountsAndRanges) {
    const auto one = scatter_svg(random_report(1, 9), "tr_hx", "test_loss");
    EXPECT_EQ(count(one, "class=\"marker\""), 1u);

    const auto rep = random_report(40, 10);
    const ScatterLayout layout;
    const auto svg = scatter_svg(rep, "tr_hx", "test_loss", layout);
    EXPECT_EQ(count(svg, "class=\"marker\""), 40u);
    const std::regex marker("cx=\"([^\"]+)\" cy=\"([^\"]+)\"");
    const double right = layout.width - layout.margin_right, bottom = layout.height - layout.margin_bottom;
    std::size_t seen = 0;
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), marker); it != std::sregex_iterator(); ++it, ++seen) {
        const double cx = std::stod((*it)[1]), cy = std::stod((*it)[2]);
        EXPECT_GE(cx, layout.margin_left);
        EXPECT_LE(cx, right);
        EXPECT_GE(cy, layout.margin_top);
        EXPECT_LE(cy, bottom);
    }
    EXPECT_EQ(seen, 40u);
    EXPECT_THROW(scatter_svg(rep, "tr_hx", "nope"), InvalidArgument);
}

TEST(Scatter, WritesFile) {
    std::filesystem::create_directories(FLATNET_TEST_TMP);
    const auto path = std::string(FLATNET_TEST_TMP) + "/plot.svg";
    emit_scatter(random_report(6, 11), "jac_fro", "gap", path);
    EXPECT_EQ(count(read_text(path), "<circle"), 6u);
}
