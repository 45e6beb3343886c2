#include "test_support.hpp"

#include "vulninstruct/errors.hpp"
#include "vulninstruct/evaluation.hpp"

#include <gtest/gtest.h>

using namespace vulninstruct;

namespace {

struct Formula {
    double p, r, f1;
};

// Precision, recall and F1 written out directly from their definitions.
Formula formula(long tp, long fp, long fn) {
    double p = 0, r = 0, f = 0;
    if (tp + fp > 0) p = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) r = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (p + r > 0) f = 2 * (p * r) / (p + r);
    return {p, r, f};
}

} // namespace

TEST(Score, AllCorrect) {
    auto c = score({Label::One, Label::Zero, Label::One}, {1, 0, 1});
    EXPECT_EQ(c.fp, 0);
    EXPECT_EQ(c.fn, 0);
    EXPECT_EQ(c.tp, 2);
    EXPECT_EQ(c.tn, 1);
}

TEST(Score, UnparsedCountsAsWrong) {
    auto c = score({Label::Unparsed, Label::Unparsed}, {1, 0});
    EXPECT_EQ(c.fn, 1);
    EXPECT_EQ(c.fp, 1);
    EXPECT_EQ(c.n_unparsed, 2);
    EXPECT_EQ(c.total(), 2);
}

TEST(Score, LengthMismatch) { EXPECT_THROW(score({Label::One}, {1, 0}), Error); }

TEST(Score, BruteForceTally) {
    std::mt19937_64 rng(2024);
    std::vector<Label> preds;
    std::vector<int> truth;
    long tp = 0, fp = 0, fn = 0, tn = 0, un = 0;
    for (int i = 0; i < 1000; ++i) {
        int t = static_cast<int>(rng() % 2);
        int p = static_cast<int>(rng() % 3) - 1; // -1 unparsed
        preds.push_back(p < 0 ? Label::Unparsed : p == 1 ? Label::One : Label::Zero);
        truth.push_back(t);
        if (p < 0) ++un;
        const bool said_one = p == 1 || (p < 0 && t == 0);
        if (t == 1 && said_one) ++tp;
        if (t == 1 && !said_one) ++fn;
        if (t == 0 && said_one) ++fp;
        if (t == 0 && !said_one) ++tn;
    }
    auto c = score(preds, truth);
    EXPECT_EQ(c, (ConfusionCounts{tp, fp, fn, tn, un}));
}

TEST(Prf1, Examples) {
    auto r = prf1({1, 1, 1, 0, 0});
    EXPECT_DOUBLE_EQ(r.precision, 0.5);
    EXPECT_DOUBLE_EQ(r.recall, 0.5);
    EXPECT_DOUBLE_EQ(r.f1, 0.5);
    EXPECT_EQ(prf1({0, 5, 5, 5, 0}).f1, 0.0);
    EXPECT_EQ(prf1({}).f1, 0.0);
}

TEST(Prf1, TenThousandRandomTables) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 10000; ++i) {
        ConfusionCounts c{static_cast<long>(rng() % 200), static_cast<long>(rng() % 200), static_cast<long>(rng() % 200),
                          static_cast<long>(rng() % 200), 0};
        if (i % 10 == 0) c.tp = 0;
        auto got = prf1(c);
        auto want = formula(c.tp, c.fp, c.fn);
        ASSERT_EQ(got.precision, want.p);
        ASSERT_EQ(got.recall, want.r);
        ASSERT_EQ(got.f1, want.f1);
        // closed form and fp/fn symmetry
        if (c.tp > 0) ASSERT_NEAR(got.f1, 2.0 * c.tp / (2.0 * c.tp + c.fp + c.fn), 1e-12);
        ASSERT_NEAR(got.f1, prf1({c.tp, c.fn, c.fp, c.tn, 0}).f1, 1e-12);
    }
}

TEST(Density, PointMass) {
    std::vector<ScoredPrediction> ps(50, {Label::One, 1, 0.9});
    auto h = density(ps, 20);
    int nonzero = 0;
    for (std::size_t i = 0; i < h.densities.size(); ++i) {
        if (h.densities[i] > 0) {
            ++nonzero;
            EXPECT_LE(h.bin_edges[i], 0.9);
            EXPECT_GT(h.bin_edges[i + 1], 0.9);
        }
    }
    EXPECT_EQ(nonzero, 1);
    EXPECT_NEAR(h.integral(), 1.0, 1e-9);
}

TEST(Density, UniformIsNearFlat) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<ScoredPrediction> ps;
    for (int i = 0; i < 200000; ++i) ps.push_back({Label::Zero, 0, u(rng)});
    auto h = density(ps, 20);
    for (double d : h.densities) EXPECT_NEAR(d, 1.0, 0.1);
    EXPECT_NEAR(h.integral(), 1.0, 1e-9);
}

TEST(Density, OnlyCorrectPredictionsCount) {
    std::vector<ScoredPrediction> ps = {{Label::One, 0, 0.2}, {Label::Unparsed, 1, std::nullopt}, {Label::One, 1, 1.0}};
    auto h = density(ps, 10);
    EXPECT_EQ(h.population, 1);
    EXPECT_GT(h.densities.back(), 0);
}

TEST(Density, EmptyFlagged) {
    auto h = density({{Label::One, 0, 0.7}}, 20);
    EXPECT_TRUE(h.empty);
    EXPECT_EQ(h.population, 0);
}

TEST(Density, Csv) {
    auto csv = density_csv(density({{Label::One, 1, 0.5}}, 4));
    EXPECT_EQ(csv, "bin_mid,density\n0.1250,0.000000\n0.3750,0.000000\n0.6250,4.000000\n0.8750,0.000000\n");
}

namespace {

CleanScores clean_set() {
    CleanScores c;
    c.dataset = "fixture";
    // four vulnerable, four benign; clean predictions: one fn, one fp
    c.by_record["v1"] = {Label::One, 1, 0.9};
    c.by_record["v2"] = {Label::One, 1, 0.8};
    c.by_record["v3"] = {Label::One, 1, 0.7};
    c.by_record["v4"] = {Label::Zero, 1, 0.6};
    c.by_record["b1"] = {Label::Zero, 0, 0.9};
    c.by_record["b2"] = {Label::Zero, 0, 0.9};
    c.by_record["b3"] = {Label::Zero, 0, 0.9};
    c.by_record["b4"] = {Label::One, 0, 0.6};
    return c;
}

} // namespace

TEST(Robustness, NoSuccessfulAttackKeepsF1) {
    auto c = clean_set();
    std::vector<AttackedPrediction> a;
    for (const auto& [id, sp] : c.by_record) a.push_back({id, "MHM", sp.predicted});
    auto reports = robustness_report(c, a);
    ASSERT_EQ(reports.size(), 1u);
    std::vector<Label> p;
    std::vector<int> t;
    for (const auto& [id, sp] : c.by_record) {
        p.push_back(sp.predicted);
        t.push_back(sp.truth);
    }
    EXPECT_EQ(reports[0].f1, prf1(score(p, t)).f1);
    EXPECT_EQ(reports[0].condition, "MHM");
}

TEST(Robustness, EveryAttackSuccessful) {
    auto c = clean_set();
    std::vector<AttackedPrediction> a;
    for (const auto& [id, sp] : c.by_record)
        if (static_cast<int>(sp.predicted) == sp.truth) a.push_back({id, "WIR", sp.truth == 1 ? Label::Zero : Label::One});
    auto r = robustness_report(c, a).at(0);
    EXPECT_EQ(r.counts.tp, 0);
}

TEST(Robustness, ScriptedFlipSetHandComputed) {
    auto c = clean_set();
    // Flip v1 and b1; v2 stays. Hand table: tp = v2,v3 = 2; fn = v1,v4 = 2; fp = b1,b4 = 2; tn = b2,b3 = 2.
    auto r = robustness_report(c, {{"v1", "DCI", Label::Zero}, {"b1", "DCI", Label::One}, {"v2", "DCI", Label::One}}).at(0);
    EXPECT_EQ(r.counts, (ConfusionCounts{2, 2, 2, 2, 0}));
    EXPECT_DOUBLE_EQ(r.f1, 0.5);
}

TEST(Robustness, Errors) {
    EXPECT_THROW(robustness_report(CleanScores{"x", {}}, {}), Error);
    EXPECT_THROW(robustness_report(clean_set(), {{"zzz", "MHM", Label::One}}), Error);
}

TEST(Robustness, TableHeaderDeclaresConvention) {
    auto t = render_table({prf1({1, 1, 1, 1, 0})});
    EXPECT_EQ(t.rfind("# " + std::string(kUnparsedConvention), 0), 0u);
    EXPECT_EQ(render_table({prf1({1, 1, 1, 1, 0})}), t);
}
