#include "test_support.hpp"

#include "vulninstruct/attacks.hpp"
#include "vulninstruct/corpus.hpp"
#include "vulninstruct/errors.hpp"
#include "vulninstruct/lexer.hpp"
#include "vulninstruct/util.hpp"

#include <gtest/gtest.h>

using namespace vulninstruct;
using namespace testsupport;
using nlohmann::json;

namespace {

VulnRecord svg_record() { return make_record(slurp(fixture("svg_probe.c")), 1, "fixture"); }

std::vector<std::string> name_pool(int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back("name" + std::to_string(i));
    return out;
}

bool has_ident(const std::string& code, const std::string& name) {
    for (const auto& t : toks(code))
        if (t.kind == 'i' && t.text == name) return true;
    return false;
}

// Clean code scores p_clean; anything else scores p_other.
class TwoLevelScorer : public LabelScorer {
public:
    TwoLevelScorer(std::string clean, double p_clean, double p_other)
        : clean_(std::move(clean)), p_clean_(p_clean), p_other_(p_other) {}
    LabelScore score(const std::string& code, int truth) override {
        const double p = code == clean_ ? p_clean_ : p_other_;
        return {p >= 0.5 ? static_cast<Label>(truth) : static_cast<Label>(1 - truth), p, 1};
    }

private:
    std::string clean_;
    double p_clean_, p_other_;
};

// p_truth = base + sum of weights of the tracked names still present.
class WeightedScorer : public LabelScorer {
public:
    WeightedScorer(double base, std::map<std::string, double> w) : base_(base), w_(std::move(w)) {}
    LabelScore score(const std::string& code, int truth) override {
        ++calls;
        double p = base_;
        for (const auto& [name, weight] : w_)
            if (has_ident(code, name)) p += weight;
        return {p >= 0.5 ? static_cast<Label>(truth) : static_cast<Label>(1 - truth), p, 1};
    }
    long calls = 0;

private:
    double base_;
    std::map<std::string, double> w_;
};

// Flips whenever the trigger name shows up in the code.
class TriggerScorer : public LabelScorer {
public:
    explicit TriggerScorer(std::string trigger) : trigger_(std::move(trigger)) {}
    LabelScore score(const std::string& code, int truth) override {
        if (has_ident(code, trigger_)) return {static_cast<Label>(1 - truth), 0.2, 1};
        return {static_cast<Label>(truth), 0.8, 1};
    }

private:
    std::string trigger_;
};

AttackConfig config(AttackKind k, int iterations, int candidates, std::uint64_t seed, long budget) {
    AttackConfig c;
    c.kind = k;
    c.max_iterations = iterations;
    c.candidates_per_iteration = candidates;
    c.seed = seed;
    c.query_budget = budget;
    return c;
}

} // namespace

TEST(Identifiers, ParamsAndLocals) {
    EXPECT_EQ(extract_identifiers("int foo(int a){int b=a; return b;}"), (std::vector<std::string>{"a", "b"}));
}

TEST(Identifiers, GlobalsOnlyGivesEmpty) {
    EXPECT_TRUE(extract_identifiers("void f(void) { g_count++; reset(g_state); }").empty());
}

TEST(Identifiers, SvgProbe) {
    EXPECT_EQ(extract_identifiers(svg_record().code), (std::vector<std::string>{"p", "b", "end"}));
}

TEST(Rename, IdentityIsNoOp) {
    const auto code = svg_record().code;
    EXPECT_EQ(rename(code, "b", "b"), code);
}

TEST(Rename, SvgLineNine) {
    auto out = rename(svg_record().code, "b", "tmp_q");
    EXPECT_EQ(split_lines(out)[8], "        tmp_q += ff_subtitles_next_line(tmp_q);");
    EXPECT_TRUE(differs_only_by(svg_record().code, out, {{"b", "tmp_q"}}));
}

TEST(Rename, MembersLeftAlone) { EXPECT_EQ(rename("s.len = len + p->len;", "len", "n"), "s.len = n + p->len;"); }

TEST(Rename, CollisionAndBadNamesThrow) {
    const auto code = svg_record().code;
    EXPECT_THROW(rename(code, "b", "end"), AttackError);
    EXPECT_THROW(rename(code, "b", "while"), AttackError);
    EXPECT_THROW(rename(code, "b", "9x"), AttackError);
}

TEST(Rename, RandomRenamesPassTokenDiff) {
    const auto code = svg_record().code;
    const auto names = extract_identifiers(code);
    std::mt19937_64 rng(31);
    for (int i = 0; i < 100; ++i) {
        const auto& from = names[rng() % names.size()];
        const std::string to = "v" + std::to_string(rng() % 100000);
        auto out = rename(code, from, to);
        std::set<std::pair<std::string, std::string>> changed;
        ASSERT_TRUE(differs_only_by(code, out, {{from, to}}, &changed)) << from << "->" << to;
        EXPECT_EQ(changed.size(), 1u);
        EXPECT_NO_THROW(lex(out));
    }
}

TEST(Mh, AcceptanceExamples) {
    EXPECT_NEAR(mh_acceptance(0.9, 0.95), 0.5, 1e-12);
    EXPECT_EQ(mh_acceptance(0.9, 0.8), 1.0);
    EXPECT_NEAR(mh_acceptance(1.0, 0.5), 1.0, 0.0);
}

TEST(Mh, AcceptanceRateMonteCarlo) {
    // One proposal per run; the accepted fraction must track the acceptance ratio.
    auto rec = svg_record();
    TwoLevelScorer scorer(rec.code, 0.9, 0.95);
    const auto pool = name_pool(50);
    int accepted = 0;
    const int runs = 10000;
    for (int i = 0; i < runs; ++i) {
        auto o = mhm_attack(rec, scorer, config(AttackKind::MHM, 1, 1, static_cast<std::uint64_t>(i), 100), pool);
        ASSERT_EQ(o.edits.size(), 1u);
        EXPECT_NEAR(o.edits[0]["alpha"].get<double>(), 0.5, 1e-12);
        if (o.edits[0]["accepted"].get<bool>()) ++accepted;
    }
    EXPECT_NEAR(static_cast<double>(accepted) / runs, 0.5, 0.02);
}

TEST(Mh, StopsOnFlip) {
    auto rec = svg_record();
    TriggerScorer scorer("name7");
    auto o = mhm_attack(rec, scorer, config(AttackKind::MHM, 200, 4, 3, 5000), name_pool(20));
    ASSERT_TRUE(o.success);
    EXPECT_TRUE(o.edits.back()["flipped"].get<bool>());
    EXPECT_TRUE(has_ident(o.adversarial_code, "name7"));
    EXPECT_NO_THROW(lex(o.adversarial_code));
    EXPECT_EQ(toks(o.adversarial_code).size(), toks(rec.code).size());
}

TEST(Mh, RespectsBudgetAndIsDeterministic) {
    auto rec = svg_record();
    TwoLevelScorer scorer(rec.code, 0.9, 0.92);
    auto a = mhm_attack(rec, scorer, config(AttackKind::MHM, 100, 3, 9, 25), name_pool(30));
    EXPECT_LE(a.queries_used, 25);
    EXPECT_FALSE(a.success);
    auto b = mhm_attack(rec, scorer, config(AttackKind::MHM, 100, 3, 9, 25), name_pool(30));
    EXPECT_EQ(json(a).dump(), json(b).dump());
}

TEST(Mh, WrongCleanPredictionSkipped) {
    auto rec = svg_record();
    TwoLevelScorer scorer(rec.code, 0.3, 0.3);
    auto o = mhm_attack(rec, scorer, config(AttackKind::MHM, 10, 2, 1, 100), name_pool(10));
    EXPECT_FALSE(o.success);
    EXPECT_EQ(o.queries_used, 1);
}

TEST(Wir, RankingMatchesWeights) {
    const std::string code = "int f(int alpha, int beta) { int gamma = alpha; int delta = beta; int eps = gamma + delta; return eps; }";
    const std::map<std::string, double> w = {{"alpha", 0.03125}, {"beta", 0.125}, {"gamma", 0.0625}, {"delta", 0.125}, {"eps", 0.09375}};
    // dyadic weights keep the tie between beta and delta exact
    WeightedScorer scorer(0.375, w);
    const auto names = extract_identifiers(code);
    ASSERT_EQ(names, (std::vector<std::string>{"alpha", "beta", "gamma", "delta", "eps"}));
    const double p_clean = scorer.score(code, 1).p_truth;
    auto ranked = wir_rank(code, names, scorer, 1, p_clean);
    // Oracle: stable sort of extraction order by descending weight.
    std::vector<std::string> want = names;
    std::stable_sort(want.begin(), want.end(), [&](const auto& a, const auto& b) { return w.at(a) > w.at(b); });
    ASSERT_EQ(ranked.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_EQ(ranked[i].name, want[i]);
        EXPECT_NEAR(ranked[i].delta, w.at(want[i]), 1e-12);
    }
}

TEST(Wir, PlaceholderAvoidsCollision) {
    EXPECT_EQ(unk_placeholder("int a;"), "UNK");
    EXPECT_EQ(unk_placeholder("int UNK; int UNK_1;"), "UNK_2");
}

TEST(Wir, InsensitiveScorerNeverSucceeds) {
    auto rec = svg_record();
    TwoLevelScorer scorer("", 0.9, 0.9);
    auto o = wir_random_attack(rec, scorer, config(AttackKind::WIR, 10, 4, 2, 200), name_pool(40));
    EXPECT_FALSE(o.success);
    EXPECT_LE(o.queries_used, 200);
}

TEST(Wir, FlipsWhenTriggerAvailable) {
    auto rec = svg_record();
    TriggerScorer scorer("name3");
    auto o = wir_random_attack(rec, scorer, config(AttackKind::WIR, 10, 8, 2, 500), name_pool(8));
    EXPECT_TRUE(o.success);
    EXPECT_TRUE(has_ident(o.adversarial_code, "name3"));
}

TEST(Dci, DeclarationExample) {
    EXPECT_EQ(dci_declaration("xpath", "err = sock_do_ioctl(net, sock, cmd, (unsigned long)&ktv);"),
              "char xpath_2[] = \"err = sock_do_ioctl(net, sock, cmd, (unsigned long)&ktv);\";");
}

TEST(Dci, EmptyBodyInsertsAfterBrace) {
    const std::string code = "void f(void) {}";
    auto pts = dci_insertion_points(code);
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_EQ(pts[0], code.find('{') + 1);
}

TEST(Dci, NoPointsInsideParensOrSwitch) {
    const std::string code = "int f(int n) { for (int i = 0; i < n; i++) { n--; } switch (n) { case 1: break; } return n; }";
    for (auto off : dci_insertion_points(code)) {
        // every point follows ';' or '{' at statement level
        const char c = code[off - 1];
        EXPECT_TRUE(c == ';' || c == '{');
        const auto before = code.substr(0, off);
        EXPECT_EQ(std::count(before.begin(), before.end(), '('), std::count(before.begin(), before.end(), ')'));
        EXPECT_NE(before.substr(before.size() - std::min<std::size_t>(before.size(), 12)), "switch (n) {");
    }
}

TEST(Dci, SeededInsertionsAreContiguousAndReversible) {
    auto pool_json = json::parse(slurp(fixture("dci_pool.json")));
    const auto ids = pool_json["identifiers"].get<std::vector<std::string>>();
    const auto snippets = pool_json["snippets"].get<std::vector<std::string>>();
    auto rec = svg_record();
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        auto d = dead_code_insertion(rec, ids, snippets, seed);
        ASSERT_TRUE(one_contiguous_insertion(rec.code, d.code, d.declaration)) << d.code;
        std::string restored = d.code;
        restored.erase(d.offset, d.declaration.size() + 1);
        EXPECT_EQ(restored, rec.code);
        EXPECT_NO_THROW(lex(d.code));
        EXPECT_EQ(d.declaration.rfind("char " + d.identifier + "_2[] = \"", 0), 0u);
        EXPECT_EQ(dead_code_insertion(rec, ids, snippets, seed).code, d.code);
    }
}

TEST(Dci, EmptyPoolsRejected) {
    EXPECT_THROW(dead_code_insertion(svg_record(), {}, {"x;"}, 1), AttackError);
    EXPECT_THROW(dead_code_insertion(svg_record(), {"a"}, {}, 1), AttackError);
}

TEST(Dci, AttackLogsTrialsWithinBudget) {
    auto rec = svg_record();
    TwoLevelScorer scorer(rec.code, 0.9, 0.9);
    auto pool_json = json::parse(slurp(fixture("dci_pool.json")));
    auto o = dci_attack(rec, scorer, config(AttackKind::DCI, 5, 1, 4, 100),
                        pool_json["identifiers"].get<std::vector<std::string>>(),
                        pool_json["snippets"].get<std::vector<std::string>>());
    EXPECT_FALSE(o.success);
    EXPECT_EQ(o.edits.size(), 5u);
    EXPECT_LE(o.queries_used, 100);
}

TEST(AttackConfig, JsonRoundTrip) {
    auto c = config(AttackKind::WIR, 7, 3, 99, 150);
    auto back = json(c).get<AttackConfig>();
    EXPECT_EQ(back.kind, AttackKind::WIR);
    EXPECT_EQ(back.max_iterations, 7);
    EXPECT_EQ(back.candidates_per_iteration, 3);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(back.query_budget, 150);
}
