#include "test_support.hpp"

#include "vulninstruct/corpus.hpp"
#include "vulninstruct/errors.hpp"
#include "vulninstruct/pipeline.hpp"
#include "vulninstruct/util.hpp"

#include <gtest/gtest.h>

using namespace vulninstruct;
using namespace testsupport;

namespace {

SchemaRegistry default_schemas() { return {{"plain", SchemaMapping{}}}; }

SchemaRegistry mini_schemas() { return load_config(data_file("demo_config.json")).schemas; }

std::vector<VulnRecord> synthetic(int pos, int neg) {
    std::vector<VulnRecord> out;
    for (int i = 0; i < pos; ++i) out.push_back(make_record("int v" + std::to_string(i) + "(void) { return 1; }", 1, "t"));
    for (int i = 0; i < neg; ++i) out.push_back(make_record("int s" + std::to_string(i) + "(void) { return 0; }", 0, "t"));
    return out;
}

int label_of(const std::vector<VulnRecord>& rs, const std::string& id) {
    for (const auto& r : rs)
        if (r.record_id == id) return r.label;
    return -1;
}

// Independent whitespace collapse for the pairwise oracle.
std::string collapse(const std::string& code) {
    std::string out;
    for (const auto& raw : split_lines(code)) {
        std::string line;
        bool space = false;
        for (char c : raw) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                space = true;
                continue;
            }
            if (space && !line.empty()) line += ' ';
            space = false;
            line += c;
        }
        if (!line.empty()) out += line + "\n";
    }
    return out;
}

} // namespace

TEST(Record, IdIsHashOfNormalizedCode) {
    auto a = make_record("int f(void)\n{\n    return 0;\n}\n", 0, "t");
    auto b = make_record("\n\nint   f(void)\n{\n\treturn 0;   \n}", 0, "t");
    EXPECT_EQ(a.record_id, b.record_id);
    EXPECT_EQ(a.record_id.size(), 16u);
    EXPECT_EQ(a.record_id, sha256_hex(normalize_code(a.code)).substr(0, 16));
}

TEST(Record, InvariantsEnforced) {
    EXPECT_THROW(make_record("   ", 0, "t"), CorpusError);
    EXPECT_THROW(make_record("x;", 2, "t"), CorpusError);
}

TEST(Record, JsonHasExactlyTheRecordFields) {
    auto r = make_record("int f(void) { return 0; }", 1, "t");
    r.patch = "--- a\n+++ b\n";
    nlohmann::json j = r;
    std::set<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.insert(it.key());
    EXPECT_EQ(keys, (std::set<std::string>{"record_id", "code", "label", "project", "commit", "cve_id", "cwe_id",
                                           "cve_description", "patch", "source_dataset", "augmented"}));
    EXPECT_EQ(j.get<VulnRecord>(), r);
}

TEST(Ingest, EmptyFileGivesEmptyList) {
    TempDir d("ingest");
    std::ofstream(d / "empty.jsonl").close();
    auto res = ingest(d / "empty.jsonl", "plain", default_schemas());
    EXPECT_TRUE(res.records.empty());
    EXPECT_EQ(res.skipped, 0u);
}

TEST(Ingest, PatchRetained) {
    TempDir d("ingest");
    std::ofstream(d / "one.jsonl") << R"({"code":"int f(void) { return 0; }","label":1,"patch":"--- a/f\n+++ b/f\n"})" << "\n";
    SchemaRegistry s{{"plain", SchemaMapping{}}};
    s["plain"].patch = "patch";
    auto res = ingest(d / "one.jsonl", "plain", s);
    ASSERT_EQ(res.records.size(), 1u);
    ASSERT_TRUE(res.records[0].patch.has_value());
    EXPECT_EQ(*res.records[0].patch, "--- a/f\n+++ b/f\n");
}

TEST(Ingest, Errors) {
    TempDir d("ingest");
    EXPECT_THROW(ingest(d / "missing.jsonl", "plain", default_schemas()), CorpusError);
    std::ofstream(d / "bad.jsonl") << "not json\n{\"label\":1}\n";
    EXPECT_THROW(ingest(d / "bad.jsonl", "nope", default_schemas()), CorpusError);
    EXPECT_THROW(ingest(d / "bad.jsonl", "plain", default_schemas()), CorpusError);
}

TEST(Ingest, MiniCorpusCounts) {
    // The bundled file has 40 non-empty rows: one truncated JSON object and one row without code.
    const auto text = slurp(data_file("corpus.jsonl"));
    ASSERT_EQ(std::count(text.begin(), text.end(), '\n'), 40);
    auto res = ingest(data_file("corpus.jsonl"), "mini", mini_schemas());
    EXPECT_EQ(res.records.size(), 38u);
    EXPECT_EQ(res.skipped, 2u);
}

TEST(Dedup, ExactAndWhitespaceDuplicates) {
    auto a = make_record("int f(void)\n{\n    return 0;\n}\n", 0, "t");
    EXPECT_EQ(deduplicate({a, a}).size(), 1u);
    auto b = make_record("int f(void)\n\n{\n\treturn   0;  \n  }\n\n", 0, "t");
    auto out = deduplicate({a, b});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].code, a.code);
}

TEST(Dedup, MiniCorpusMatchesPairwiseOracle) {
    auto records = ingest(data_file("corpus.jsonl"), "mini", mini_schemas()).records;
    std::size_t survivors = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        bool dup = false;
        for (std::size_t j = 0; j < i && !dup; ++j) dup = collapse(records[i].code) == collapse(records[j].code);
        if (!dup) ++survivors;
    }
    EXPECT_EQ(survivors, 35u);
    auto once = deduplicate(records);
    EXPECT_EQ(once.size(), survivors);
    EXPECT_EQ(deduplicate(once), once);
}

TEST(Balance, AlreadyBalancedUnchanged) {
    auto rs = synthetic(10, 10);
    EXPECT_EQ(balance_undersample(rs, 1), rs);
}

TEST(Balance, MajorityUndersampled) {
    auto rs = synthetic(10, 30);
    auto out = balance_undersample(rs, 5);
    EXPECT_EQ(std::count_if(out.begin(), out.end(), [](auto& r) { return r.label == 1; }), 10);
    EXPECT_EQ(std::count_if(out.begin(), out.end(), [](auto& r) { return r.label == 0; }), 10);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(out[static_cast<std::size_t>(i)], rs[static_cast<std::size_t>(i)]);
}

TEST(Balance, SameSeedSameSurvivors) {
    auto rs = synthetic(7, 25);
    EXPECT_EQ(balance_undersample(rs, 42), balance_undersample(rs, 42));
    EXPECT_NE(balance_undersample(rs, 42), balance_undersample(rs, 43));
}

TEST(Balance, OneClassAbsent) { EXPECT_THROW(balance_undersample(synthetic(3, 0), 1), CorpusError); }

TEST(Split, HundredRecords) {
    auto rs = synthetic(50, 50);
    auto s = split(rs, {8, 1, 1}, 3);
    EXPECT_EQ(s.train.size(), 80u);
    EXPECT_EQ(s.validation.size(), 10u);
    EXPECT_EQ(s.test.size(), 10u);
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
        long pos = 0;
        for (const auto& id : *part) pos += label_of(rs, id);
        EXPECT_EQ(pos * 2, static_cast<long>(part->size()));
    }
}

TEST(Split, TwentyRecords) {
    auto s = split(synthetic(10, 10), {8, 1, 1}, 3);
    EXPECT_EQ(s.train.size(), 16u);
    EXPECT_EQ(s.validation.size(), 2u);
    EXPECT_EQ(s.test.size(), 2u);
}

TEST(Split, TooFewRecords) { EXPECT_THROW(split(synthetic(9, 9), {8, 1, 1}, 3), CorpusError); }

TEST(Split, SoundnessAcrossSizes) {
    for (int n = 10; n <= 40; ++n) {
        auto rs = synthetic(n, n);
        auto s = split(rs, {8, 1, 1}, static_cast<std::uint64_t>(n));
        std::set<std::string> all, seen;
        for (const auto& r : rs) all.insert(r.record_id);
        std::size_t total = 0;
        for (const auto* part : {&s.train, &s.validation, &s.test}) {
            long pos = 0;
            for (const auto& id : *part) {
                EXPECT_TRUE(seen.insert(id).second) << "duplicate id across splits";
                pos += label_of(rs, id);
            }
            EXPECT_LE(std::labs(2 * pos - static_cast<long>(part->size())), 1);
            total += part->size();
        }
        EXPECT_EQ(seen, all);
        EXPECT_EQ(total, rs.size());
        const double N = 2.0 * n;
        EXPECT_LE(std::abs(static_cast<double>(s.validation.size()) - N / 10), 1.0);
        EXPECT_LE(std::abs(static_cast<double>(s.test.size()) - N / 10), 1.0);
        EXPECT_LE(std::abs(static_cast<double>(s.train.size()) - N * 8 / 10), 1.0 + 1e-9);
        EXPECT_EQ(split(rs, {8, 1, 1}, static_cast<std::uint64_t>(n)), s);
    }
}
