#include "test_support.hpp"

#include "vulninstruct/corpus.hpp"
#include "vulninstruct/errors.hpp"
#include "vulninstruct/patch.hpp"
#include "vulninstruct/util.hpp"

#include <gtest/gtest.h>

using namespace vulninstruct;
using namespace testsupport;

namespace {

int count_tag(const Hunk& h, LineTag t) {
    return static_cast<int>(std::count_if(h.lines.begin(), h.lines.end(), [&](const HunkLine& l) { return l.tag == t; }));
}

VulnRecord record_with(const std::string& code, const std::string& patch) {
    VulnRecord r = make_record(code, 1, "fixture");
    r.patch = patch;
    return r;
}

// Every position whose line and the hunk's surrounding old-side lines agree.
std::vector<int> occurrence_oracle(const std::vector<std::string>& code_lines, const Hunk& h, std::size_t del_index) {
    std::vector<std::string> old_side;
    std::size_t target = 0;
    for (std::size_t i = 0; i < h.lines.size(); ++i) {
        if (h.lines[i].tag == LineTag::Added) continue;
        if (i == del_index) target = old_side.size();
        old_side.push_back(trim(h.lines[i].text));
    }
    std::vector<int> hits;
    for (std::size_t start = 0; start + old_side.size() <= code_lines.size() + target; ++start) {
        if (start < target) continue;
        const std::size_t base = start - target;
        bool ok = true;
        for (std::size_t j = 0; ok && j < old_side.size(); ++j) {
            if (base + j >= code_lines.size()) {
                ok = false;
                break;
            }
            ok = trim(code_lines[base + j]) == old_side[j];
        }
        if (ok) hits.push_back(static_cast<int>(start + 1));
    }
    return hits;
}

} // namespace

TEST(ParseDiff, OneDeletedOneAdded) {
    auto p = parse_unified_diff("--- a/x.c\n+++ b/x.c\n@@ -1,3 +1,3 @@\n a;\n-b;\n+c;\n d;\n");
    ASSERT_EQ(p.hunk_count(), 1u);
    const auto& h = p.files[0].hunks[0];
    EXPECT_EQ(count_tag(h, LineTag::Deleted), 1);
    EXPECT_EQ(count_tag(h, LineTag::Added), 1);
}

TEST(ParseDiff, AddOnlyHasNoDeletions) {
    auto p = parse_unified_diff("--- a/x.c\n+++ b/x.c\n@@ -1,2 +1,3 @@\n a;\n+b;\n c;\n");
    EXPECT_EQ(count_tag(p.files[0].hunks[0], LineTag::Deleted), 0);
}

TEST(ParseDiff, ThreeHunkFixtureCountsMatchHeaders) {
    auto p = parse_unified_diff(slurp(fixture("three_hunk.patch")));
    ASSERT_EQ(p.files.size(), 1u);
    ASSERT_EQ(p.files[0].hunks.size(), 3u);
    // Header fields hand-counted from the fixture.
    const std::vector<std::array<int, 4>> headers = {{12, 6, 12, 7}, {40, 8, 41, 8}, {70, 7, 71, 6}};
    const std::vector<std::array<int, 3>> tags = {{6, 0, 1}, {6, 2, 2}, {6, 1, 0}}; // context, deleted, added
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& h = p.files[0].hunks[i];
        EXPECT_EQ(h.old_start, headers[i][0]);
        EXPECT_EQ(h.old_len, headers[i][1]);
        EXPECT_EQ(h.new_start, headers[i][2]);
        EXPECT_EQ(h.new_len, headers[i][3]);
        EXPECT_EQ(count_tag(h, LineTag::Context), tags[i][0]);
        EXPECT_EQ(count_tag(h, LineTag::Deleted), tags[i][1]);
        EXPECT_EQ(count_tag(h, LineTag::Added), tags[i][2]);
        EXPECT_EQ(count_tag(h, LineTag::Context) + count_tag(h, LineTag::Deleted), h.old_len);
        EXPECT_EQ(count_tag(h, LineTag::Context) + count_tag(h, LineTag::Added), h.new_len);
    }
}

TEST(ParseDiff, MalformedHeaderRejected) {
    EXPECT_THROW(parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,2 +1 @\n a\n"), PatchParseError);
}

TEST(ParseDiff, CountMismatchNamesHunk) {
    try {
        parse_unified_diff("--- a/x\n+++ b/x\n@@ -1,1 +1,1 @@\n a\n@@ -5,3 +5,3 @@\n a\n-b\n+c\n");
        FAIL() << "expected PatchParseError";
    } catch (const PatchParseError& e) {
        EXPECT_NE(std::string(e.what()).find("hunk 2"), std::string::npos) << e.what();
    }
}

TEST(ParseDiff, RoundTripHunkBodies) {
    for (const char* name : {"three_hunk.patch", "svg_probe.patch", "dup_statement.patch"}) {
        const std::string text = slurp(fixture(name));
        auto p = parse_unified_diff(text);
        EXPECT_EQ(render_patch(p), text) << name;
        for (const auto& f : p.files)
            for (const auto& h : f.hunks) {
                std::string body = render_hunk(h);
                EXPECT_NE(text.find(body.substr(body.find('\n') + 1)), std::string::npos) << name;
            }
        EXPECT_EQ(parse_unified_diff(render_patch(p)), p) << name;
    }
}

TEST(VulnLines, SvgProbeLineNine) {
    auto r = record_with(slurp(fixture("svg_probe.c")), slurp(fixture("svg_probe.patch")));
    auto x = extract_vuln_lines(parse_unified_diff(*r.patch), r);
    ASSERT_EQ(x.lines.entries.size(), 1u);
    EXPECT_EQ(x.lines.entries[0], (VulnLineEntry{9, "b += ff_subtitles_next_line(b);"}));
    EXPECT_FALSE(x.no_vuln_lines);
    EXPECT_TRUE(x.unmatched.empty());
}

TEST(VulnLines, AddOnlyFlagged) {
    auto r = record_with("int f(int a)\n{\n    return a;\n}\n", "");
    auto x = extract_vuln_lines(
        parse_unified_diff("--- a/f.c\n+++ b/f.c\n@@ -1,3 +1,4 @@\n int f(int a)\n {\n+    if (!a) return 0;\n     return a;\n"), r);
    EXPECT_TRUE(x.no_vuln_lines);
    EXPECT_TRUE(x.lines.entries.empty());
}

TEST(VulnLines, DuplicateStatementResolvedToSecondOccurrence) {
    const std::string code = slurp(fixture("dup_statement.c"));
    const auto lines = split_lines(code);
    ASSERT_EQ(trim(lines[3]), "q->pos++;");
    ASSERT_EQ(trim(lines[11]), "q->pos++;");
    auto patch = parse_unified_diff(slurp(fixture("dup_statement.patch")));
    const auto& h = patch.files[0].hunks[0];
    std::size_t del = 0;
    while (h.lines[del].tag != LineTag::Deleted) ++del;
    auto oracle = occurrence_oracle(lines, h, del);
    ASSERT_EQ(oracle, std::vector<int>{12});
    auto x = extract_vuln_lines(patch, record_with(code, slurp(fixture("dup_statement.patch"))));
    ASSERT_EQ(x.lines.entries.size(), 1u);
    EXPECT_EQ(x.lines.entries[0].line_no, oracle[0]);
}

TEST(VulnLines, UnmatchedDeletionsReported) {
    auto r = record_with("int f(void)\n{\n    return 1;\n}\n", "");
    auto x = extract_vuln_lines(
        parse_unified_diff("--- a/f.c\n+++ b/f.c\n@@ -1,2 +1,2 @@\n int f(void)\n-    return 2;\n+    return 3;\n"), r);
    EXPECT_TRUE(x.no_vuln_lines);
    EXPECT_EQ(x.unmatched, std::vector<std::string>{"return 2;"});
}

TEST(VulnLines, BlankAndCommentDeletionsExcluded) {
    const std::string code = "int f(int a)\n{\n    // old note\n\n    a = a + 1;\n    return a;\n}\n";
    auto r = record_with(code, "");
    auto x = extract_vuln_lines(parse_unified_diff("--- a/f.c\n+++ b/f.c\n@@ -3,4 +3,2 @@\n-    // old note\n-\n-    a = a + 1;\n+    a += 1;\n     return a;\n"),
                                r);
    ASSERT_EQ(x.lines.entries.size(), 1u);
    EXPECT_EQ(x.lines.entries[0].line_no, 5);
}

TEST(VulnLines, MultiFilePatchUsesMatchingHunksOnly) {
    const std::string code = "int set(struct o *o, int v)\n{\n    o->v = v;\n    return 0;\n}\n";
    const std::string patch = "diff --git a/o.h b/o.h\n--- a/o.h\n+++ b/o.h\n@@ -1,3 +1,3 @@\n struct o {\n-    int v;\n+    long v;\n };\n"
                              "diff --git a/o.c b/o.c\n--- a/o.c\n+++ b/o.c\n@@ -10,3 +10,4 @@ int set(struct o *o, int v)\n {\n-    o->v = v;\n+    if (v < 0) return -1;\n+    o->v = v;\n     return 0;\n";
    auto x = extract_vuln_lines(parse_unified_diff(patch), record_with(code, patch));
    ASSERT_EQ(x.lines.entries.size(), 1u);
    EXPECT_EQ(x.lines.entries[0].line_no, 3);
}

TEST(VulnLines, EntryTextMatchesCodeLine) {
    const std::string code = slurp(fixture("svg_probe.c"));
    const auto lines = split_lines(code);
    auto x = extract_vuln_lines(parse_unified_diff(slurp(fixture("svg_probe.patch"))), record_with(code, ""));
    for (const auto& e : x.lines.entries) {
        ASSERT_GE(e.line_no, 1);
        ASSERT_LE(e.line_no, static_cast<int>(lines.size()));
        EXPECT_EQ(trim(lines[static_cast<std::size_t>(e.line_no - 1)]), e.text);
    }
}
