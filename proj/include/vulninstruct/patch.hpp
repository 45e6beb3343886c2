#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace vulninstruct {

struct VulnRecord;

enum class LineTag { Context, Deleted, Added };

struct HunkLine {
    LineTag tag;
    std::string text;             // without the leading tag character
    bool no_newline_at_end = false; // followed by a "\ No newline at end of file" marker

    bool operator==(const HunkLine&) const = default;
};

struct Hunk {
    int old_start = 0;
    int old_len = 0;
    int new_start = 0;
    int new_len = 0;
    std::string section; // trailing text after the closing "@@"
    std::vector<HunkLine> lines;

    bool operator==(const Hunk&) const = default;
};

struct FileDiff {
    std::vector<std::string> header_lines; // "diff --git", "index", "---", "+++" ...
    std::string old_path;
    std::string new_path;
    std::vector<Hunk> hunks;

    bool operator==(const FileDiff&) const = default;
};

struct UnifiedPatch {
    std::vector<FileDiff> files;

    std::size_t hunk_count() const;
    bool operator==(const UnifiedPatch&) const = default;
};

// Parses GNU/git unified diffs. Throws PatchParseError on a malformed hunk
// header or when a hunk body disagrees with its header counts.
UnifiedPatch parse_unified_diff(std::string_view text);

std::string render_hunk(const Hunk& hunk);
std::string render_patch(const UnifiedPatch& patch);

struct VulnLineEntry {
    int line_no = 0; // 1-based within the record's code
    std::string text; // trimmed code line

    bool operator==(const VulnLineEntry&) const = default;
};

struct VulnLines {
    std::string record_id;
    std::vector<VulnLineEntry> entries; // ascending by line_no
};

struct VulnLineExtraction {
    VulnLines lines;
    std::vector<std::string> unmatched; // trimmed deleted lines with no counterpart in the function
    bool no_vuln_lines = false;
};

// Maps the patch's deleted lines onto the record's function line numbering.
// Blank and comment-only deletions are ignored.
VulnLineExtraction extract_vuln_lines(const UnifiedPatch& patch, const VulnRecord& record);

// "N: text" lines joined by '\n'.
std::string render_vuln_lines(const std::vector<VulnLineEntry>& entries);

void to_json(nlohmann::json& j, const VulnLineEntry& e);
void from_json(const nlohmann::json& j, VulnLineEntry& e);

} // namespace vulninstruct
