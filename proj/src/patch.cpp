#include "vulninstruct/patch.hpp"

#include "vulninstruct/corpus.hpp"
#include "vulninstruct/errors.hpp"
#include "vulninstruct/util.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>

namespace vulninstruct {

namespace {

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

// Splits on '\n' without touching '\r', so bodies survive a round trip.
std::vector<std::string> raw_lines(std::string_view text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            out.emplace_back(text.substr(start));
            break;
        }
        out.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return out;
}

std::string header_path(std::string_view line) {
    std::string rest(line.substr(4));
    auto tab = rest.find('\t');
    if (tab != std::string::npos) rest.resize(tab);
    return rest;
}

// Marks the old-side lines of a hunk that contain nothing but comment text.
std::vector<bool> comment_only_flags(const std::vector<std::string>& lines) {
    std::vector<bool> flags;
    bool in_block = false;
    for (const auto& line : lines) {
        bool has_code = false;
        bool has_comment = in_block;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (in_block) {
                if (line.compare(i, 2, "*/") == 0) {
                    in_block = false;
                    ++i;
                }
                continue;
            }
            char c = line[i];
            if (line.compare(i, 2, "//") == 0) {
                has_comment = true;
                break;
            }
            if (line.compare(i, 2, "/*") == 0) {
                in_block = true;
                has_comment = true;
                ++i;
                continue;
            }
            if (c == '"' || c == '\'') {
                has_code = true;
                for (++i; i < line.size() && line[i] != c; ++i)
                    if (line[i] == '\\') ++i;
                continue;
            }
            if (!std::isspace(static_cast<unsigned char>(c))) has_code = true;
        }
        flags.push_back(has_comment && !has_code);
    }
    return flags;
}

} // namespace

std::size_t UnifiedPatch::hunk_count() const {
    std::size_t n = 0;
    for (const auto& f : files) n += f.hunks.size();
    return n;
}

UnifiedPatch parse_unified_diff(std::string_view text) {
    if (trim(text).empty()) throw PatchParseError("empty diff text", -1);
    static const std::regex kHunkHeader(R"(^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@(.*)$)");

    const auto lines = raw_lines(text);
    UnifiedPatch patch;
    FileDiff* current = nullptr;
    int hunk_index = 0;

    auto new_file = [&]() -> FileDiff* {
        patch.files.emplace_back();
        return &patch.files.back();
    };

    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (starts_with(line, "diff ")) {
            current = new_file();
            current->header_lines.push_back(line);
            continue;
        }
        if (starts_with(line, "--- ") && i + 1 < lines.size() && starts_with(lines[i + 1], "+++ ")) {
            if (current == nullptr || !current->hunks.empty() || !current->old_path.empty())
                current = new_file();
            current->header_lines.push_back(line);
            current->header_lines.push_back(lines[i + 1]);
            current->old_path = header_path(line);
            current->new_path = header_path(lines[i + 1]);
            ++i;
            continue;
        }
        if (starts_with(line, "@@")) {
            std::smatch m;
            if (!std::regex_match(line, m, kHunkHeader))
                throw PatchParseError("malformed hunk header: " + line, hunk_index);
            if (current == nullptr) current = new_file();
            Hunk hunk;
            hunk.old_start = std::stoi(m[1].str());
            hunk.old_len = m[2].matched ? std::stoi(m[2].str()) : 1;
            hunk.new_start = std::stoi(m[3].str());
            hunk.new_len = m[4].matched ? std::stoi(m[4].str()) : 1;
            hunk.section = m[5].str();

            int old_left = hunk.old_len;
            int new_left = hunk.new_len;
            while (old_left > 0 || new_left > 0) {
                ++i;
                if (i >= lines.size())
                    throw PatchParseError("hunk body shorter than its header counts", hunk_index);
                const std::string& body = lines[i];
                if (!body.empty() && body[0] == '\\') {
                    if (!hunk.lines.empty()) hunk.lines.back().no_newline_at_end = true;
                    continue;
                }
                HunkLine hl;
                if (body.empty()) {
                    hl = {LineTag::Context, "", false};
                } else if (body[0] == ' ') {
                    hl = {LineTag::Context, body.substr(1), false};
                } else if (body[0] == '-') {
                    hl = {LineTag::Deleted, body.substr(1), false};
                } else if (body[0] == '+') {
                    hl = {LineTag::Added, body.substr(1), false};
                } else {
                    throw PatchParseError("hunk body shorter than its header counts", hunk_index);
                }
                if (hl.tag != LineTag::Added) --old_left;
                if (hl.tag != LineTag::Deleted) --new_left;
                if (old_left < 0 || new_left < 0)
                    throw PatchParseError("hunk body longer than its header counts", hunk_index);
                hunk.lines.push_back(std::move(hl));
            }
            if (i + 1 < lines.size() && !lines[i + 1].empty() && lines[i + 1][0] == '\\') {
                if (!hunk.lines.empty()) hunk.lines.back().no_newline_at_end = true;
                ++i;
            }
            current->hunks.push_back(std::move(hunk));
            ++hunk_index;
            continue;
        }
        if (current != nullptr && current->hunks.empty()) {
            // index, mode and similarity lines between "diff" and the first hunk
            current->header_lines.push_back(line);
        }
    }
    return patch;
}

std::string render_hunk(const Hunk& hunk) {
    std::string out = "@@ -" + std::to_string(hunk.old_start) + "," + std::to_string(hunk.old_len) + " +" +
                      std::to_string(hunk.new_start) + "," + std::to_string(hunk.new_len) + " @@" +
                      hunk.section + "\n";
    for (const auto& l : hunk.lines) {
        out.push_back(l.tag == LineTag::Context ? ' ' : l.tag == LineTag::Deleted ? '-' : '+');
        out += l.text;
        out.push_back('\n');
        if (l.no_newline_at_end) out += "\\ No newline at end of file\n";
    }
    return out;
}

std::string render_patch(const UnifiedPatch& patch) {
    std::string out;
    for (const auto& f : patch.files) {
        for (const auto& h : f.header_lines) out += h + "\n";
        for (const auto& hunk : f.hunks) out += render_hunk(hunk);
    }
    return out;
}

VulnLineExtraction extract_vuln_lines(const UnifiedPatch& patch, const VulnRecord& record) {
    VulnLineExtraction result;
    result.lines.record_id = record.record_id;

    const auto code_lines = split_lines(record.code);
    const int n = static_cast<int>(code_lines.size());
    std::vector<std::string> code_trim(code_lines.size());
    std::multimap<std::string, int> occurrences; // trimmed text -> 1-based line
    for (int l = 1; l <= n; ++l) {
        code_trim[l - 1] = trim(code_lines[l - 1]);
        if (!code_trim[l - 1].empty()) occurrences.emplace(code_trim[l - 1], l);
    }

    std::vector<const Hunk*> hunks;
    for (const auto& f : patch.files)
        for (const auto& h : f.hunks) hunks.push_back(&h);
    std::stable_sort(hunks.begin(), hunks.end(),
                     [](const Hunk* a, const Hunk* b) { return a->old_start < b->old_start; });

    std::set<int> used;
    int cursor = 0;
    auto code_at = [&](int line) -> const std::string* {
        return line >= 1 && line <= n ? &code_trim[line - 1] : nullptr;
    };

    for (const Hunk* hunk : hunks) {
        std::vector<std::string> old_raw;
        std::vector<bool> is_deleted;
        for (const auto& hl : hunk->lines) {
            if (hl.tag == LineTag::Added) continue;
            old_raw.push_back(hl.text);
            is_deleted.push_back(hl.tag == LineTag::Deleted);
        }
        const auto comment_only = comment_only_flags(old_raw);
        std::vector<std::string> old_trim;
        for (const auto& s : old_raw) old_trim.push_back(trim(s));

        std::vector<int> relevant; // old-side indices of deletions that carry code
        for (std::size_t k = 0; k < old_raw.size(); ++k)
            if (is_deleted[k] && !old_trim[k].empty() && !comment_only[k]) relevant.push_back(static_cast<int>(k));
        if (relevant.empty()) continue;

        // Align the hunk's old side against the function: every occurrence of a
        // deleted line proposes an offset, scored by how many old-side lines agree.
        std::set<int> offsets;
        for (int k : relevant) {
            auto [b, e] = occurrences.equal_range(old_trim[k]);
            for (auto it = b; it != e; ++it) offsets.insert(it->second - k);
        }
        int best_offset = 0;
        int best_score = -1;
        bool best_follows = false;
        for (int o : offsets) {
            int score = 0;
            for (std::size_t i = 0; i < old_trim.size(); ++i) {
                const std::string* c = code_at(o + static_cast<int>(i));
                if (c && !old_trim[i].empty() && *c == old_trim[i]) ++score;
            }
            bool follows = o + relevant.front() > cursor;
            if (score > best_score || (score == best_score && follows && !best_follows)) {
                best_offset = o;
                best_score = score;
                best_follows = follows;
            }
        }

        int hunk_max = cursor;
        for (int k : relevant) {
            int line = best_score >= 0 ? best_offset + k : -1;
            const std::string* c = code_at(line);
            if (!(c && *c == old_trim[k] && !used.count(line))) {
                // Fall back to the nearest unused occurrence after the cursor.
                line = -1;
                int first_unused = -1;
                auto [b, e] = occurrences.equal_range(old_trim[k]);
                for (auto it = b; it != e; ++it) {
                    if (used.count(it->second)) continue;
                    if (first_unused < 0 || it->second < first_unused) first_unused = it->second;
                    if (it->second > cursor && (line < 0 || it->second < line)) line = it->second;
                }
                if (line < 0) line = first_unused;
            }
            if (line < 0) {
                result.unmatched.push_back(old_trim[k]);
                continue;
            }
            used.insert(line);
            result.lines.entries.push_back({line, code_trim[line - 1]});
            hunk_max = std::max(hunk_max, line);
        }
        cursor = hunk_max;
    }

    std::sort(result.lines.entries.begin(), result.lines.entries.end(),
              [](const VulnLineEntry& a, const VulnLineEntry& b) { return a.line_no < b.line_no; });
    result.no_vuln_lines = result.lines.entries.empty();
    return result;
}

std::string render_vuln_lines(const std::vector<VulnLineEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        if (!out.empty()) out.push_back('\n');
        out += std::to_string(e.line_no) + ": " + e.text;
    }
    return out;
}

void to_json(nlohmann::json& j, const VulnLineEntry& e) { j = nlohmann::json{{"line", e.line_no}, {"text", e.text}}; }

void from_json(const nlohmann::json& j, VulnLineEntry& e) {
    e.line_no = j.at("line").get<int>();
    e.text = j.at("text").get<std::string>();
}

} // namespace vulninstruct
