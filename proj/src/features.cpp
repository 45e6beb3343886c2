#include "vulninstruct/features.hpp"

#include "vulninstruct/errors.hpp"

namespace vulninstruct {

using nlohmann::json;

void to_json(json& j, const RecordFeatures& f) {
    j = json{{"record_id", f.record_id},
             {"label", f.label},
             {"cve_description", f.cve_description ? json(*f.cve_description) : json(nullptr)},
             {"vuln_lines", f.vuln_lines},
             {"k", f.k},
             {"context", f.context},
             {"unmatched", f.unmatched},
             {"unmapped_lines", f.unmapped_lines},
             {"no_vuln_lines", f.no_vuln_lines},
             {"warnings", f.warnings}};
}

void from_json(const json& j, RecordFeatures& f) {
    f.record_id = j.at("record_id").get<std::string>();
    f.label = j.at("label").get<int>();
    f.cve_description = j.at("cve_description").is_null()
                            ? std::nullopt
                            : std::optional<std::string>(j["cve_description"].get<std::string>());
    f.vuln_lines = j.at("vuln_lines").get<std::vector<VulnLineEntry>>();
    f.k = j.value("k", 1);
    f.context = j.at("context").get<std::vector<VulnLineEntry>>();
    f.unmatched = j.value("unmatched", std::vector<std::string>{});
    f.unmapped_lines = j.value("unmapped_lines", std::vector<int>{});
    f.no_vuln_lines = j.value("no_vuln_lines", false);
    f.warnings = j.value("warnings", std::vector<std::string>{});
}

RecordFeatures extract_features(const VulnRecord& record, int k, const TypeNames& types) {
    RecordFeatures f;
    f.record_id = record.record_id;
    f.label = record.label;
    f.k = k;
    f.cve_description = record.cve_description;
    if (record.label != 1 || !record.patch) {
        f.no_vuln_lines = record.label == 1;
        return f;
    }
    try {
        auto extraction = extract_vuln_lines(parse_unified_diff(*record.patch), record);
        f.vuln_lines = std::move(extraction.lines.entries);
        f.unmatched = std::move(extraction.unmatched);
        f.no_vuln_lines = extraction.no_vuln_lines;
    } catch (const PatchParseError& e) {
        f.no_vuln_lines = true;
        f.warnings.push_back(std::string("patch: ") + e.what());
        return f;
    }
    if (f.vuln_lines.empty()) return f;
    try {
        Pdg pdg = build_pdg(segment_statements(record.code, types));
        std::vector<int> lines;
        for (const auto& e : f.vuln_lines) lines.push_back(e.line_no);
        auto ctx = k_hop_context(pdg, lines, k);
        f.context = std::move(ctx.context_lines);
        f.unmapped_lines = std::move(ctx.unmapped_lines);
        if (!f.unmapped_lines.empty()) f.warnings.push_back("vulnerability lines without a statement node");
        f.pdg = std::move(pdg);
    } catch (const SegmentError& e) {
        f.warnings.push_back(std::string("pdg: ") + e.what());
    } catch (const LexError& e) {
        f.warnings.push_back(std::string("pdg: ") + e.what());
    }
    return f;
}

} // namespace vulninstruct
