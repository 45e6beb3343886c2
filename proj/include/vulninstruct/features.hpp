#pragma once

#include "vulninstruct/corpus.hpp"
#include "vulninstruct/lexer.hpp"
#include "vulninstruct/patch.hpp"
#include "vulninstruct/pdg.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace vulninstruct {

// Patch- and graph-derived evidence for one record.
struct RecordFeatures {
    std::string record_id;
    int label = 0;
    std::optional<std::string> cve_description;
    std::vector<VulnLineEntry> vuln_lines;
    int k = 1;
    std::vector<VulnLineEntry> context;
    std::vector<std::string> unmatched;
    std::vector<int> unmapped_lines;
    bool no_vuln_lines = false;
    std::vector<std::string> warnings;
    std::optional<Pdg> pdg; // kept in memory only

    bool has_vuln_lines() const { return !vuln_lines.empty(); }
};

void to_json(nlohmann::json& j, const RecordFeatures& f);
void from_json(const nlohmann::json& j, RecordFeatures& f);

// cve_description is taken from the record; callers may fill it from a CVE store.
RecordFeatures extract_features(const VulnRecord& record, int k = 1, const TypeNames& types = TypeNames::defaults());

} // namespace vulninstruct
