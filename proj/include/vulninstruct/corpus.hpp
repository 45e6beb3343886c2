#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vulninstruct {

// One labeled function, optionally carrying its security patch and CVE data.
struct VulnRecord {
    std::string record_id; // hash64_hex(normalize_code(code))
    std::string code;
    int label = 0; // 1 = vulnerable
    std::optional<std::string> project;
    std::optional<std::string> commit;
    std::optional<std::string> cve_id;
    std::optional<std::string> cwe_id;
    std::optional<std::string> cve_description;
    std::optional<std::string> patch;
    std::string source_dataset;
    bool augmented = false;

    bool operator==(const VulnRecord&) const = default;
};

void to_json(nlohmann::json& j, const VulnRecord& r);
void from_json(const nlohmann::json& j, VulnRecord& r);

// Collapses whitespace runs, trims every line and drops blank lines.
std::string normalize_code(std::string_view code);
std::string compute_record_id(std::string_view code);

// Builds a record with its id computed. Throws CorpusError when the record
// invariants do not hold.
VulnRecord make_record(std::string code, int label, std::string source_dataset);

// Field names of one input dataset. Every field except code and label may be
// left empty when the source does not carry it.
struct SchemaMapping {
    std::string code = "code";
    std::string label = "label";
    std::string project;
    std::string commit;
    std::string cve_id;
    std::string cwe_id;
    std::string cve_description;
    std::string patch;

    bool operator==(const SchemaMapping&) const = default;
};

void to_json(nlohmann::json& j, const SchemaMapping& s);
void from_json(const nlohmann::json& j, SchemaMapping& s);

using SchemaRegistry = std::map<std::string, SchemaMapping>;

struct IngestResult {
    std::vector<VulnRecord> records;
    std::size_t skipped = 0;
    std::vector<std::string> skip_reasons; // "line N: reason"
};

// Reads a JSON-lines file using the mapping registered under schema_tag.
IngestResult ingest(const std::filesystem::path& path, const std::string& schema_tag,
                    const SchemaRegistry& schemas);

// Keeps the first record for each normalized-code hash.
std::vector<VulnRecord> deduplicate(const std::vector<VulnRecord>& records);

// Drops majority-class records uniformly at random until both classes have
// the minority count. Survivors keep their input order.
std::vector<VulnRecord> balance_undersample(const std::vector<VulnRecord>& records, std::uint64_t seed);

struct SplitSet {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;

    bool operator==(const SplitSet&) const = default;
};

void to_json(nlohmann::json& j, const SplitSet& s);
void from_json(const nlohmann::json& j, SplitSet& s);

// Stratified split of a balanced record list. Ratios are train:validation:test.
SplitSet split(const std::vector<VulnRecord>& records, std::array<int, 3> ratios, std::uint64_t seed);

std::vector<VulnRecord> read_records_jsonl(const std::filesystem::path& path);
std::string records_to_jsonl(const std::vector<VulnRecord>& records);

} // namespace vulninstruct
