#include "vulninstruct/corpus.hpp"

#include "vulninstruct/errors.hpp"
#include "vulninstruct/jsonl.hpp"
#include "vulninstruct/util.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_set>

namespace vulninstruct {

using nlohmann::json;

namespace {

json opt_to_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> opt_from_json(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

std::optional<int> parse_label_field(const json& v) {
    if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
    if (v.is_number_integer()) {
        auto n = v.get<long long>();
        if (n == 0 || n == 1) return static_cast<int>(n);
        return std::nullopt;
    }
    if (v.is_number_float()) {
        double d = v.get<double>();
        if (d == 0.0 || d == 1.0) return static_cast<int>(d);
        return std::nullopt;
    }
    if (v.is_string()) {
        std::string s = to_lower(trim(v.get<std::string>()));
        if (s == "1" || s == "true") return 1;
        if (s == "0" || s == "false") return 0;
    }
    return std::nullopt;
}

std::optional<std::string> mapped_string(const json& row, const std::string& field) {
    if (field.empty()) return std::nullopt;
    auto it = row.find(field);
    if (it == row.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) {
        std::string s = it->get<std::string>();
        if (s.empty()) return std::nullopt;
        return s;
    }
    return it->dump();
}

} // namespace

void to_json(json& j, const VulnRecord& r) {
    j = json{{"record_id", r.record_id},
             {"code", r.code},
             {"label", r.label},
             {"project", opt_to_json(r.project)},
             {"commit", opt_to_json(r.commit)},
             {"cve_id", opt_to_json(r.cve_id)},
             {"cwe_id", opt_to_json(r.cwe_id)},
             {"cve_description", opt_to_json(r.cve_description)},
             {"patch", opt_to_json(r.patch)},
             {"source_dataset", r.source_dataset},
             {"augmented", r.augmented}};
}

void from_json(const json& j, VulnRecord& r) {
    r.record_id = j.at("record_id").get<std::string>();
    r.code = j.at("code").get<std::string>();
    r.label = j.at("label").get<int>();
    r.project = opt_from_json(j, "project");
    r.commit = opt_from_json(j, "commit");
    r.cve_id = opt_from_json(j, "cve_id");
    r.cwe_id = opt_from_json(j, "cwe_id");
    r.cve_description = opt_from_json(j, "cve_description");
    r.patch = opt_from_json(j, "patch");
    r.source_dataset = j.value("source_dataset", "");
    r.augmented = j.value("augmented", false);
}

std::string normalize_code(std::string_view code) {
    std::string out;
    for (const auto& raw : split_lines(code)) {
        std::string collapsed;
        bool in_space = false;
        for (char c : trim(raw)) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!in_space) collapsed.push_back(' ');
                in_space = true;
            } else {
                collapsed.push_back(c);
                in_space = false;
            }
        }
        if (collapsed.empty()) continue;
        if (!out.empty()) out.push_back('\n');
        out += collapsed;
    }
    return out;
}

std::string compute_record_id(std::string_view code) { return hash64_hex(normalize_code(code)); }

VulnRecord make_record(std::string code, int label, std::string source_dataset) {
    if (label != 0 && label != 1) throw CorpusError("label must be 0 or 1");
    if (trim(code).empty()) throw CorpusError("code must be non-empty");
    VulnRecord r;
    r.record_id = compute_record_id(code);
    r.code = std::move(code);
    r.label = label;
    r.source_dataset = std::move(source_dataset);
    return r;
}

void to_json(json& j, const SchemaMapping& s) {
    j = json{{"code", s.code},       {"label", s.label},   {"project", s.project},
             {"commit", s.commit},   {"cve_id", s.cve_id}, {"cwe_id", s.cwe_id},
             {"cve_description", s.cve_description},       {"patch", s.patch}};
}

void from_json(const json& j, SchemaMapping& s) {
    s.code = j.value("code", "code");
    s.label = j.value("label", "label");
    s.project = j.value("project", "");
    s.commit = j.value("commit", "");
    s.cve_id = j.value("cve_id", "");
    s.cwe_id = j.value("cwe_id", "");
    s.cve_description = j.value("cve_description", "");
    s.patch = j.value("patch", "");
}

IngestResult ingest(const std::filesystem::path& path, const std::string& schema_tag,
                    const SchemaRegistry& schemas) {
    auto schema_it = schemas.find(schema_tag);
    if (schema_it == schemas.end()) throw CorpusError("unknown schema tag: " + schema_tag);
    const SchemaMapping& schema = schema_it->second;

    std::ifstream in(path);
    if (!in) throw CorpusError("cannot read input file: " + path.string());

    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    std::size_t rows = 0;
    auto skip = [&](const std::string& reason) {
        ++result.skipped;
        result.skip_reasons.push_back("line " + std::to_string(line_no) + ": " + reason);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++rows;
        json row = json::parse(line, nullptr, false);
        if (row.is_discarded() || !row.is_object()) {
            skip("not a JSON object");
            continue;
        }
        auto code = mapped_string(row, schema.code);
        if (!code || trim(*code).empty()) {
            skip("missing code");
            continue;
        }
        auto label_it = row.find(schema.label);
        std::optional<int> label;
        if (label_it != row.end()) label = parse_label_field(*label_it);
        if (!label) {
            skip("missing or invalid label");
            continue;
        }
        VulnRecord r = make_record(*code, *label, schema_tag);
        r.project = mapped_string(row, schema.project);
        r.commit = mapped_string(row, schema.commit);
        r.cve_id = mapped_string(row, schema.cve_id);
        r.cwe_id = mapped_string(row, schema.cwe_id);
        r.cve_description = mapped_string(row, schema.cve_description);
        r.patch = mapped_string(row, schema.patch);
        if (r.patch && r.label != 1) {
            skip("patch present on a non-vulnerable row");
            continue;
        }
        result.records.push_back(std::move(r));
    }
    if (rows > 0 && result.records.empty())
        throw CorpusError("no usable rows in " + path.string());
    return result;
}

std::vector<VulnRecord> deduplicate(const std::vector<VulnRecord>& records) {
    std::unordered_set<std::string> seen;
    std::vector<VulnRecord> out;
    for (const auto& r : records) {
        if (seen.insert(compute_record_id(r.code)).second) out.push_back(r);
    }
    return out;
}

std::vector<VulnRecord> balance_undersample(const std::vector<VulnRecord>& records, std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < records.size(); ++i) (records[i].label == 1 ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) throw CorpusError("balancing requires both classes to be present");

    std::vector<std::size_t>& majority = pos.size() > neg.size() ? pos : neg;
    const std::size_t target = std::min(pos.size(), neg.size());
    Rng rng(seed);
    rng.shuffle(majority);
    majority.resize(target);

    std::vector<bool> keep(records.size(), false);
    for (auto i : pos) keep[i] = true;
    for (auto i : neg) keep[i] = true;
    std::vector<VulnRecord> out;
    out.reserve(2 * target);
    for (std::size_t i = 0; i < records.size(); ++i)
        if (keep[i]) out.push_back(records[i]);
    return out;
}

void to_json(json& j, const SplitSet& s) {
    j = json{{"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}

void from_json(const json& j, SplitSet& s) {
    s.train = j.at("train").get<std::vector<std::string>>();
    s.validation = j.at("validation").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
}

SplitSet split(const std::vector<VulnRecord>& records, std::array<int, 3> ratios, std::uint64_t seed) {
    for (int r : ratios)
        if (r < 0) throw CorpusError("split ratios must be non-negative");
    const int ratio_sum = ratios[0] + ratios[1] + ratios[2];
    if (ratio_sum <= 0) throw CorpusError("split ratios must not all be zero");

    std::vector<std::string> pos, neg;
    for (const auto& r : records) (r.label == 1 ? pos : neg).push_back(r.record_id);
    if (pos.size() != neg.size()) throw CorpusError("split requires a 1:1 balanced record list");
    if (pos.size() < 10) throw CorpusError("too few records to populate all splits (need >= 10 per class)");

    // Seed streams per class so that one class's draw does not shift the other.
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    Rng rng_pos(derive_seed(seed, "label=1"));
    Rng rng_neg(derive_seed(seed, "label=0"));
    rng_pos.shuffle(pos);
    rng_neg.shuffle(neg);

    const std::size_t total = pos.size() + neg.size();
    // Evaluation splits round to nearest; train takes whatever is left, which
    // keeps every split within one record of its exact share.
    const auto share = [&](int r) {
        return (2 * total * static_cast<std::size_t>(r) + static_cast<std::size_t>(ratio_sum)) /
               (2 * static_cast<std::size_t>(ratio_sum));
    };
    const std::size_t n_val = share(ratios[1]);
    const std::size_t n_test = share(ratios[2]);
    // An odd evaluation split gives its extra slot to label 0 in validation and
    // to label 1 in test, so train stays exactly balanced.
    const std::size_t neg_val = (n_val + 1) / 2, pos_val = n_val / 2;
    const std::size_t neg_test = n_test / 2, pos_test = (n_test + 1) / 2;

    SplitSet out;
    auto take = [](const std::vector<std::string>& ids, std::size_t from, std::size_t count,
                   std::vector<std::string>& dst) {
        dst.insert(dst.end(), ids.begin() + static_cast<std::ptrdiff_t>(from),
                   ids.begin() + static_cast<std::ptrdiff_t>(from + count));
    };
    take(pos, 0, pos_val, out.validation);
    take(neg, 0, neg_val, out.validation);
    take(pos, pos_val, pos_test, out.test);
    take(neg, neg_val, neg_test, out.test);
    take(pos, pos_val + pos_test, pos.size() - pos_val - pos_test, out.train);
    take(neg, neg_val + neg_test, neg.size() - neg_val - neg_test, out.train);
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

std::vector<VulnRecord> read_records_jsonl(const std::filesystem::path& path) {
    std::vector<VulnRecord> out;
    for (const auto& row : read_jsonl(path)) out.push_back(row.get<VulnRecord>());
    return out;
}

std::string records_to_jsonl(const std::vector<VulnRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += json_line(json(r));
        out.push_back('\n');
    }
    return out;
}

} // namespace vulninstruct
