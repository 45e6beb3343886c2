#pragma once

#include "vulninstruct/corpus.hpp"
#include "vulninstruct/features.hpp"
#include "vulninstruct/labels.hpp"
#include "vulninstruct/model_client.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vulninstruct {

inline constexpr std::string_view kDoubleCheck = "Please double-check the answer and analyze its correctness.";

enum class FeatureKind { CveDescription, VulnLines, VulnContext };

std::string_view to_string(FeatureKind k);
std::string_view placeholder_of(FeatureKind k); // "[CVE description]" etc.

// Prompt text assets. Placeholders: [Code], [CVE description],
// [Vulnerability lines], [Vulnerability context], plus [Feature kind],
// [Feature] and [Next step] in the verification template.
struct PromptTemplates {
    std::string system_preamble;
    std::string step1_role_prompt;
    std::string verification_prompt;
    std::map<FeatureKind, std::string> next_step; // requirement appended to each verification turn
    std::string synthesis_prompt;

    static PromptTemplates defaults();
    // Reads system.txt, step1.txt, verification.txt, synthesis.txt and
    // next_<kind>.txt from dir; missing files keep the default text.
    static PromptTemplates from_dir(const std::filesystem::path& dir);
    void write_dir(const std::filesystem::path& dir) const;
    // Throws ConfigError when a template misses its required fragment.
    void validate() const;
};

std::string render_step1(const PromptTemplates& t, const std::string& code);
std::string render_verification(const PromptTemplates& t, FeatureKind kind, const std::string& feature);
std::string render_synthesis(const PromptTemplates& t, const std::string& vuln_lines, const std::string& context);

enum class ReviewStatus { Accepted, NeedsReview, Rejected };

std::string_view to_string(ReviewStatus s);
ReviewStatus review_status_from_string(std::string_view s);

struct CotStep {
    int step_no = 1;
    std::string feature; // "code", "cve_description", "vuln_lines", "vuln_context", "synthesis"
    std::string prompt;
    std::string response;
    std::optional<int> step1_verdict;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    bool truncated = false;
};

struct CotTranscript {
    std::string record_id;
    int label = 0;
    std::vector<CotStep> steps;
    std::string final_interpretation;
    bool final_judgment_correct = false;
    ReviewStatus status = ReviewStatus::NeedsReview;
    bool step1_mismatch = false;
    std::string review_decision; // "", "accept" or "reject"
    long prompt_tokens = 0;
    long completion_tokens = 0;

    std::vector<ChatMessage> history(const std::string& system_preamble) const;
};

void to_json(nlohmann::json& j, const CotStep& s);
void from_json(const nlohmann::json& j, CotStep& s);
void to_json(nlohmann::json& j, const CotTranscript& t);
void from_json(const nlohmann::json& j, CotTranscript& t);

struct CotOptions {
    PromptTemplates templates = PromptTemplates::defaults();
    std::vector<std::string> refusal_patterns = default_refusal_patterns();

    static std::vector<std::string> default_refusal_patterns();
};

// Case-insensitive substring match against the refusal list.
bool is_refusal(const std::string& response, const std::vector<std::string>& patterns);

// Response text with a leading "0:" / "1:" verdict prefix removed.
std::string strip_verdict_prefix(const std::string& response);

struct Step1Result {
    Label verdict = Label::Unparsed;
    std::string explanation;
    CotStep step;
};

// Throws RefusalError when the model declines.
Step1Result run_step1(const VulnRecord& record, ModelClient& client, const CotOptions& options);

// One turn per available feature, CVE description first, then lines, then context.
CotTranscript& run_verification_steps(const VulnRecord& record, const RecordFeatures& features, ModelClient& client,
                                      CotTranscript& transcript, const CotOptions& options);

std::string run_synthesis(const VulnRecord& record, const RecordFeatures& features, CotTranscript& transcript,
                          ModelClient& client, const CotOptions& options);

// Runs every applicable step for one record.
CotTranscript run_record(const VulnRecord& record, const RecordFeatures& features, ModelClient& client,
                         const CotOptions& options);

struct SkippedRecord {
    std::string record_id;
    std::string reason;
};

struct BatchOptions {
    std::uint64_t seed = 0;
    std::optional<long> max_requests;
    std::optional<long> max_tokens;
    int workers = 1;
    std::filesystem::path store_dir; // transcripts.jsonl and skipped.jsonl
};

struct BatchResult {
    std::vector<CotTranscript> transcripts; // every transcript in the store, committed order
    std::vector<SkippedRecord> skipped;
    std::vector<std::string> pending; // selected but not processed
    bool budget_exhausted = false;
    std::size_t selected_per_class = 0;
};

// Seeded equal-count selection from both classes, processed with transcripts
// appended to the store as they complete. Records already in the store are
// not re-run, so an interrupted batch resumes where it stopped.
BatchResult run_balanced_batch(const std::vector<VulnRecord>& records,
                               const std::map<std::string, RecordFeatures>& features, ModelClient& client,
                               const CotOptions& options, const BatchOptions& batch);

std::vector<CotTranscript> read_transcripts(const std::filesystem::path& path);

// needs_review transcripts as JSON-lines with an empty "decision" field.
std::string export_review_queue(const std::vector<CotTranscript>& transcripts,
                                const std::map<std::string, VulnRecord>& records,
                                const std::map<std::string, RecordFeatures>& features);

struct ReviewSummary {
    long accepted = 0;
    long rejected = 0;
    long undecided = 0;
};

// Applies "accept"/"reject" decisions. Throws Error on an unknown record_id or decision.
ReviewSummary apply_review(std::vector<CotTranscript>& transcripts, const std::vector<nlohmann::json>& review_rows);

// Local cve_id -> description mapping.
class CveStore {
public:
    CveStore() = default;
    explicit CveStore(std::map<std::string, std::string> entries) : entries_(std::move(entries)) {}
    static CveStore load(const std::filesystem::path& path);

    std::optional<std::string> lookup(const std::string& cve_id) const;
    void put(const std::string& cve_id, const std::string& description) { entries_[cve_id] = description; }
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::string, std::string> entries_;
};

using HttpGetter = std::function<HttpResponse(const std::string& url)>;

HttpResponse http_get(const std::string& url, int timeout_ms);

// Fetches descriptions from an NVD-style JSON API ({base_url}?cveId=ID),
// caching raw responses on disk.
class CveFetcher {
public:
    CveFetcher(std::string base_url, std::filesystem::path cache_dir, HttpGetter getter = {});

    std::optional<std::string> fetch(const std::string& cve_id);

private:
    std::string base_url_;
    std::filesystem::path cache_dir_;
    HttpGetter getter_;
};

// Fills missing cve_description fields from the store.
void attach_cve_descriptions(std::vector<VulnRecord>& records, const CveStore& store);

} // namespace vulninstruct
