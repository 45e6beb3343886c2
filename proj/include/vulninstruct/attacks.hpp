#pragma once

#include "vulninstruct/corpus.hpp"
#include "vulninstruct/labels.hpp"
#include "vulninstruct/lexer.hpp"
#include "vulninstruct/model_client.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vulninstruct {

// Parameters and declared locals in first-occurrence order, minus anything
// that ever appears in call position.
std::vector<std::string> extract_identifiers(std::string_view code, const TypeNames& types = TypeNames::defaults());

// Every distinct identifier token spelled in the code (strings and comments excluded).
std::vector<std::string> identifier_tokens(std::string_view code);

// Renames identifier tokens equal to `from`. Member names after '.' or '->'
// and tags after struct/union/enum are left alone. Throws AttackError when
// `to` is not a valid identifier or already occurs in the code.
std::string rename(std::string_view code, const std::string& from, const std::string& to);

enum class AttackKind { MHM, WIR, DCI };

std::string_view to_string(AttackKind k);
AttackKind attack_kind_from_string(std::string_view s);

struct AttackConfig {
    AttackKind kind = AttackKind::MHM;
    int max_iterations = 50;
    int candidates_per_iteration = 5;
    std::uint64_t seed = 0;
    long query_budget = 500;
};

void to_json(nlohmann::json& j, const AttackConfig& c);
void from_json(const nlohmann::json& j, AttackConfig& c);

struct AttackOutcome {
    std::string record_id;
    AttackKind kind = AttackKind::MHM;
    bool success = false;
    long queries_used = 0;
    std::string adversarial_code;
    nlohmann::json edits = nlohmann::json::array();
};

void to_json(nlohmann::json& j, const AttackOutcome& o);
void from_json(const nlohmann::json& j, AttackOutcome& o);

struct LabelScore {
    Label label = Label::Unparsed;
    double p_truth = 0.0; // probability mass on the ground-truth label
    long queries = 1;
};

class LabelScorer {
public:
    virtual ~LabelScorer() = default;
    virtual LabelScore score(const std::string& code, int truth) = 0;
    virtual bool stochastic() const { return false; }
};

// Scores through ModelClient::label_probability with the detection instruction.
class ClientScorer : public LabelScorer {
public:
    ClientScorer(ModelClient& client, std::string instruction);
    LabelScore score(const std::string& code, int truth) override;
    bool stochastic() const override;

private:
    ModelClient& client_;
    std::string instruction_;
};

// min(1, (1 - p_new) / (1 - p)) with 1 - p floored at 1e-6.
double mh_acceptance(double p, double p_new);

AttackOutcome mhm_attack(const VulnRecord& record, LabelScorer& scorer, const AttackConfig& config,
                         const std::vector<std::string>& pool);

struct RankedIdentifier {
    std::string name;
    double delta = 0.0; // p(clean) - p(name renamed to the placeholder)
};

// Placeholder used for importance ranking: "UNK", suffixed when taken.
std::string unk_placeholder(std::string_view code);

// Identifiers ordered by descending delta; ties keep extraction order.
std::vector<RankedIdentifier> wir_rank(const std::string& code, const std::vector<std::string>& identifiers,
                                       LabelScorer& scorer, int truth, double p_clean, long* queries = nullptr,
                                       long query_budget = -1);

AttackOutcome wir_random_attack(const VulnRecord& record, LabelScorer& scorer, const AttackConfig& config,
                                const std::vector<std::string>& pool);

struct DeadCodeInsertion {
    std::string code;
    std::string declaration;
    std::size_t offset = 0; // byte offset of the inserted " " + declaration
    std::string identifier;
    std::string snippet;
};

// Byte offsets right after a ';' or '{' where a declaration may be inserted.
std::vector<std::size_t> dci_insertion_points(std::string_view code);

std::string dci_declaration(const std::string& identifier, const std::string& snippet);

DeadCodeInsertion dead_code_insertion(const VulnRecord& record, const std::vector<std::string>& pool,
                                      const std::vector<std::string>& snippet_pool, std::uint64_t seed);

// Up to max_iterations independent single insertions into the original; stops
// on the first flip, otherwise keeps the lowest truth-probability variant.
AttackOutcome dci_attack(const VulnRecord& record, LabelScorer& scorer, const AttackConfig& config,
                         const std::vector<std::string>& pool, const std::vector<std::string>& snippet_pool);

AttackOutcome run_attack(const VulnRecord& record, LabelScorer& scorer, const AttackConfig& config,
                         const std::vector<std::string>& pool, const std::vector<std::string>& snippet_pool);

// Trimmed statement lines (ending in ';') across the records, deduplicated, in order.
std::vector<std::string> harvest_snippets(const std::vector<VulnRecord>& records);

} // namespace vulninstruct
