#pragma once

#include "vulninstruct/corpus.hpp"
#include "vulninstruct/cot_sv.hpp"
#include "vulninstruct/features.hpp"
#include "vulninstruct/lexer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vulninstruct {

enum class Task { Detection, Localization, Interpretation };

std::string_view to_string(Task t);
Task task_from_string(std::string_view s);

inline constexpr std::string_view kDetectionInstruction = "Detect whether the following code contains vulnerabilities.";
inline constexpr std::string_view kLocalizationInstruction =
    "Identify any security vulnerabilities in the following code, and specify the lines where they occur.";
inline constexpr std::string_view kInterpretationInstruction =
    "Analyze the following code from the perspective of whether it contains vulnerabilities.";

std::string_view instruction_for(Task t);

struct InstructionExample {
    Task task = Task::Detection;
    std::string instruction;
    std::string input;
    std::string output;
    std::string record_id;
    bool augmented = false;

    bool operator==(const InstructionExample&) const = default;
};

void to_json(nlohmann::json& j, const InstructionExample& e);
void from_json(const nlohmann::json& j, InstructionExample& e);

struct IdentifierPool {
    std::vector<std::string> identifiers; // first-seen order
    std::map<std::string, long> counts;   // records each name was harvested from

    bool empty() const { return identifiers.empty(); }

    // Declared variable names of every record; records that do not segment
    // contribute their non-call identifier tokens instead.
    static IdentifierPool harvest(const std::vector<VulnRecord>& records, const TypeNames& types = TypeNames::defaults());
};

struct BuildStats {
    long detection = 0;
    long localization = 0;
    long interpretation = 0;
    long skipped_localization = 0;
    long skipped_interpretation = 0;
};

// Detection always; Localization when vulnerability lines exist; Interpretation
// when the transcript is accepted. Localization text is read back from the
// record's own code so renamed identifiers show up in the output.
std::vector<InstructionExample> build_examples(const VulnRecord& record, const RecordFeatures* features,
                                               const CotTranscript* transcript, BuildStats* stats = nullptr);

struct AugmentResult {
    VulnRecord record;
    std::vector<std::pair<std::string, std::string>> renames; // original -> new, in application order
    std::size_t distinct_identifiers = 0;                    // D
    bool unchanged = false;                                   // D == 0
};

// Renames exactly ceil(ratio * D) distinct declared identifiers to pool names
// absent from the code. Throws Error when the pool runs out of fresh names.
AugmentResult augment_identifiers(const VulnRecord& record, double ratio, const IdentifierPool& pool, std::uint64_t seed);

std::size_t rename_count(double ratio, std::size_t distinct);

// Alpaca rendering including the response body.
std::string render_instruction(const InstructionExample& example);

// Sorted by record_id, then task, then original before augmented.
void sort_examples(std::vector<InstructionExample>& examples);

std::string dataset_jsonl(std::vector<InstructionExample> examples);
std::string rendered_jsonl(std::vector<InstructionExample> examples);

// Fine-tuning settings the dataset was designed for; recorded as documentation.
nlohmann::json reference_hyperparameters();

nlohmann::json dataset_metadata(const std::vector<InstructionExample>& examples, const nlohmann::json& seeds);

// Writes the JSON-lines file and, next to it, <stem>.meta.json.
void emit_dataset(const std::vector<InstructionExample>& examples, const std::filesystem::path& path,
                  const nlohmann::json& seeds, bool also_rendered = false);

} // namespace vulninstruct
