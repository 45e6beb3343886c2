#pragma once

#include "vulninstruct/attacks.hpp"
#include "vulninstruct/corpus.hpp"
#include "vulninstruct/errors.hpp"
#include "vulninstruct/model_client.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace vulninstruct {

inline constexpr std::string_view kToolVersion = "0.3.0";

struct InputSpec {
    std::string path;
    std::string schema;

    bool operator==(const InputSpec&) const = default;
};

struct StageSeeds {
    std::uint64_t balance = 11;
    std::uint64_t split = 12;
    std::uint64_t cot = 13;
    std::uint64_t augment = 14;
    std::uint64_t attack = 15;

    bool operator==(const StageSeeds&) const = default;
};

struct CotSettings {
    std::optional<long> max_requests;
    std::optional<long> max_tokens;
    int workers = 1;
    std::string templates_dir; // empty: built-in templates
    std::vector<std::string> refusal_patterns;

    bool operator==(const CotSettings&) const = default;
};

struct AugmentSettings {
    double ratio = 0.10;
    bool alongside = true; // false: augmented copies replace their originals
    bool enabled = true;
    std::vector<std::string> tasks{"Detection"}; // tasks that get augmented examples

    bool operator==(const AugmentSettings&) const = default;
};

struct EvalSettings {
    int density_bins = 20;
    std::string split = "test";

    bool operator==(const EvalSettings&) const = default;
};

struct PipelineConfig {
    SchemaRegistry schemas;
    std::vector<InputSpec> inputs;
    std::string cve_store; // optional cve_id -> description JSON
    StageSeeds seeds;
    std::array<int, 3> split_ratios{8, 1, 1};
    int k = 1;
    EndpointConfig endpoint;
    CotSettings cot;
    AugmentSettings augmentation;
    std::vector<AttackConfig> attacks;
    EvalSettings evaluation;
    std::string output_dir = "out";
    std::string mock_fixture; // used by `demo` when --mock is not given

    // Relative paths in the config resolve against this directory; not serialized.
    std::filesystem::path base_dir;

    bool operator==(const PipelineConfig& o) const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

PipelineConfig load_config(const std::filesystem::path& path);

// sha256 of the canonical config JSON without output_dir.
std::string config_hash(const PipelineConfig& c);

std::filesystem::path resolve(const PipelineConfig& c, const std::string& path);

class MissingArtifact : public Error {
public:
    MissingArtifact(const std::string& stage, const std::filesystem::path& path)
        : Error("missing artifact " + path.string() + "; run the `" + stage + "` stage first"), stage_(stage) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct RunOptions {
    PipelineConfig config;
    std::filesystem::path out;
    std::string mock_fixture; // non-empty: in-process scripted endpoint
    bool emit_pdg = false;
    bool emit_density_csv = false;
    bool emit_rendered = false;
    std::string attack_kind; // attack stage: restrict to one kind
    std::ostream* log = nullptr;
};

void stage_ingest(const RunOptions& o);
void stage_features(const RunOptions& o);
void stage_interpret(const RunOptions& o);
void stage_augment(const RunOptions& o);
void stage_build_dataset(const RunOptions& o);
void stage_attack(const RunOptions& o);
void stage_evaluate(const RunOptions& o);
void stage_review_list(const RunOptions& o, std::ostream& out);
void stage_review_apply(const RunOptions& o, const std::filesystem::path& review_file);
void stage_demo(const RunOptions& o);

// Holds <out>/.lock for the lifetime of the object.
class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path& out_dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::filesystem::path path_;
};

// Parses argv, runs the stage and returns the process exit status.
int run_subcommand(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace vulninstruct
