#include "vulninstruct/instruct.hpp"

#include "vulninstruct/attacks.hpp"
#include "vulninstruct/errors.hpp"
#include "vulninstruct/jsonl.hpp"
#include "vulninstruct/prompt_format.hpp"
#include "vulninstruct/util.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

namespace vulninstruct {

using nlohmann::json;

std::string_view to_string(Task t) {
    switch (t) {
    case Task::Detection: return "Detection";
    case Task::Localization: return "Localization";
    case Task::Interpretation: return "Interpretation";
    }
    return "Detection";
}

Task task_from_string(std::string_view s) {
    if (s == "Detection") return Task::Detection;
    if (s == "Localization") return Task::Localization;
    if (s == "Interpretation") return Task::Interpretation;
    throw Error("unknown task: " + std::string(s));
}

std::string_view instruction_for(Task t) {
    switch (t) {
    case Task::Detection: return kDetectionInstruction;
    case Task::Localization: return kLocalizationInstruction;
    case Task::Interpretation: return kInterpretationInstruction;
    }
    return kDetectionInstruction;
}

void to_json(json& j, const InstructionExample& e) {
    j = json{{"task", to_string(e.task)}, {"instruction", e.instruction}, {"input", e.input},
             {"output", e.output},        {"record_id", e.record_id},     {"augmented", e.augmented}};
}

void from_json(const json& j, InstructionExample& e) {
    e.task = task_from_string(j.at("task").get<std::string>());
    e.instruction = j.at("instruction").get<std::string>();
    e.input = j.at("input").get<std::string>();
    e.output = j.at("output").get<std::string>();
    e.record_id = j.at("record_id").get<std::string>();
    e.augmented = j.at("augmented").get<bool>();
}

IdentifierPool IdentifierPool::harvest(const std::vector<VulnRecord>& records, const TypeNames& types) {
    IdentifierPool pool;
    for (const auto& r : records) {
        std::vector<std::string> names;
        try {
            names = extract_identifiers(r.code, types);
        } catch (const Error&) {
            try {
                const auto sig = significant_tokens(r.code);
                std::set<std::string> seen;
                for (std::size_t i = 0; i < sig.size(); ++i) {
                    const bool call = i + 1 < sig.size() && sig[i + 1].is("(");
                    if (sig[i].is_ident() && !call && !types.contains(sig[i].text) && seen.insert(sig[i].text).second)
                        names.push_back(sig[i].text);
                }
            } catch (const LexError&) {
                continue;
            }
        }
        for (const auto& n : names) {
            if (is_keyword(n) || !is_valid_identifier(n)) continue;
            if (pool.counts[n]++ == 0) pool.identifiers.push_back(n);
        }
    }
    return pool;
}

std::vector<InstructionExample> build_examples(const VulnRecord& record, const RecordFeatures* features,
                                               const CotTranscript* transcript, BuildStats* stats) {
    BuildStats local;
    BuildStats& st = stats ? *stats : local;
    std::vector<InstructionExample> out;
    auto make = [&](Task t, std::string output) {
        out.push_back({t, std::string(instruction_for(t)), record.code, std::move(output), record.record_id,
                       record.augmented});
    };
    make(Task::Detection, std::to_string(record.label));
    ++st.detection;

    if (record.label == 1 && features && features->has_vuln_lines()) {
        const auto lines = split_lines(record.code);
        std::vector<VulnLineEntry> entries;
        for (const auto& e : features->vuln_lines)
            if (e.line_no >= 1 && e.line_no <= static_cast<int>(lines.size()))
                entries.push_back({e.line_no, trim(lines[e.line_no - 1])});
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.line_no < b.line_no; });
        make(Task::Localization, render_vuln_lines(entries));
        ++st.localization;
    } else {
        ++st.skipped_localization;
    }

    if (transcript && transcript->status == ReviewStatus::Accepted && !transcript->final_interpretation.empty()) {
        make(Task::Interpretation, transcript->final_interpretation);
        ++st.interpretation;
    } else {
        ++st.skipped_interpretation;
    }
    return out;
}

std::size_t rename_count(double ratio, std::size_t distinct) {
    if (ratio <= 0 || distinct == 0) return 0;
    const double want = std::ceil(ratio * static_cast<double>(distinct) - 1e-9);
    return std::min(distinct, static_cast<std::size_t>(want));
}

AugmentResult augment_identifiers(const VulnRecord& record, double ratio, const IdentifierPool& pool,
                                  std::uint64_t seed) {
    AugmentResult res;
    res.record = record;
    const auto ids = extract_identifiers(record.code);
    res.distinct_identifiers = ids.size();
    if (ids.empty()) {
        res.unchanged = true;
        return res;
    }
    res.record.augmented = true;
    const std::size_t m = rename_count(ratio, ids.size());
    if (m == 0) return res;
    if (pool.empty()) throw Error("identifier pool is empty");

    Rng rng(seed);
    std::vector<std::string> chosen = ids;
    rng.shuffle(chosen);
    chosen.resize(m);

    const auto existing = identifier_tokens(record.code);
    std::unordered_set<std::string> taken(existing.begin(), existing.end());
    std::vector<std::string> fresh;
    for (const auto& name : pool.identifiers)
        if (!taken.count(name) && !is_keyword(name) && is_valid_identifier(name)) fresh.push_back(name);
    if (fresh.size() < m)
        throw Error("identifier pool exhausted: " + std::to_string(fresh.size()) + " fresh names for " +
                    std::to_string(m) + " renames in record " + record.record_id);
    rng.shuffle(fresh);

    std::string code = record.code;
    for (std::size_t i = 0; i < m; ++i) {
        code = rename(code, chosen[i], fresh[i]);
        res.renames.emplace_back(chosen[i], fresh[i]);
    }
    res.record.code = std::move(code);
    return res;
}

std::string render_instruction(const InstructionExample& example) {
    return render_alpaca_prompt(example.instruction, example.input) + example.output;
}

void sort_examples(std::vector<InstructionExample>& examples) {
    std::stable_sort(examples.begin(), examples.end(), [](const auto& a, const auto& b) {
        if (a.record_id != b.record_id) return a.record_id < b.record_id;
        if (a.task != b.task) return static_cast<int>(a.task) < static_cast<int>(b.task);
        return a.augmented < b.augmented;
    });
}

std::string dataset_jsonl(std::vector<InstructionExample> examples) {
    sort_examples(examples);
    std::string out;
    for (const auto& e : examples) {
        out += json_line(e);
        out += '\n';
    }
    return out;
}

std::string rendered_jsonl(std::vector<InstructionExample> examples) {
    sort_examples(examples);
    std::string out;
    for (const auto& e : examples) {
        out += json_line(json{{"task", to_string(e.task)},
                              {"record_id", e.record_id},
                              {"augmented", e.augmented},
                              {"text", render_instruction(e)}});
        out += '\n';
    }
    return out;
}

json reference_hyperparameters() {
    return json{
        {"llama2_codellama", {{"learning_rate", 1e-4}, {"max_length", 512}, {"batch_size", 32}, {"epochs", 3}}},
        {"starcoder", {{"learning_rate", 2e-5}, {"max_length", 512}, {"batch_size", 16}, {"epochs", 3}}},
        {"code_ptms", {{"learning_rate", 2e-5}, {"max_length", 512}, {"batch_size", 32}, {"epochs", 5}}},
        {"lora",
         {{"rank", 16},
          {"alpha", 32},
          {"target_modules",
           {{"llama2_codellama", {"q_proj", "v_proj", "k_proj", "o_proj"}},
            {"starcoder", {"c_proj", "c_attn", "q_attn"}}}}}},
        {"quantization", "8-bit"}};
}

json dataset_metadata(const std::vector<InstructionExample>& examples, const json& seeds) {
    json counts = {{"Detection", 0}, {"Localization", 0}, {"Interpretation", 0}};
    long augmented = 0;
    for (const auto& e : examples) {
        counts[std::string(to_string(e.task))] = counts[std::string(to_string(e.task))].get<long>() + 1;
        augmented += e.augmented;
    }
    return json{{"examples", examples.size()},
                {"counts_per_task", counts},
                {"augmented_examples", augmented},
                {"seeds", seeds},
                {"template", "alpaca"},
                {"reference_hyperparameters", reference_hyperparameters()}};
}

void emit_dataset(const std::vector<InstructionExample>& examples, const std::filesystem::path& path, const json& seeds,
                  bool also_rendered) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, dataset_jsonl(examples));
    auto meta = path;
    meta.replace_extension(".meta.json");
    write_file_atomic(meta, dataset_metadata(examples, seeds).dump(2) + "\n");
    if (also_rendered) {
        auto rendered = path;
        rendered.replace_extension(".rendered.jsonl");
        write_file_atomic(rendered, rendered_jsonl(examples));
    }
}

} // namespace vulninstruct
