#include "vulninstruct/cot_sv.hpp"

#include "vulninstruct/errors.hpp"
#include "vulninstruct/jsonl.hpp"
#include "vulninstruct/util.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <thread>

namespace vulninstruct {

using nlohmann::json;

std::string_view to_string(FeatureKind k) {
    switch (k) {
    case FeatureKind::CveDescription: return "CVE description";
    case FeatureKind::VulnLines: return "vulnerability lines";
    case FeatureKind::VulnContext: return "vulnerability context";
    }
    return "";
}

std::string_view placeholder_of(FeatureKind k) {
    switch (k) {
    case FeatureKind::CveDescription: return "[CVE description]";
    case FeatureKind::VulnLines: return "[Vulnerability lines]";
    case FeatureKind::VulnContext: return "[Vulnerability context]";
    }
    return "";
}

namespace {

constexpr std::array<FeatureKind, 3> kFeatureOrder = {FeatureKind::CveDescription, FeatureKind::VulnLines,
                                                      FeatureKind::VulnContext};

std::string feature_file(FeatureKind k) {
    switch (k) {
    case FeatureKind::CveDescription: return "next_cve_description.txt";
    case FeatureKind::VulnLines: return "next_vuln_lines.txt";
    case FeatureKind::VulnContext: return "next_vuln_context.txt";
    }
    return "";
}

std::string feature_tag(FeatureKind k) {
    switch (k) {
    case FeatureKind::CveDescription: return "cve_description";
    case FeatureKind::VulnLines: return "vuln_lines";
    case FeatureKind::VulnContext: return "vuln_context";
    }
    return "";
}

int step_no_of(FeatureKind k) { return 2 + static_cast<int>(k); }

void replace_all(std::string& s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
}

std::string line_numbers(const std::vector<VulnLineEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        if (!out.empty()) out += ", ";
        out += std::to_string(e.line_no);
    }
    return out.empty() ? "none" : out;
}

std::optional<std::string> feature_text(const RecordFeatures& f, FeatureKind k) {
    switch (k) {
    case FeatureKind::CveDescription:
        if (f.cve_description && !trim(*f.cve_description).empty()) return *f.cve_description;
        return std::nullopt;
    case FeatureKind::VulnLines:
        if (f.vuln_lines.empty()) return std::nullopt;
        return render_vuln_lines(f.vuln_lines);
    case FeatureKind::VulnContext:
        if (f.context.empty()) return std::nullopt;
        return render_vuln_lines(f.context);
    }
    return std::nullopt;
}

// Keeps the first `keep` lines.
std::string head_lines(const std::vector<std::string>& lines, std::size_t keep) {
    std::string out;
    for (std::size_t i = 0; i < keep && i < lines.size(); ++i) {
        out += lines[i];
        out += '\n';
    }
    return out;
}

struct Exchange {
    std::string prompt;
    CompletionResponse response;
    bool truncated = false;
};

// Sends history + the next user prompt. Code in the step-1 turn is cut
// tail-first until the conversation fits; the new turn's feature is cut only
// once no code is left.
Exchange exchange(const VulnRecord& record, const CotTranscript& transcript, ModelClient& client,
                  const CotOptions& options, const std::function<std::string(const std::string&)>& render_new,
                  const std::string& feature) {
    const auto& t = options.templates;
    const auto code_lines = split_lines(record.code);
    auto build = [&](const std::string& code, const std::string& feat, std::string* new_prompt) {
        std::vector<ChatMessage> msgs;
        if (!t.system_preamble.empty()) msgs.push_back({"system", t.system_preamble});
        for (std::size_t i = 0; i < transcript.steps.size(); ++i) {
            const auto& s = transcript.steps[i];
            msgs.push_back({"user", i == 0 ? render_step1(t, code) : s.prompt});
            msgs.push_back({"assistant", s.response});
        }
        *new_prompt = transcript.steps.empty() ? render_step1(t, code) : render_new(feat);
        msgs.push_back({"user", *new_prompt});
        return msgs;
    };

    const long budget = client.config().context_budget;
    std::string prompt;
    auto msgs = build(record.code, feature, &prompt);
    bool truncated = false;
    if (ModelClient::estimate_tokens(msgs) > budget) {
        truncated = true;
        std::size_t lo = 0, hi = code_lines.size();
        // largest kept-line count that fits
        while (lo < hi) {
            std::size_t mid = (lo + hi + 1) / 2;
            std::string p;
            if (ModelClient::estimate_tokens(build(head_lines(code_lines, mid), feature, &p)) <= budget) lo = mid;
            else hi = mid - 1;
        }
        const std::string code = head_lines(code_lines, lo);
        msgs = build(code, feature, &prompt);
        if (ModelClient::estimate_tokens(msgs) > budget && !feature.empty()) {
            const auto feat_lines = split_lines(feature);
            std::size_t flo = 0, fhi = feat_lines.size();
            while (flo < fhi) {
                std::size_t mid = (flo + fhi + 1) / 2;
                std::string p;
                if (ModelClient::estimate_tokens(build(code, head_lines(feat_lines, mid), &p)) <= budget) flo = mid;
                else fhi = mid - 1;
            }
            msgs = build(code, head_lines(feat_lines, flo), &prompt);
        }
    }
    CompletionRequest req;
    req.messages = std::move(msgs);
    Exchange ex;
    ex.response = client.request(req);
    ex.prompt = std::move(prompt);
    ex.truncated = truncated;
    if (is_refusal(ex.response.choices.front().text, options.refusal_patterns))
        throw RefusalError("model refused on record " + record.record_id);
    return ex;
}

CotStep make_step(int step_no, std::string feature, Exchange&& ex) {
    CotStep s;
    s.step_no = step_no;
    s.feature = std::move(feature);
    s.prompt = std::move(ex.prompt);
    s.response = ex.response.choices.front().text;
    s.prompt_tokens = ex.response.prompt_tokens;
    s.completion_tokens = ex.response.completion_tokens;
    s.truncated = ex.truncated;
    return s;
}

void account(CotTranscript& t, const CotStep& s) {
    t.prompt_tokens += s.prompt_tokens;
    t.completion_tokens += s.completion_tokens;
}

} // namespace

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.system_preamble =
        "You are a vulnerability detection system for C and C++ code. Always start your answer with a label, "
        "1 if the code is vulnerable and 0 if it is not, followed by a colon and your explanation.";
    t.step1_role_prompt =
        "As a vulnerability detection system, decide whether the following function contains a vulnerability. "
        "Answer in the format \"label: explanation\".\n\n[Code]";
    t.verification_prompt =
        "Additional evidence for this function, its [Feature kind]:\n[Feature]\n\n"
        "Please double-check the answer and analyze its correctness. [Next step]";
    t.next_step[FeatureKind::CveDescription] =
        "Then restate whether the function is vulnerable and describe the flaw the CVE refers to.";
    t.next_step[FeatureKind::VulnLines] =
        "Then explain how the listed lines, which the security patch removed, give rise to the vulnerability.";
    t.next_step[FeatureKind::VulnContext] =
        "Then explain how these dependent statements interact with the vulnerable lines.";
    t.synthesis_prompt =
        "Combine the analysis above into a final vulnerability interpretation in the format \"label: explanation\". "
        "The explanation must refer to the vulnerability lines ([Vulnerability lines]) and the vulnerability "
        "context ([Vulnerability context]) by line number.";
    return t;
}

PromptTemplates PromptTemplates::from_dir(const std::filesystem::path& dir) {
    PromptTemplates t = defaults();
    auto load = [&](const char* name, std::string& field) {
        auto p = dir / name;
        if (std::filesystem::exists(p)) field = read_file(p);
    };
    load("system.txt", t.system_preamble);
    load("step1.txt", t.step1_role_prompt);
    load("verification.txt", t.verification_prompt);
    load("synthesis.txt", t.synthesis_prompt);
    for (auto k : kFeatureOrder) {
        auto p = dir / feature_file(k);
        if (std::filesystem::exists(p)) t.next_step[k] = read_file(p);
    }
    t.validate();
    return t;
}

void PromptTemplates::write_dir(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "system.txt", system_preamble);
    write_file_atomic(dir / "step1.txt", step1_role_prompt);
    write_file_atomic(dir / "verification.txt", verification_prompt);
    write_file_atomic(dir / "synthesis.txt", synthesis_prompt);
    for (auto k : kFeatureOrder) write_file_atomic(dir / feature_file(k), next_step.count(k) ? next_step.at(k) : "");
}

void PromptTemplates::validate() const {
    if (step1_role_prompt.find("[Code]") == std::string::npos)
        throw ConfigError("step-1 template lacks the [Code] placeholder");
    if (verification_prompt.find(kDoubleCheck) == std::string::npos)
        throw ConfigError("verification template lacks the double-check instruction");
    if (verification_prompt.find("[Feature]") == std::string::npos)
        throw ConfigError("verification template lacks the [Feature] placeholder");
    if (synthesis_prompt.find("[Vulnerability lines]") == std::string::npos ||
        synthesis_prompt.find("[Vulnerability context]") == std::string::npos)
        throw ConfigError("synthesis template must reference the vulnerability lines and context");
}

std::string render_step1(const PromptTemplates& t, const std::string& code) {
    std::string out = t.step1_role_prompt;
    replace_all(out, "[Code]", code);
    return out;
}

std::string render_verification(const PromptTemplates& t, FeatureKind kind, const std::string& feature) {
    std::string out = t.verification_prompt;
    replace_all(out, "[Next step]", t.next_step.count(kind) ? t.next_step.at(kind) : "");
    replace_all(out, "[Feature kind]", to_string(kind));
    replace_all(out, "[Feature]", feature);
    replace_all(out, placeholder_of(kind), feature);
    return out;
}

std::string render_synthesis(const PromptTemplates& t, const std::string& vuln_lines, const std::string& context) {
    std::string out = t.synthesis_prompt;
    replace_all(out, "[Vulnerability lines]", vuln_lines);
    replace_all(out, "[Vulnerability context]", context);
    return out;
}

std::string_view to_string(ReviewStatus s) {
    switch (s) {
    case ReviewStatus::Accepted: return "accepted";
    case ReviewStatus::NeedsReview: return "needs_review";
    case ReviewStatus::Rejected: return "rejected";
    }
    return "needs_review";
}

ReviewStatus review_status_from_string(std::string_view s) {
    if (s == "accepted") return ReviewStatus::Accepted;
    if (s == "needs_review") return ReviewStatus::NeedsReview;
    if (s == "rejected") return ReviewStatus::Rejected;
    throw Error("unknown review status: " + std::string(s));
}

std::vector<ChatMessage> CotTranscript::history(const std::string& system_preamble) const {
    std::vector<ChatMessage> out;
    if (!system_preamble.empty()) out.push_back({"system", system_preamble});
    for (const auto& s : steps) {
        out.push_back({"user", s.prompt});
        out.push_back({"assistant", s.response});
    }
    return out;
}

void to_json(json& j, const CotStep& s) {
    j = json{{"step_no", s.step_no},
             {"feature", s.feature},
             {"prompt", s.prompt},
             {"response", s.response},
             {"step1_verdict", s.step1_verdict ? json(*s.step1_verdict) : json(nullptr)},
             {"prompt_tokens", s.prompt_tokens},
             {"completion_tokens", s.completion_tokens},
             {"truncated", s.truncated}};
}

void from_json(const json& j, CotStep& s) {
    s.step_no = j.at("step_no").get<int>();
    s.feature = j.at("feature").get<std::string>();
    s.prompt = j.at("prompt").get<std::string>();
    s.response = j.at("response").get<std::string>();
    s.step1_verdict = j.at("step1_verdict").is_null() ? std::nullopt : std::optional<int>(j["step1_verdict"].get<int>());
    s.prompt_tokens = j.value("prompt_tokens", 0L);
    s.completion_tokens = j.value("completion_tokens", 0L);
    s.truncated = j.value("truncated", false);
}

void to_json(json& j, const CotTranscript& t) {
    j = json{{"record_id", t.record_id},
             {"label", t.label},
             {"steps", t.steps},
             {"final_interpretation", t.final_interpretation},
             {"final_judgment_correct", t.final_judgment_correct},
             {"status", to_string(t.status)},
             {"step1_mismatch", t.step1_mismatch},
             {"review_decision", t.review_decision},
             {"token_usage", {{"prompt_tokens", t.prompt_tokens}, {"completion_tokens", t.completion_tokens}}}};
}

void from_json(const json& j, CotTranscript& t) {
    t.record_id = j.at("record_id").get<std::string>();
    t.label = j.at("label").get<int>();
    t.steps = j.at("steps").get<std::vector<CotStep>>();
    t.final_interpretation = j.at("final_interpretation").get<std::string>();
    t.final_judgment_correct = j.at("final_judgment_correct").get<bool>();
    t.status = review_status_from_string(j.at("status").get<std::string>());
    t.step1_mismatch = j.value("step1_mismatch", false);
    t.review_decision = j.value("review_decision", "");
    if (j.contains("token_usage")) {
        t.prompt_tokens = j["token_usage"].value("prompt_tokens", 0L);
        t.completion_tokens = j["token_usage"].value("completion_tokens", 0L);
    }
}

std::vector<std::string> CotOptions::default_refusal_patterns() {
    return {"i'm sorry, but i can't", "i am sorry, but i cannot", "i cannot assist", "i can't assist",
            "i can't help with", "i cannot help with", "as an ai language model, i cannot", "i must decline"};
}

bool is_refusal(const std::string& response, const std::vector<std::string>& patterns) {
    const std::string lower = to_lower(response);
    for (const auto& p : patterns)
        if (!p.empty() && lower.find(to_lower(p)) != std::string::npos) return true;
    return false;
}

std::string strip_verdict_prefix(const std::string& response) {
    static const std::regex prefix(R"(^\s*(?:label\s*[:=]?\s*)?[01]\s*[:.\-]\s*)", std::regex::icase);
    std::smatch m;
    if (std::regex_search(response, m, prefix)) return trim(response.substr(m.length(0)));
    return trim(response);
}

Step1Result run_step1(const VulnRecord& record, ModelClient& client, const CotOptions& options) {
    CotTranscript empty;
    empty.record_id = record.record_id;
    Exchange ex = exchange(record, empty, client, options, nullptr, "");
    Step1Result r;
    r.step = make_step(1, "code", std::move(ex));
    r.verdict = parse_label(r.step.response);
    if (r.verdict != Label::Unparsed) r.step.step1_verdict = static_cast<int>(r.verdict);
    r.explanation = strip_verdict_prefix(r.step.response);
    return r;
}

CotTranscript& run_verification_steps(const VulnRecord& record, const RecordFeatures& features, ModelClient& client,
                                      CotTranscript& transcript, const CotOptions& options) {
    if (record.label != 1) throw Error("verification steps apply to vulnerable records only");
    for (auto kind : kFeatureOrder) {
        auto text = feature_text(features, kind);
        if (!text) continue;
        auto render = [&](const std::string& feat) { return render_verification(options.templates, kind, feat); };
        Exchange ex = exchange(record, transcript, client, options, render, *text);
        CotStep step = make_step(step_no_of(kind), feature_tag(kind), std::move(ex));
        account(transcript, step);
        transcript.steps.push_back(std::move(step));
    }
    return transcript;
}

std::string run_synthesis(const VulnRecord& record, const RecordFeatures& features, CotTranscript& transcript,
                          ModelClient& client, const CotOptions& options) {
    const std::string lines = line_numbers(features.vuln_lines);
    const std::string ctx = line_numbers(features.context);
    auto render = [&](const std::string&) { return render_synthesis(options.templates, lines, ctx); };
    Exchange ex = exchange(record, transcript, client, options, render, "");
    CotStep step = make_step(5, "synthesis", std::move(ex));
    account(transcript, step);
    const Label verdict = parse_label(step.response);
    transcript.final_interpretation = strip_verdict_prefix(step.response);
    transcript.final_judgment_correct = verdict != Label::Unparsed && static_cast<int>(verdict) == record.label;
    transcript.status = transcript.final_judgment_correct ? ReviewStatus::Accepted : ReviewStatus::NeedsReview;
    transcript.steps.push_back(std::move(step));
    return transcript.final_interpretation;
}

CotTranscript run_record(const VulnRecord& record, const RecordFeatures& features, ModelClient& client,
                         const CotOptions& options) {
    CotTranscript t;
    t.record_id = record.record_id;
    t.label = record.label;
    Step1Result s1 = run_step1(record, client, options);
    t.step1_mismatch = s1.verdict == Label::Unparsed || static_cast<int>(s1.verdict) != record.label;
    account(t, s1.step);
    t.steps.push_back(std::move(s1.step));
    if (record.label == 0) {
        t.final_interpretation = s1.explanation;
        t.final_judgment_correct = !t.step1_mismatch;
        t.status = t.final_judgment_correct ? ReviewStatus::Accepted : ReviewStatus::NeedsReview;
        return t;
    }
    run_verification_steps(record, features, client, t, options);
    run_synthesis(record, features, t, client, options);
    return t;
}

std::vector<CotTranscript> read_transcripts(const std::filesystem::path& path) {
    std::vector<CotTranscript> out;
    if (!std::filesystem::exists(path)) return out;
    for (const auto& row : read_jsonl(path)) out.push_back(row.get<CotTranscript>());
    return out;
}

namespace {

bool eligible_vulnerable(const VulnRecord& r, const std::map<std::string, RecordFeatures>& features) {
    auto it = features.find(r.record_id);
    if (it == features.end()) return r.cve_description.has_value();
    return it->second.has_vuln_lines() || it->second.cve_description.has_value();
}

// A kill during append can leave a partial last line; drop it so the record is redone.
void drop_torn_tail(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    if (text.empty() || text.back() == '\n') return;
    const auto cut = text.rfind('\n');
    std::filesystem::resize_file(path, cut == std::string::npos ? 0 : cut + 1);
}

void append_line(const std::filesystem::path& path, const json& row) {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw Error("cannot append to " + path.string());
    out << json_line(row) << '\n';
    out.flush();
}

} // namespace

BatchResult run_balanced_batch(const std::vector<VulnRecord>& records,
                               const std::map<std::string, RecordFeatures>& features, ModelClient& client,
                               const CotOptions& options, const BatchOptions& batch) {
    options.templates.validate();
    std::vector<const VulnRecord*> pos, neg;
    for (const auto& r : records) {
        if (r.label == 1 && eligible_vulnerable(r, features)) pos.push_back(&r);
        else if (r.label == 0) neg.push_back(&r);
    }
    auto by_id = [](const VulnRecord* a, const VulnRecord* b) { return a->record_id < b->record_id; };
    std::sort(pos.begin(), pos.end(), by_id);
    std::sort(neg.begin(), neg.end(), by_id);
    Rng rp(derive_seed(batch.seed, "cot:label=1"));
    Rng rn(derive_seed(batch.seed, "cot:label=0"));
    rp.shuffle(pos);
    rn.shuffle(neg);
    const std::size_t n = std::min(pos.size(), neg.size());
    std::vector<const VulnRecord*> queue;
    for (std::size_t i = 0; i < n; ++i) {
        queue.push_back(pos[i]);
        queue.push_back(neg[i]);
    }

    BatchResult result;
    result.selected_per_class = n;
    std::filesystem::create_directories(batch.store_dir);
    const auto transcripts_path = batch.store_dir / "transcripts.jsonl";
    const auto skipped_path = batch.store_dir / "skipped.jsonl";
    for (const auto& p : {transcripts_path, skipped_path})
        if (!std::filesystem::exists(p)) std::ofstream(p, std::ios::binary);
        else drop_torn_tail(p);
    result.transcripts = read_transcripts(transcripts_path);
    if (std::filesystem::exists(skipped_path))
        for (const auto& row : read_jsonl(skipped_path))
            result.skipped.push_back({row.at("record_id").get<std::string>(), row.at("reason").get<std::string>()});
    std::set<std::string> done;
    for (const auto& t : result.transcripts) done.insert(t.record_id);
    for (const auto& s : result.skipped) done.insert(s.record_id);

    std::vector<const VulnRecord*> todo;
    for (const auto* r : queue)
        if (!done.count(r->record_id)) todo.push_back(r);

    const bool zero_budget = (batch.max_requests && *batch.max_requests <= 0) || (batch.max_tokens && *batch.max_tokens <= 0);
    if (zero_budget || todo.empty()) {
        for (const auto* r : todo) result.pending.push_back(r->record_id);
        result.budget_exhausted = zero_budget && !todo.empty();
        return result;
    }

    client.set_budget(std::make_shared<RequestBudget>(batch.max_requests, batch.max_tokens));

    struct Slot {
        enum class State { Waiting, Done, Skipped, Budget, Failed } state = State::Waiting;
        CotTranscript transcript;
        std::string reason;
        std::exception_ptr error;
    };
    std::vector<Slot> slots(todo.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::mutex commit_mu;
    std::size_t committed = 0;
    std::optional<std::size_t> halt_at;

    auto commit_ready = [&] {
        // commit_mu held
        while (committed < slots.size() && !halt_at) {
            Slot& s = slots[committed];
            if (s.state == Slot::State::Waiting) break;
            if (s.state == Slot::State::Done) {
                append_line(transcripts_path, s.transcript);
                result.transcripts.push_back(s.transcript);
            } else if (s.state == Slot::State::Skipped) {
                append_line(skipped_path, json{{"record_id", todo[committed]->record_id}, {"reason", s.reason}});
                result.skipped.push_back({todo[committed]->record_id, s.reason});
            } else {
                halt_at = committed;
                break;
            }
            ++committed;
        }
    };

    auto worker = [&] {
        while (!stop.load()) {
            const std::size_t i = next.fetch_add(1);
            if (i >= todo.size()) return;
            const VulnRecord& rec = *todo[i];
            Slot local;
            try {
                auto fit = features.find(rec.record_id);
                RecordFeatures f = fit != features.end() ? fit->second : RecordFeatures{};
                if (fit == features.end()) {
                    f.record_id = rec.record_id;
                    f.label = rec.label;
                    f.cve_description = rec.cve_description;
                }
                local.transcript = run_record(rec, f, client, options);
                local.state = Slot::State::Done;
            } catch (const BudgetExhausted&) {
                local.state = Slot::State::Budget;
                stop = true;
            } catch (const AuthError&) {
                local.state = Slot::State::Failed;
                local.error = std::current_exception();
                stop = true;
            } catch (const RefusalError& e) {
                local.state = Slot::State::Skipped;
                local.reason = std::string("refusal: ") + e.what();
            } catch (const BudgetError& e) {
                local.state = Slot::State::Skipped;
                local.reason = std::string("over context budget: ") + e.what();
            } catch (const EndpointError& e) {
                local.state = Slot::State::Skipped;
                local.reason = std::string("endpoint failure: ") + e.what();
            }
            std::lock_guard lock(commit_mu);
            slots[i] = std::move(local);
            commit_ready();
        }
    };

    const int workers = std::max(1, batch.workers);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    client.set_budget(nullptr);

    {
        std::lock_guard lock(commit_mu);
        commit_ready();
    }
    for (std::size_t i = committed; i < todo.size(); ++i) result.pending.push_back(todo[i]->record_id);
    if (halt_at) {
        const Slot& s = slots[*halt_at];
        if (s.state == Slot::State::Failed) std::rethrow_exception(s.error);
        result.budget_exhausted = true;
    }
    return result;
}

std::string export_review_queue(const std::vector<CotTranscript>& transcripts,
                                const std::map<std::string, VulnRecord>& records,
                                const std::map<std::string, RecordFeatures>& features) {
    std::string out;
    for (const auto& t : transcripts) {
        if (t.status != ReviewStatus::NeedsReview) continue;
        json row{{"record_id", t.record_id}, {"label", t.label}};
        auto r = records.find(t.record_id);
        row["code"] = r != records.end() ? json(r->second.code) : json(nullptr);
        auto f = features.find(t.record_id);
        if (f != features.end()) {
            row["features"] = {{"cve_description", f->second.cve_description ? json(*f->second.cve_description)
                                                                              : json(nullptr)},
                               {"vuln_lines", render_vuln_lines(f->second.vuln_lines)},
                               {"vuln_context", render_vuln_lines(f->second.context)}};
        } else {
            row["features"] = nullptr;
        }
        row["interpretation"] = t.final_interpretation;
        row["final_judgment_correct"] = t.final_judgment_correct;
        row["decision"] = "";
        out += json_line(row);
        out += '\n';
    }
    return out;
}

ReviewSummary apply_review(std::vector<CotTranscript>& transcripts, const std::vector<json>& review_rows) {
    std::map<std::string, CotTranscript*> by_id;
    for (auto& t : transcripts) by_id[t.record_id] = &t;
    ReviewSummary s;
    for (const auto& row : review_rows) {
        const std::string id = row.at("record_id").get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error("review file names unknown record_id " + id);
        const std::string d = to_lower(trim(row.value("decision", "")));
        if (d.empty()) {
            ++s.undecided;
        } else if (d == "accept") {
            it->second->status = ReviewStatus::Accepted;
            it->second->review_decision = d;
            ++s.accepted;
        } else if (d == "reject") {
            it->second->status = ReviewStatus::Rejected;
            it->second->review_decision = d;
            ++s.rejected;
        } else {
            throw Error("unknown review decision '" + d + "' for record " + id);
        }
    }
    return s;
}

CveStore CveStore::load(const std::filesystem::path& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("CVE mapping must be a JSON object: " + path.string());
    std::map<std::string, std::string> entries;
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.value().is_string()) entries[it.key()] = it.value().get<std::string>();
    return CveStore(std::move(entries));
}

std::optional<std::string> CveStore::lookup(const std::string& cve_id) const {
    auto it = entries_.find(cve_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

CveFetcher::CveFetcher(std::string base_url, std::filesystem::path cache_dir, HttpGetter getter)
    : base_url_(std::move(base_url)), cache_dir_(std::move(cache_dir)), getter_(std::move(getter)) {
    if (!getter_) getter_ = [](const std::string& url) { return http_get(url, 30000); };
}

std::optional<std::string> CveFetcher::fetch(const std::string& cve_id) {
    static const std::regex id_re(R"(CVE-\d{4}-\d{4,})");
    if (!std::regex_match(cve_id, id_re)) throw Error("malformed CVE id: " + cve_id);
    std::string body;
    const auto cache_path = cache_dir_ / (cve_id + ".json");
    if (!cache_dir_.empty() && std::filesystem::exists(cache_path)) {
        body = read_file(cache_path);
    } else {
        HttpResponse resp = getter_(base_url_ + "?cveId=" + cve_id);
        if (resp.status == 404) return std::nullopt;
        if (resp.status != 200) throw EndpointError("CVE source returned HTTP " + std::to_string(resp.status), resp.status);
        body = resp.body;
        if (!cache_dir_.empty()) {
            std::filesystem::create_directories(cache_dir_);
            write_file_atomic(cache_path, body);
        }
    }
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("vulnerabilities") || j["vulnerabilities"].empty()) return std::nullopt;
    const auto& cve = j["vulnerabilities"][0].value("cve", json::object());
    for (const auto& d : cve.value("descriptions", json::array()))
        if (d.value("lang", "") == "en") return d.value("value", "");
    return std::nullopt;
}

void attach_cve_descriptions(std::vector<VulnRecord>& records, const CveStore& store) {
    for (auto& r : records)
        if (!r.cve_description && r.cve_id)
            if (auto d = store.lookup(*r.cve_id)) r.cve_description = *d;
}

} // namespace vulninstruct
