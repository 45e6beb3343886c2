#include "vulninstruct/pipeline.hpp"

#include "vulninstruct/cot_sv.hpp"
#include "vulninstruct/evaluation.hpp"
#include "vulninstruct/features.hpp"
#include "vulninstruct/instruct.hpp"
#include "vulninstruct/jsonl.hpp"
#include "vulninstruct/mock_endpoint.hpp"
#include "vulninstruct/util.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <iostream>
#include <set>

namespace vulninstruct {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- config ---------------------------------------------------------------

namespace {

json opt_long(const std::optional<long>& v) { return v ? json(*v) : json(nullptr); }

std::optional<long> read_opt_long(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<long>();
}

} // namespace

void to_json(json& j, const PipelineConfig& c) {
    json schemas = json::object();
    for (const auto& [tag, m] : c.schemas) schemas[tag] = m;
    json inputs = json::array();
    for (const auto& in : c.inputs) inputs.push_back({{"path", in.path}, {"schema", in.schema}});
    json attacks = json::array();
    for (const auto& a : c.attacks) attacks.push_back(a);
    j = json{{"schemas", schemas},
             {"inputs", inputs},
             {"cve_store", c.cve_store},
             {"seeds",
              {{"balance", c.seeds.balance},
               {"split", c.seeds.split},
               {"cot", c.seeds.cot},
               {"augment", c.seeds.augment},
               {"attack", c.seeds.attack}}},
             {"split_ratios", c.split_ratios},
             {"k", c.k},
             {"endpoint", c.endpoint},
             {"cot",
              {{"max_requests", opt_long(c.cot.max_requests)},
               {"max_tokens", opt_long(c.cot.max_tokens)},
               {"workers", c.cot.workers},
               {"templates_dir", c.cot.templates_dir},
               {"refusal_patterns", c.cot.refusal_patterns}}},
             {"augmentation",
              {{"ratio", c.augmentation.ratio},
               {"alongside", c.augmentation.alongside},
               {"enabled", c.augmentation.enabled},
               {"tasks", c.augmentation.tasks}}},
             {"attacks", attacks},
             {"evaluation", {{"density_bins", c.evaluation.density_bins}, {"split", c.evaluation.split}}},
             {"output_dir", c.output_dir},
             {"mock_fixture", c.mock_fixture}};
}

void from_json(const json& j, PipelineConfig& c) {
    PipelineConfig d;
    c.schemas.clear();
    if (j.contains("schemas"))
        for (auto it = j["schemas"].begin(); it != j["schemas"].end(); ++it) c.schemas[it.key()] = it.value().get<SchemaMapping>();
    c.inputs.clear();
    if (j.contains("inputs"))
        for (const auto& in : j["inputs"]) c.inputs.push_back({in.at("path").get<std::string>(), in.at("schema").get<std::string>()});
    c.cve_store = j.value("cve_store", "");
    c.seeds = d.seeds;
    if (j.contains("seeds")) {
        const auto& s = j["seeds"];
        c.seeds.balance = s.value("balance", d.seeds.balance);
        c.seeds.split = s.value("split", d.seeds.split);
        c.seeds.cot = s.value("cot", d.seeds.cot);
        c.seeds.augment = s.value("augment", d.seeds.augment);
        c.seeds.attack = s.value("attack", d.seeds.attack);
    }
    c.split_ratios = j.value("split_ratios", d.split_ratios);
    c.k = j.value("k", d.k);
    c.endpoint = j.contains("endpoint") ? j["endpoint"].get<EndpointConfig>() : EndpointConfig{};
    c.cot = d.cot;
    if (j.contains("cot")) {
        const auto& s = j["cot"];
        c.cot.max_requests = read_opt_long(s, "max_requests");
        c.cot.max_tokens = read_opt_long(s, "max_tokens");
        c.cot.workers = s.value("workers", d.cot.workers);
        c.cot.templates_dir = s.value("templates_dir", "");
        c.cot.refusal_patterns = s.value("refusal_patterns", std::vector<std::string>{});
    }
    c.augmentation = d.augmentation;
    if (j.contains("augmentation")) {
        const auto& s = j["augmentation"];
        c.augmentation.ratio = s.value("ratio", d.augmentation.ratio);
        c.augmentation.alongside = s.value("alongside", d.augmentation.alongside);
        c.augmentation.enabled = s.value("enabled", d.augmentation.enabled);
        c.augmentation.tasks = s.value("tasks", d.augmentation.tasks);
        for (const auto& t : c.augmentation.tasks) task_from_string(t);
    }
    c.attacks.clear();
    if (j.contains("attacks"))
        for (const auto& a : j["attacks"]) c.attacks.push_back(a.get<AttackConfig>());
    c.evaluation = d.evaluation;
    if (j.contains("evaluation")) {
        c.evaluation.density_bins = j["evaluation"].value("density_bins", d.evaluation.density_bins);
        c.evaluation.split = j["evaluation"].value("split", d.evaluation.split);
    }
    c.output_dir = j.value("output_dir", d.output_dir);
    c.mock_fixture = j.value("mock_fixture", "");

    if (c.k < 0) throw ConfigError("k must be non-negative");
    if (c.augmentation.ratio < 0 || c.augmentation.ratio > 1) throw ConfigError("augmentation ratio must be in [0, 1]");
    for (int r : c.split_ratios)
        if (r <= 0) throw ConfigError("split ratios must be positive");
    for (const auto& in : c.inputs)
        if (!c.schemas.count(in.schema)) throw ConfigError("input " + in.path + " names unknown schema " + in.schema);
    const auto& es = c.evaluation.split;
    if (es != "train" && es != "validation" && es != "test") throw ConfigError("evaluation split must be train, validation or test");
}

bool PipelineConfig::operator==(const PipelineConfig& o) const { return json(*this) == json(o); }

PipelineConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError("cannot read config " + path.string() + ": " + e.what());
    }
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ConfigError("config is not a JSON object: " + path.string());
    PipelineConfig c;
    try {
        c = j.get<PipelineConfig>();
    } catch (const json::exception& e) {
        throw ConfigError("invalid config " + path.string() + ": " + e.what());
    }
    c.base_dir = fs::absolute(path).parent_path();
    return c;
}

std::string config_hash(const PipelineConfig& c) {
    json j = c;
    j.erase("output_dir");
    return sha256_hex(j.dump());
}

fs::path resolve(const PipelineConfig& c, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute() || c.base_dir.empty()) return p;
    return c.base_dir / p;
}

// ---- lock -----------------------------------------------------------------

OutputLock::OutputLock(const fs::path& out_dir) : path_(out_dir / ".lock") {
    fs::create_directories(out_dir);
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw Error("output directory " + out_dir.string() + " is locked by another run (" + path_.string() +
                        "); remove the file if no run is active");
        throw Error("cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

OutputLock::~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

// ---- stage plumbing ---------------------------------------------------------

namespace {

namespace art {
const char* records = "corpus/records.jsonl";
const char* splits = "corpus/splits.json";
const char* ingest_report = "corpus/ingest_report.json";
const char* features = "features/features.jsonl";
const char* pdg = "features/pdg.jsonl";
const char* transcripts = "cot/transcripts.jsonl";
const char* skipped = "cot/skipped.jsonl";
const char* review_queue = "cot/review_queue.jsonl";
const char* batch = "cot/batch.json";
const char* augmented = "augment/augmented.jsonl";
const char* predictions = "eval/predictions.jsonl";
const char* report_json = "eval/report.json";
const char* report_txt = "eval/report.txt";
const char* density_csv = "eval/density.csv";
} // namespace art

std::string split_file(const std::string& split) { return "dataset/" + split + ".jsonl"; }
std::string attack_file(AttackKind k) { return "attack/" + to_lower(to_string(k)) + ".jsonl"; }

std::ostream& logs(const RunOptions& o) { return o.log ? *o.log : std::cerr; }

fs::path require(const RunOptions& o, const std::string& rel, const std::string& stage) {
    fs::path p = o.out / rel;
    if (!fs::exists(p)) throw MissingArtifact(stage, p);
    return p;
}

void write_artifact(const RunOptions& o, const std::string& rel, const std::string& content) {
    fs::path p = o.out / rel;
    fs::create_directories(p.parent_path());
    write_file_atomic(p, content);
}

json file_hashes(const RunOptions& o, const std::vector<std::string>& rels) {
    json j = json::object();
    for (const auto& rel : rels) {
        fs::path p = o.out / rel;
        if (fs::exists(p)) j[rel] = sha256_hex(read_file(p));
    }
    return j;
}

json seeds_json(const StageSeeds& s) {
    return json{{"balance", s.balance}, {"split", s.split}, {"cot", s.cot}, {"augment", s.augment}, {"attack", s.attack}};
}

void record_stage(const RunOptions& o, const std::string& stage, const std::vector<std::string>& inputs,
                  const std::vector<std::string>& outputs, json seeds, json extra = json::object()) {
    fs::path mp = o.out / "manifest.json";
    json m = fs::exists(mp) ? json::parse(read_file(mp), nullptr, false) : json::object();
    if (m.is_discarded() || !m.is_object()) m = json::object();
    m["tool_version"] = kToolVersion;
    m["config_hash"] = config_hash(o.config);
    json entry{{"inputs", file_hashes(o, inputs)},
               {"outputs", file_hashes(o, outputs)},
               {"seeds", std::move(seeds)},
               {"config_hash", config_hash(o.config)},
               {"tool_version", kToolVersion}};
    for (auto it = extra.begin(); it != extra.end(); ++it) entry[it.key()] = it.value();
    m["stages"][stage] = std::move(entry);
    write_file_atomic(mp, m.dump(2) + "\n");
}

std::vector<VulnRecord> load_records(const RunOptions& o) {
    return read_records_jsonl(require(o, art::records, "ingest"));
}

SplitSet load_splits(const RunOptions& o) {
    return json::parse(read_file(require(o, art::splits, "ingest"))).get<SplitSet>();
}

std::map<std::string, RecordFeatures> load_features(const RunOptions& o) {
    std::map<std::string, RecordFeatures> out;
    for (const auto& row : read_jsonl(require(o, art::features, "features"))) {
        auto f = row.get<RecordFeatures>();
        out[f.record_id] = std::move(f);
    }
    return out;
}

std::unique_ptr<ModelClient> make_client(const RunOptions& o) {
    EndpointConfig ec = o.config.endpoint;
    if (ec.cache_dir.empty()) ec.cache_dir = (o.out / "cache").string();
    else if (fs::path(ec.cache_dir).is_relative()) ec.cache_dir = (o.out / ec.cache_dir).string();
    std::shared_ptr<Transport> transport;
    if (!o.mock_fixture.empty()) {
        auto responder = ScriptedResponder::from_file(o.mock_fixture);
        transport = std::make_shared<MockTransport>(responder);
    } else {
        transport = std::make_shared<HttpTransport>(ec.base_url, ec.timeout_ms);
    }
    return std::make_unique<ModelClient>(ec, std::move(transport));
}

CotOptions cot_options(const RunOptions& o) {
    CotOptions opts;
    if (!o.config.cot.templates_dir.empty()) opts.templates = PromptTemplates::from_dir(resolve(o.config, o.config.cot.templates_dir));
    if (!o.config.cot.refusal_patterns.empty()) opts.refusal_patterns = o.config.cot.refusal_patterns;
    return opts;
}

std::string jsonl_of(const std::vector<json>& rows) { return to_jsonl(rows); }

} // namespace

// ---- stages -----------------------------------------------------------------

void stage_ingest(const RunOptions& o) {
    const auto& c = o.config;
    if (c.inputs.empty()) throw ConfigError("config lists no inputs");
    std::vector<VulnRecord> all;
    json report_inputs = json::array();
    for (const auto& in : c.inputs) {
        auto res = ingest(resolve(c, in.path), in.schema, c.schemas);
        report_inputs.push_back({{"path", in.path},
                                 {"schema", in.schema},
                                 {"records", res.records.size()},
                                 {"skipped", res.skipped},
                                 {"skip_reasons", res.skip_reasons}});
        all.insert(all.end(), res.records.begin(), res.records.end());
    }
    auto unique = deduplicate(all);
    if (!c.cve_store.empty()) attach_cve_descriptions(unique, CveStore::load(resolve(c, c.cve_store)));
    auto balanced = balance_undersample(unique, c.seeds.balance);
    auto splits = split(balanced, c.split_ratios, c.seeds.split);

    long pos = 0;
    for (const auto& r : balanced) pos += r.label;
    json report{{"inputs", report_inputs},
                {"ingested", all.size()},
                {"after_dedup", unique.size()},
                {"after_balance", balanced.size()},
                {"per_class", {{"0", static_cast<long>(balanced.size()) - pos}, {"1", pos}}},
                {"splits",
                 {{"train", splits.train.size()}, {"validation", splits.validation.size()}, {"test", splits.test.size()}}}};
    write_artifact(o, art::records, records_to_jsonl(balanced));
    write_artifact(o, art::splits, json(splits).dump(2) + "\n");
    write_artifact(o, art::ingest_report, report.dump(2) + "\n");

    std::vector<std::string> inputs;
    record_stage(o, "ingest", inputs, {art::records, art::splits, art::ingest_report},
                 {{"balance", c.seeds.balance}, {"split", c.seeds.split}},
                 {{"sources", [&] {
                       json s = json::object();
                       for (const auto& in : c.inputs) s[in.path] = sha256_hex(read_file(resolve(c, in.path)));
                       return s;
                   }()}});
    logs(o) << "ingest: " << all.size() << " records, " << unique.size() << " unique, " << balanced.size()
            << " after balancing (" << splits.train.size() << "/" << splits.validation.size() << "/"
            << splits.test.size() << ")\n";
}

void stage_features(const RunOptions& o) {
    const auto records = load_records(o);
    std::vector<json> rows, pdgs;
    long with_lines = 0;
    for (const auto& r : records) {
        RecordFeatures f = extract_features(r, o.config.k);
        with_lines += f.has_vuln_lines();
        rows.push_back(f);
        if (o.emit_pdg) {
            std::optional<Pdg> pdg = f.pdg;
            if (!pdg) {
                try {
                    pdg = build_pdg(segment_statements(r.code));
                } catch (const Error&) {
                }
            }
            if (pdg) pdgs.push_back({{"record_id", r.record_id}, {"pdg", pdg_to_json(*pdg)}});
        }
    }
    write_artifact(o, art::features, jsonl_of(rows));
    std::vector<std::string> outs{art::features};
    if (o.emit_pdg) {
        write_artifact(o, art::pdg, jsonl_of(pdgs));
        outs.push_back(art::pdg);
    }
    record_stage(o, "features", {art::records}, outs, json::object(), {{"k", o.config.k}});
    logs(o) << "features: " << rows.size() << " records, " << with_lines << " with vulnerability lines\n";
}

void stage_interpret(const RunOptions& o) {
    const auto records = load_records(o);
    const auto features = load_features(o);
    auto client = make_client(o);
    BatchOptions b;
    b.seed = o.config.seeds.cot;
    b.max_requests = o.config.cot.max_requests;
    b.max_tokens = o.config.cot.max_tokens;
    b.workers = o.config.cot.workers;
    b.store_dir = o.out / "cot";
    const auto opts = cot_options(o);
    auto res = run_balanced_batch(records, features, *client, opts, b);

    std::map<std::string, VulnRecord> by_id;
    for (const auto& r : records) by_id[r.record_id] = r;
    write_artifact(o, art::review_queue, export_review_queue(res.transcripts, by_id, features));
    long needs_review = 0;
    for (const auto& t : res.transcripts) needs_review += t.status == ReviewStatus::NeedsReview;
    json summary{{"selected_per_class", res.selected_per_class},
                 {"transcripts", res.transcripts.size()},
                 {"skipped", res.skipped.size()},
                 {"pending", res.pending},
                 {"budget_exhausted", res.budget_exhausted},
                 {"needs_review", needs_review}};
    write_artifact(o, art::batch, summary.dump(2) + "\n");
    record_stage(o, "interpret", {art::records, art::features}, {art::transcripts, art::skipped, art::review_queue, art::batch},
                 {{"cot", o.config.seeds.cot}},
                 {{"endpoint", {{"model", o.config.endpoint.model_name}, {"mock", !o.mock_fixture.empty()}}}});
    const auto st = client->stats();
    logs(o) << "interpret: " << res.transcripts.size() << " transcripts, " << res.skipped.size() << " skipped, "
            << res.pending.size() << " pending, " << needs_review << " need review (" << st.network_requests
            << " requests, " << st.cache_hits << " cache hits)\n";
}

void stage_review_list(const RunOptions& o, std::ostream& out) {
    require(o, art::transcripts, "interpret");
    out << read_file(require(o, art::review_queue, "interpret"));
}

void stage_review_apply(const RunOptions& o, const fs::path& review_file) {
    auto transcripts = read_transcripts(require(o, art::transcripts, "interpret"));
    if (!fs::exists(review_file)) throw Error("review file not found: " + review_file.string());
    auto summary = apply_review(transcripts, read_jsonl(review_file));
    std::vector<json> rows(transcripts.begin(), transcripts.end());
    write_artifact(o, art::transcripts, jsonl_of(rows));
    const auto records = load_records(o);
    std::map<std::string, VulnRecord> by_id;
    for (const auto& r : records) by_id[r.record_id] = r;
    std::map<std::string, RecordFeatures> features;
    if (fs::exists(o.out / art::features)) features = load_features(o);
    write_artifact(o, art::review_queue, export_review_queue(transcripts, by_id, features));
    record_stage(o, "review", {art::transcripts}, {art::transcripts, art::review_queue}, json::object(),
                 {{"review_file_sha256", sha256_hex(read_file(review_file))},
                  {"accepted", summary.accepted},
                  {"rejected", summary.rejected},
                  {"undecided", summary.undecided}});
    logs(o) << "review: " << summary.accepted << " accepted, " << summary.rejected << " rejected, "
            << summary.undecided << " undecided\n";
}

void stage_augment(const RunOptions& o) {
    const auto records = load_records(o);
    const auto splits = load_splits(o);
    const auto pool = IdentifierPool::harvest(records);
    std::set<std::string> train(splits.train.begin(), splits.train.end());
    std::vector<json> rows;
    long unchanged = 0, failed = 0;
    if (o.config.augmentation.enabled) {
        for (const auto& r : records) {
            if (!train.count(r.record_id)) continue;
            try {
                auto res = augment_identifiers(r, o.config.augmentation.ratio, pool,
                                               derive_seed(o.config.seeds.augment, r.record_id));
                if (res.unchanged) {
                    ++unchanged;
                    continue;
                }
                json renames = json::array();
                for (const auto& [a, b] : res.renames) renames.push_back({{"from", a}, {"to", b}});
                rows.push_back({{"record", res.record}, {"renames", renames}, {"distinct_identifiers", res.distinct_identifiers}});
            } catch (const Error& e) {
                ++failed;
                logs(o) << "augment: skipping " << r.record_id << ": " << e.what() << "\n";
            }
        }
    }
    write_artifact(o, art::augmented, jsonl_of(rows));
    record_stage(o, "augment", {art::records, art::splits}, {art::augmented}, {{"augment", o.config.seeds.augment}},
                 {{"ratio", o.config.augmentation.ratio},
                  {"augmented", rows.size()},
                  {"unchanged", unchanged},
                  {"failed", failed},
                  {"pool_size", pool.identifiers.size()}});
    logs(o) << "augment: " << rows.size() << " augmented training records (" << unchanged << " without identifiers)\n";
}

void stage_build_dataset(const RunOptions& o) {
    const auto records = load_records(o);
    const auto splits = load_splits(o);
    const auto features = load_features(o);
    std::map<std::string, CotTranscript> transcripts;
    std::vector<std::string> inputs{art::records, art::splits, art::features};
    json notes = json::array();
    if (fs::exists(o.out / art::transcripts)) {
        for (auto& t : read_transcripts(o.out / art::transcripts)) transcripts[t.record_id] = std::move(t);
        inputs.push_back(art::transcripts);
    } else {
        notes.push_back("no interpret artifacts; Interpretation examples omitted");
    }
    std::vector<VulnRecord> augmented;
    if (fs::exists(o.out / art::augmented)) {
        for (const auto& row : read_jsonl(o.out / art::augmented)) augmented.push_back(row.at("record").get<VulnRecord>());
        inputs.push_back(art::augmented);
    } else {
        notes.push_back("no augment artifacts; no augmented examples");
    }
    std::set<Task> aug_tasks;
    for (const auto& t : o.config.augmentation.tasks) aug_tasks.insert(task_from_string(t));

    std::map<std::string, const VulnRecord*> by_id;
    for (const auto& r : records) by_id[r.record_id] = &r;
    auto lookup = [](const auto& m, const std::string& id) -> const typename std::decay_t<decltype(m)>::mapped_type* {
        auto it = m.find(id);
        return it == m.end() ? nullptr : &it->second;
    };

    std::vector<std::string> outs;
    json stats_all = json::object();
    const std::pair<std::string, const std::vector<std::string>*> parts[] = {
        {"train", &splits.train}, {"validation", &splits.validation}, {"test", &splits.test}};
    for (const auto& [name, ids] : parts) {
        std::vector<InstructionExample> examples;
        BuildStats st;
        for (const auto& id : *ids) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw Error("split references unknown record " + id);
            auto ex = build_examples(*it->second, lookup(features, id), lookup(transcripts, id), &st);
            examples.insert(examples.end(), ex.begin(), ex.end());
        }
        long aug_count = 0;
        if (name == "train") {
            std::set<std::string> train_ids(ids->begin(), ids->end());
            for (const auto& a : augmented) {
                if (!train_ids.count(a.record_id)) continue;
                for (auto& e : build_examples(a, lookup(features, a.record_id), lookup(transcripts, a.record_id))) {
                    if (!aug_tasks.count(e.task)) continue;
                    if (!o.config.augmentation.alongside) {
                        std::erase_if(examples, [&](const InstructionExample& x) {
                            return x.record_id == e.record_id && x.task == e.task && !x.augmented;
                        });
                    }
                    examples.push_back(std::move(e));
                    ++aug_count;
                }
            }
        }
        const std::string rel = split_file(name);
        emit_dataset(examples, o.out / rel, seeds_json(o.config.seeds), o.emit_rendered);
        outs.push_back(rel);
        outs.push_back("dataset/" + name + ".meta.json");
        if (o.emit_rendered) outs.push_back("dataset/" + name + ".rendered.jsonl");
        stats_all[name] = {{"detection", st.detection},
                           {"localization", st.localization},
                           {"interpretation", st.interpretation},
                           {"skipped_localization", st.skipped_localization},
                           {"skipped_interpretation", st.skipped_interpretation},
                           {"augmented", aug_count}};
    }
    record_stage(o, "build-dataset", inputs, outs, seeds_json(o.config.seeds), {{"counts", stats_all}, {"notes", notes}});
    logs(o) << "build-dataset: " << stats_all.dump() << "\n";
}

void stage_attack(const RunOptions& o) {
    const auto records = load_records(o);
    const auto splits = load_splits(o);
    std::vector<AttackConfig> configs = o.config.attacks;
    if (configs.empty())
        for (auto k : {AttackKind::MHM, AttackKind::WIR, AttackKind::DCI}) configs.push_back(AttackConfig{k});
    if (!o.attack_kind.empty()) {
        const AttackKind want = attack_kind_from_string(o.attack_kind);
        std::erase_if(configs, [&](const AttackConfig& a) { return a.kind != want; });
        if (configs.empty()) configs.push_back(AttackConfig{want});
    }
    for (auto& c : configs)
        if (c.seed == 0) c.seed = o.config.seeds.attack;

    std::set<std::string> test(splits.test.begin(), splits.test.end());
    std::vector<VulnRecord> targets;
    for (const auto& r : records)
        if (test.count(r.record_id)) targets.push_back(r);
    const auto pool = IdentifierPool::harvest(records).identifiers;
    const auto snippets = harvest_snippets(records);

    auto client = make_client(o);
    ClientScorer scorer(*client, std::string(kDetectionInstruction));
    for (const auto& cfg : configs) {
        std::vector<json> rows;
        long successes = 0, queries = 0, errors = 0;
        for (const auto& r : targets) {
            try {
                AttackOutcome out = run_attack(r, scorer, cfg, pool, snippets);
                successes += out.success;
                queries += out.queries_used;
                rows.push_back(out);
            } catch (const AttackError& e) {
                ++errors;
                logs(o) << "attack: " << r.record_id << ": " << e.what() << "\n";
            } catch (const SegmentError& e) {
                ++errors;
                logs(o) << "attack: " << r.record_id << ": " << e.what() << "\n";
            }
        }
        const std::string rel = attack_file(cfg.kind);
        write_artifact(o, rel, jsonl_of(rows));
        record_stage(o, "attack-" + to_lower(to_string(cfg.kind)), {art::records, art::splits}, {rel},
                     {{"attack", cfg.seed}},
                     {{"config", cfg}, {"successes", successes}, {"queries", queries}, {"errors", errors},
                      {"stochastic", scorer.stochastic()}});
        logs(o) << "attack " << to_string(cfg.kind) << ": " << successes << "/" << rows.size() << " successful, "
                << queries << " queries\n";
    }
}

void stage_evaluate(const RunOptions& o) {
    const std::string split_rel = split_file(o.config.evaluation.split);
    const auto split_path = require(o, split_rel, "build-dataset");
    const auto records = load_records(o);
    std::map<std::string, const VulnRecord*> by_id;
    for (const auto& r : records) by_id[r.record_id] = &r;

    auto client = make_client(o);
    const bool probe = client->config().probe != ProbeMethod::None;
    std::map<std::string, CleanScores> clean;
    std::vector<json> pred_rows;
    std::vector<ScoredPrediction> all_scored;
    for (const auto& row : read_jsonl(split_path)) {
        auto e = row.get<InstructionExample>();
        if (e.task != Task::Detection || e.augmented) continue;
        auto it = by_id.find(e.record_id);
        const std::string dataset = it != by_id.end() ? it->second->source_dataset : "unknown";
        const int truth = std::stoi(e.output);
        Prediction p = probe ? client->label_probability(e.input, e.instruction) : client->classify(e.input, e.instruction);
        ScoredPrediction sp{p.label, truth, p.probability};
        clean[dataset].dataset = dataset;
        clean[dataset].by_record[e.record_id] = sp;
        all_scored.push_back(sp);
        pred_rows.push_back({{"record_id", e.record_id}, {"dataset", dataset}, {"truth", truth}, {"prediction", p}});
    }

    std::vector<EvalReport> reports;
    for (const auto& [ds, cs] : clean) {
        std::vector<Label> preds;
        std::vector<int> truth;
        for (const auto& [id, sp] : cs.by_record) {
            preds.push_back(sp.predicted);
            truth.push_back(sp.truth);
        }
        EvalReport r = prf1(score(preds, truth));
        r.dataset = ds;
        reports.push_back(r);
    }

    std::vector<std::string> inputs{split_rel, art::records};
    for (auto k : {AttackKind::MHM, AttackKind::WIR, AttackKind::DCI}) {
        const std::string rel = attack_file(k);
        if (!fs::exists(o.out / rel)) continue;
        inputs.push_back(rel);
        std::map<std::string, std::vector<AttackedPrediction>> per_ds;
        for (const auto& row : read_jsonl(o.out / rel)) {
            auto out = row.get<AttackOutcome>();
            auto it = by_id.find(out.record_id);
            if (it == by_id.end()) continue;
            const std::string& ds = it->second->source_dataset;
            if (!clean.count(ds) || !clean[ds].by_record.count(out.record_id)) continue;
            Prediction p = probe ? client->label_probability(out.adversarial_code, kDetectionInstruction)
                                 : client->classify(out.adversarial_code, kDetectionInstruction);
            per_ds[ds].push_back({out.record_id, std::string(to_string(k)), p.label});
        }
        for (const auto& [ds, attacked] : per_ds) {
            auto rs = robustness_report(clean[ds], attacked);
            reports.insert(reports.end(), rs.begin(), rs.end());
        }
    }

    const auto hist = density(all_scored, o.config.evaluation.density_bins);
    json report{{"unparsed_convention", kUnparsedConvention},
                {"probe_method", to_string(client->config().probe)},
                {"split", o.config.evaluation.split},
                {"reports", reports},
                {"density",
                 {{"bins", o.config.evaluation.density_bins},
                  {"population", hist.population},
                  {"empty", hist.empty},
                  {"densities", hist.densities}}}};
    write_artifact(o, art::predictions, jsonl_of(pred_rows));
    write_artifact(o, art::report_json, report.dump(2) + "\n");
    write_artifact(o, art::report_txt, "# probe: " + std::string(to_string(client->config().probe)) + "\n" + render_table(reports));
    std::vector<std::string> outs{art::predictions, art::report_json, art::report_txt};
    if (o.emit_density_csv) {
        write_artifact(o, art::density_csv, density_csv(hist));
        outs.push_back(art::density_csv);
    }
    record_stage(o, "evaluate", inputs, outs, json::object(), {{"density_empty", hist.empty}});
    logs(o) << render_table(reports);
}

void stage_demo(const RunOptions& o) {
    if (o.mock_fixture.empty()) throw ConfigError("demo runs offline and needs a mock fixture (--mock or mock_fixture in config)");
    RunOptions d = o;
    d.emit_pdg = true;
    d.emit_density_csv = true;
    stage_ingest(d);
    stage_features(d);
    stage_interpret(d);
    stage_augment(d);
    stage_build_dataset(d);
    stage_attack(d);
    stage_evaluate(d);
}

} // namespace vulninstruct
