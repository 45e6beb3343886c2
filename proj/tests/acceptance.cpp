// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "cot_fixture.hpp"
#include "test_support.hpp"

#include "vulninstruct/attacks.hpp"
#include "vulninstruct/corpus.hpp"
#include "vulninstruct/evaluation.hpp"
#include "vulninstruct/features.hpp"
#include "vulninstruct/instruct.hpp"
#include "vulninstruct/jsonl.hpp"
#include "vulninstruct/lexer.hpp"
#include "vulninstruct/patch.hpp"
#include "vulninstruct/pdg.hpp"
#include "vulninstruct/pipeline.hpp"
#include "vulninstruct/util.hpp"

#include <chrono>
#include <cmath>
#include <csignal>
#include <functional>
#include <iomanip>
#include <iostream>
#include <regex>
#include <thread>

#include <sys/wait.h>

using namespace vulninstruct;
using namespace testsupport;
using nlohmann::json;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        if (ok) detail = why;
        ok = false;
    }
    void check(bool cond, const std::string& why) {
        if (!cond) fail(why);
    }
};

std::set<int> lines_of(const std::vector<VulnLineEntry>& es) {
    std::set<int> out;
    for (const auto& e : es) out.insert(e.line_no);
    return out;
}

std::set<std::tuple<int, int, bool>> edge_set(const Pdg& g) {
    std::set<std::tuple<int, int, bool>> out;
    for (const auto& e : g.edges) out.insert({e.src, e.dst, e.kind == EdgeKind::Control});
    return out;
}

std::vector<VulnRecord> mini_unique() {
    auto cfg = load_config(data_file("demo_config.json"));
    return deduplicate(ingest(data_file("corpus.jsonl"), "mini", cfg.schemas).records);
}

// ---- 1 ----
Outcome svg_probe_fixture() {
    Outcome o;
    VulnRecord r = make_record(slurp(fixture("svg_probe.c")), 1, "fixture");
    r.patch = slurp(fixture("svg_probe.patch"));
    auto vl = extract_vuln_lines(parse_unified_diff(*r.patch), r);
    o.check(lines_of(vl.lines.entries) == std::set<int>{9}, "vulnerability lines are not {9}");
    auto f = extract_features(r, 1);
    o.check(lines_of(f.context) == std::set<int>{3, 8, 14, 16}, "k=1 context is not {3, 8, 14, 16}");
    o.detail = o.ok ? "line 9, context {3, 8, 14, 16}" : o.detail;
    return o;
}

// ---- 2 ----
Outcome pdg_oracle() {
    Outcome o;
    long mismatches = 0, queries = 0;
    for (std::uint64_t i = 0; i < 200; ++i) {
        auto prog = synthetic_program(1000 + i * 7919, 30);
        Pdg g = build_pdg(segment_statements(prog.code));
        auto truth = brute_force_edges(prog.stmts);
        if (edge_set(g) != truth) ++mismatches;
        std::mt19937_64 rng(i);
        std::set<int> seeds;
        const int picks = 1 + static_cast<int>(rng() % 3);
        for (int p = 0; p < picks; ++p) seeds.insert(prog.stmts[rng() % prog.stmts.size()].line);
        for (int k = 1; k <= 3; ++k) {
            ++queries;
            std::set<int> got = lines_of(k_hop_context(g, std::vector<int>(seeds.begin(), seeds.end()), k).context_lines);
            if (got != brute_force_khop(prog.stmts, truth, seeds, k)) ++mismatches;
        }
    }
    o.check(mismatches == 0, std::to_string(mismatches) + " mismatches");
    if (o.ok) o.detail = "200 functions, " + std::to_string(queries) + " k-hop queries, 0 mismatches";
    return o;
}

// ---- 3 ----
Outcome metric_oracle() {
    Outcome o;
    std::mt19937_64 rng(2718);
    long bad = 0;
    for (int i = 0; i < 10000; ++i) {
        ConfusionCounts c{static_cast<long>(rng() % 500), static_cast<long>(rng() % 500), static_cast<long>(rng() % 500),
                          static_cast<long>(rng() % 500), 0};
        if (i % 17 == 0) c.tp = 0;
        if (i % 23 == 0) c.fp = 0;
        double p = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
        double r = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
        double f = p + r > 0 ? 2 * (p * r) / (p + r) : 0.0;
        auto got = prf1(c);
        if (got.precision != p || got.recall != r || got.f1 != f) ++bad;
    }
    o.check(bad == 0, std::to_string(bad) + " of 10000 tables differ");
    o.check(prf1({1, 1, 1, 0, 0}).f1 == 0.5, "F1(1,1,1) != 0.5");
    if (o.ok) o.detail = "10000 tables exact, F1(1,1,1) = 0.5";
    return o;
}

// ---- 4 ----
Outcome corpus_contracts() {
    Outcome o;
    auto cfg = load_config(data_file("demo_config.json"));
    auto unique = mini_unique();
    auto bal = balance_undersample(unique, cfg.seeds.balance);
    std::map<std::string, int> label;
    long pos = 0;
    for (const auto& r : bal) {
        label[r.record_id] = r.label;
        pos += r.label;
    }
    const long n = static_cast<long>(bal.size());
    o.check(2 * pos == n, "post-balance ratio not 1:1");
    auto s = split(bal, cfg.split_ratios, cfg.seeds.split);
    std::set<std::string> seen;
    const std::vector<std::pair<const std::vector<std::string>*, int>> parts = {{&s.train, 8}, {&s.validation, 1}, {&s.test, 1}};
    for (const auto& [part, share] : parts) {
        const double want = static_cast<double>(n) * share / 10.0;
        o.check(std::abs(static_cast<double>(part->size()) - want) <= 1.0, "split size off by more than 1");
        long p = 0;
        for (const auto& id : *part) {
            o.check(seen.insert(id).second, "record in two splits");
            o.check(label.count(id) > 0, "split names unknown record");
            p += label[id];
        }
        o.check(std::labs(2 * p - static_cast<long>(part->size())) <= 1, "split not stratified");
    }
    o.check(seen.size() == bal.size(), "splits do not cover the balanced set");
    if (o.ok) {
        o.detail = std::to_string(n) + " records 1:1, splits " + std::to_string(s.train.size()) + "/" +
                   std::to_string(s.validation.size()) + "/" + std::to_string(s.test.size());
    }
    return o;
}

// ---- 5 ----
Outcome augmentation() {
    Outcome o;
    auto records = mini_unique();
    records.push_back(make_record(slurp(fixture("svg_probe.c")), 1, "fixture"));
    records.push_back(make_record(slurp(fixture("dup_statement.c")), 1, "fixture"));
    auto pool = IdentifierPool::harvest(records);
    long functions = 0, renamed = 0;
    for (const auto& r : records) {
        auto res = augment_identifiers(r, 0.10, pool, 14);
        const auto ids = extract_identifiers(r.code);
        const std::size_t want = static_cast<std::size_t>(std::ceil(0.10 * static_cast<double>(ids.size()) - 1e-9));
        ++functions;
        if (res.renames.size() != want) {
            o.fail(r.record_id + ": renamed " + std::to_string(res.renames.size()) + ", expected " + std::to_string(want));
            continue;
        }
        std::map<std::string, std::string> m(res.renames.begin(), res.renames.end());
        std::set<std::pair<std::string, std::string>> changed;
        o.check(differs_only_by(r.code, res.record.code, m, &changed), r.record_id + ": token stream differs outside renames");
        o.check(changed.size() == want, r.record_id + ": not every mapped identifier changed");
        std::set<std::string> existing;
        for (const auto& t : toks(r.code))
            if (t.kind == 'i') existing.insert(t.text);
        std::set<std::string> targets;
        for (const auto& [from, to] : res.renames) {
            o.check(!existing.count(to), r.record_id + ": rename target " + to + " collides");
            o.check(targets.insert(to).second, r.record_id + ": duplicate rename target");
        }
        renamed += static_cast<long>(want);
    }
    if (o.ok) o.detail = std::to_string(functions) + " functions, " + std::to_string(renamed) + " identifiers renamed";
    return o;
}

// ---- 6 ----

// Deterministic scorer keyed on the code text; flips on roughly one in five variants.
class HashScorer : public LabelScorer {
public:
    LabelScore score(const std::string& code, int truth) override {
        const auto h = std::hash<std::string>{}(code);
        const double p = 0.55 + 0.4 * static_cast<double>(h % 1000) / 1000.0;
        const bool flip = h % 5 == 0;
        return {static_cast<Label>(flip ? 1 - truth : truth), flip ? 1 - p : p, 1};
    }
};

// Replays the logged renames of an outcome into an original -> final mapping.
std::map<std::string, std::string> logged_renames(const AttackOutcome& a) {
    std::map<std::string, std::string> current; // original -> current spelling
    for (const auto& e : a.edits) {
        if (e.value("op", "") != "rename" || !e.value("accepted", false)) continue;
        const std::string from = e["from"], to = e["to"];
        bool chained = false;
        for (auto& [orig, now] : current)
            if (now == from) {
                now = to;
                chained = true;
            }
        if (!chained) current[from] = to;
    }
    return current;
}

Outcome attack_structure() {
    Outcome o;
    const std::string xpath = "char xpath_2[] = \"err = sock_do_ioctl(net, sock, cmd, (unsigned long)&ktv);\";";
    auto pool_json = json::parse(slurp(fixture("dci_pool.json")));
    const auto dci_ids = pool_json["identifiers"].get<std::vector<std::string>>();
    const auto snippets = pool_json["snippets"].get<std::vector<std::string>>();
    o.check(dci_declaration("xpath", snippets.at(0)) == xpath, "xpath_2 declaration differs from the template");

    const std::regex decl_re(R"(^char [A-Za-z_][A-Za-z0-9_]*_2\[\] = "(?:[^"\\\n]|\\.)*";$)");
    auto records = mini_unique();
    auto pool = IdentifierPool::harvest(records).identifiers;
    HashScorer scorer;
    long mhm = 0, wir = 0, dci = 0, flips = 0;
    for (const auto& r : records) {
        for (AttackKind kind : {AttackKind::MHM, AttackKind::WIR}) {
            AttackConfig cfg;
            cfg.kind = kind;
            cfg.max_iterations = 15;
            cfg.candidates_per_iteration = 3;
            cfg.seed = 15;
            cfg.query_budget = 80;
            auto a = run_attack(r, scorer, cfg, pool, snippets);
            if (a.adversarial_code.empty()) continue;
            (kind == AttackKind::MHM ? mhm : wir)++;
            flips += a.success;
            auto m = logged_renames(a);
            o.check(differs_only_by(r.code, a.adversarial_code, m), std::string(to_string(kind)) + " on " + r.record_id +
                                                                       ": output differs outside logged renames");
            try {
                lex(a.adversarial_code);
            } catch (const Error&) {
                o.fail(std::string(to_string(kind)) + " output does not re-lex");
            }
        }
        if (dci_insertion_points(r.code).empty()) continue;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            auto d = dead_code_insertion(r, dci_ids, snippets, seed);
            ++dci;
            o.check(one_contiguous_insertion(r.code, d.code, d.declaration), r.record_id + ": DCI is not one contiguous insertion");
            o.check(std::regex_match(d.declaration, decl_re), "declaration off-template: " + d.declaration);
            try {
                lex(d.code);
            } catch (const Error&) {
                o.fail("DCI output does not re-lex");
            }
        }
    }
    o.check(mhm > 0 && wir > 0 && dci > 0, "no attack produced output");
    if (o.ok) {
        o.detail = std::to_string(mhm) + " MHM, " + std::to_string(wir) + " WIR (" + std::to_string(flips) +
                   " flips), " + std::to_string(dci) + " DCI outputs";
    }
    return o;
}

// ---- 7 ----
class FixedScorer : public LabelScorer {
public:
    FixedScorer(std::string clean, double p, double p_new) : clean_(std::move(clean)), p_(p), p_new_(p_new) {}
    LabelScore score(const std::string& code, int truth) override {
        return {static_cast<Label>(truth), code == clean_ ? p_ : p_new_, 1};
    }

private:
    std::string clean_;
    double p_, p_new_;
};

Outcome mh_law() {
    Outcome o;
    auto rec = make_record(slurp(fixture("svg_probe.c")), 1, "fixture");
    std::vector<std::string> pool;
    for (int i = 0; i < 40; ++i) pool.push_back("cand" + std::to_string(i));
    const std::vector<std::pair<double, double>> grid = {{0.9, 0.95}, {0.8, 0.9}, {0.6, 0.7}, {0.7, 0.9}, {0.9, 0.92}, {0.75, 0.7}};
    std::ostringstream det;
    det << std::fixed << std::setprecision(3);
    for (const auto& [p, pn] : grid) {
        const double want = std::min(1.0, (1.0 - pn) / (1.0 - p));
        FixedScorer scorer(rec.code, p, pn);
        long accepted = 0;
        const long proposals = 10000;
        for (long i = 0; i < proposals; ++i) {
            AttackConfig cfg;
            cfg.max_iterations = 1;
            cfg.candidates_per_iteration = 1;
            cfg.seed = static_cast<std::uint64_t>(i) * 2654435761u + static_cast<std::uint64_t>(p * 1000);
            cfg.query_budget = 10;
            auto a = mhm_attack(rec, scorer, cfg, pool);
            if (a.edits.size() == 1 && a.edits[0].value("accepted", false)) ++accepted;
        }
        const double freq = static_cast<double>(accepted) / proposals;
        o.check(std::abs(freq - want) <= 0.02, "(" + std::to_string(p) + ", " + std::to_string(pn) + "): frequency " +
                                                   std::to_string(freq) + " vs " + std::to_string(want));
        det << "(" << p << "," << pn << ")->" << freq << " ";
    }
    o.check(std::abs(mh_acceptance(0.9, 0.95) - 0.5) < 1e-12, "mh_acceptance(0.9, 0.95) != 0.5");
    if (o.ok) o.detail = det.str();
    return o;
}

// ---- 8 ----
std::size_t line_count(const fs::path& p) {
    const auto s = slurp(p);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

Outcome cot_replay() {
    Outcome o;
    TempDir d("accept_cot");
    auto m = mini_cot();
    BatchOptions b;
    b.seed = 13;
    b.workers = 2;
    b.store_dir = d / "ref";

    ModelClient ref_client(mini_endpoint(d / "ref_cache"), std::make_shared<MockTransport>(mini_responder()));
    auto ref = run_balanced_batch(m.records, m.features, ref_client, CotOptions{}, b);
    long pos = 0, neg = 0;
    for (const auto& t : ref.transcripts) (t.label == 1 ? pos : neg)++;
    o.check(pos == neg && pos > 0, "class counts differ: " + std::to_string(pos) + " vs " + std::to_string(neg));

    long features_checked = 0;
    for (const auto& t : ref.transcripts) {
        if (t.label != 1) continue;
        const auto& f = m.features.at(t.record_id);
        std::vector<std::string> texts;
        if (f.cve_description) texts.push_back(*f.cve_description);
        if (!f.vuln_lines.empty()) texts.push_back(render_vuln_lines(f.vuln_lines));
        if (!f.context.empty()) texts.push_back(render_vuln_lines(f.context));
        for (const auto& text : texts) {
            int hits = 0;
            for (const auto& s : t.steps)
                if (s.step_no >= 2 && s.step_no <= 4 && s.prompt.find(text) != std::string::npos) ++hits;
            o.check(hits == 1, t.record_id + ": feature found in " + std::to_string(hits) + " verification turns");
            ++features_checked;
        }
    }

    std::map<std::string, VulnRecord> by_id;
    for (const auto& r : m.records) by_id[r.record_id] = r;
    std::set<std::string> queued;
    for (const auto& line : split_lines(export_review_queue(ref.transcripts, by_id, m.features)))
        if (!line.empty()) queued.insert(json::parse(line)["record_id"].get<std::string>());
    long mismatches = 0;
    for (const auto& t : ref.transcripts) {
        if (!t.final_judgment_correct) {
            ++mismatches;
            o.check(queued.count(t.record_id) > 0, t.record_id + ": mismatch missing from review queue");
        } else {
            o.check(!queued.count(t.record_id), t.record_id + ": correct transcript queued");
        }
    }
    o.check(mismatches > 0, "fixture produced no mismatches to route");

    // Kill a child mid-batch, then resume from its store and cache.
    const auto ref_bytes = slurp(d / "ref" / "transcripts.jsonl");
    const std::size_t total = line_count(d / "ref" / "transcripts.jsonl");
    b.store_dir = d / "run";
    fs::create_directories(b.store_dir);
    std::cout.flush();
    pid_t child = ::fork();
    if (child == 0) {
        ModelClient c(mini_endpoint(d / "run_cache"), std::make_shared<MockTransport>(mini_responder(), 4));
        run_balanced_batch(m.records, m.features, c, CotOptions{}, b);
        ::_exit(0);
    }
    const auto store = d / "run" / "transcripts.jsonl";
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(20);
    while (std::chrono::steady_clock::now() < deadline) {
        if (fs::exists(store) && line_count(store) >= total / 3) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    // land mid-record: let the next record's first request reach the cache
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    ::kill(child, SIGKILL);
    int status = 0;
    ::waitpid(child, &status, 0);
    const std::size_t at_kill = fs::exists(store) ? line_count(store) : 0;
    o.check(WIFSIGNALED(status), "child finished before it could be killed");
    o.check(at_kill < total, "nothing left to resume");

    ModelClient resume(mini_endpoint(d / "run_cache"), std::make_shared<MockTransport>(mini_responder()));
    run_balanced_batch(m.records, m.features, resume, CotOptions{}, b);
    o.check(slurp(store) == ref_bytes, "resumed transcripts differ from the uninterrupted run");
    o.check(resume.stats().cache_hits > 0, "resume made no cache hits (killed at " + std::to_string(at_kill) + "/" +
                                                std::to_string(total) + ")");

    ModelClient again(mini_endpoint(d / "run_cache"), std::make_shared<MockTransport>(mini_responder()));
    run_balanced_batch(m.records, m.features, again, CotOptions{}, b);
    o.check(again.stats().network_requests == 0, "complete store still issued requests");
    if (o.ok) {
        o.detail = std::to_string(pos) + "+" + std::to_string(neg) + " transcripts, " + std::to_string(features_checked) +
                   " features once each, " + std::to_string(mismatches) + " queued, killed at " +
                   std::to_string(at_kill) + "/" + std::to_string(total) + " and resumed identically";
    }
    return o;
}

// ---- 9 ----
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), root).generic_string();
        if (rel.rfind("cache/", 0) == 0 || rel == ".lock") continue;
        out[rel] = slurp(e.path());
    }
    return out;
}

Outcome demo() {
    Outcome o;
    TempDir d("accept_demo");
    for (const char* run : {"a", "b"}) {
        const std::string out = (d / run).string();
        const std::string cfg = data_file("demo_config.json").string();
        const char* argv[] = {"vulninstruct", "--config", cfg.c_str(), "--out", out.c_str(), "demo"};
        std::ostringstream log, err;
        if (run_subcommand(6, argv, log, err) != 0) {
            o.fail(std::string("demo run failed: ") + err.str());
            return o;
        }
    }
    auto a = snapshot(d / "a"), b = snapshot(d / "b");
    o.check(a == b, "two demo runs differ");

    auto report = json::parse(slurp(d / "a" / "corpus" / "ingest_report.json"));
    o.check(report["ingested"].get<long>() + report["inputs"][0]["skipped"].get<long>() == 40, "mini-corpus is not 40 rows");

    const std::regex loc_line(R"(^\d+: .+$)");
    std::map<std::string, long> tasks;
    for (const char* split : {"train", "validation", "test"}) {
        for (const auto& row : read_jsonl(d / "a" / "dataset" / (std::string(split) + ".jsonl"))) {
            InstructionExample e;
            try {
                e = row.get<InstructionExample>();
            } catch (const std::exception& ex) {
                o.fail(std::string("schema: ") + ex.what());
                continue;
            }
            ++tasks[std::string(to_string(e.task))];
            o.check(e.instruction == instruction_for(e.task), "instruction text does not match its task");
            o.check(!e.input.empty() && !e.output.empty(), "empty input or output");
            if (e.task == Task::Detection) o.check(e.output == "0" || e.output == "1", "detection output not a label");
            if (e.task == Task::Localization)
                for (const auto& line : split_lines(e.output)) o.check(std::regex_match(line, loc_line), "bad localization line: " + line);
            if (e.task == Task::Interpretation) o.check(!e.output.empty(), "empty interpretation");
        }
    }
    o.check(tasks.size() == 3, "dataset lacks one of the three tasks");
    if (o.ok) {
        o.detail = std::to_string(tasks["Detection"]) + " detection, " + std::to_string(tasks["Localization"]) +
                   " localization, " + std::to_string(tasks["Interpretation"]) + " interpretation; runs byte-identical";
    }
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "svg_probe fixture", 1.0, svg_probe_fixture},
        {2, "pdg oracle", 30.0, pdg_oracle},
        {3, "metric oracle", 5.0, metric_oracle},
        {4, "corpus contracts", 1.0, corpus_contracts},
        {5, "augmentation contract", 5.0, augmentation},
        {6, "attack structure", 10.0, attack_structure},
        {7, "mhm acceptance law", 30.0, mh_law},
        {8, "cot-sv replay", 30.0, cot_replay},
        {9, "end-to-end demo", 60.0, demo},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs >= c.limit_s) o.fail("took " + std::to_string(secs) + " s, limit " + std::to_string(c.limit_s) + " s");
        failed += !o.ok;
        std::cout << (o.ok ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << ", " << std::fixed
                  << std::setprecision(2) << secs << " s): " << o.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
