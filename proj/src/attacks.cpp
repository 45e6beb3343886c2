#include "vulninstruct/attacks.hpp"

#include "vulninstruct/errors.hpp"
#include "vulninstruct/pdg.hpp"
#include "vulninstruct/util.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

namespace vulninstruct {

using nlohmann::json;

namespace {

// Member names and struct tags are not variable references.
bool renameable_position(const std::vector<Token>& sig, std::size_t i) {
    if (i == 0) return true;
    const Token& prev = sig[i - 1];
    if (prev.is(".") || prev.is("->")) return false;
    if (prev.is_keyword("struct") || prev.is_keyword("union") || prev.is_keyword("enum")) return false;
    return true;
}

std::unordered_set<std::string> identifier_set(std::string_view code) {
    std::unordered_set<std::string> out;
    for (const auto& t : significant_tokens(code))
        if (t.is_ident()) out.insert(t.text);
    return out;
}

// Up to k distinct pool names absent from the code, chosen uniformly.
std::vector<std::string> fresh_candidates(const std::vector<std::string>& pool, const std::string& code, int k,
                                          Rng& rng) {
    const auto present = identifier_set(code);
    std::vector<std::string> free;
    for (const auto& name : pool)
        if (!present.count(name) && is_valid_identifier(name) && !is_keyword(name)) free.push_back(name);
    std::vector<std::string> out;
    for (int i = 0; i < k && !free.empty(); ++i) {
        std::size_t j = static_cast<std::size_t>(rng.below(free.size()));
        out.push_back(free[j]);
        free[j] = free.back();
        free.pop_back();
    }
    return out;
}

AttackOutcome start_outcome(const VulnRecord& record, AttackKind kind) {
    AttackOutcome o;
    o.record_id = record.record_id;
    o.kind = kind;
    o.adversarial_code = record.code;
    return o;
}

void note(AttackOutcome& o, const std::string& reason) { o.edits.push_back({{"op", "skip"}, {"reason", reason}}); }

} // namespace

std::vector<std::string> identifier_tokens(std::string_view code) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& t : significant_tokens(code))
        if (t.is_ident() && seen.insert(t.text).second) out.push_back(t.text);
    return out;
}

std::vector<std::string> extract_identifiers(std::string_view code, const TypeNames& types) {
    std::set<std::string> declared;
    for (const auto& s : segment_statements(code, types)) declared.insert(s.declared.begin(), s.declared.end());
    const auto sig = significant_tokens(code);
    std::set<std::string> called;
    for (std::size_t i = 0; i + 1 < sig.size(); ++i)
        if (sig[i].is_ident() && sig[i + 1].is("(")) called.insert(sig[i].text);
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const auto& t = sig[i];
        if (!t.is_ident() || !declared.count(t.text) || called.count(t.text) || types.contains(t.text)) continue;
        if (!renameable_position(sig, i)) continue;
        if (seen.insert(t.text).second) out.push_back(t.text);
    }
    return out;
}

std::string rename(std::string_view code, const std::string& from, const std::string& to) {
    if (from == to) return std::string(code);
    if (!is_valid_identifier(to) || is_keyword(to)) throw AttackError("not a valid identifier: " + to);
    const auto sig = significant_tokens(code);
    for (const auto& t : sig)
        if (t.is_ident() && t.text == to) throw AttackError("rename target '" + to + "' already occurs in the code");
    std::string out;
    out.reserve(code.size());
    std::size_t last = 0;
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const auto& t = sig[i];
        if (!t.is_ident() || t.text != from || !renameable_position(sig, i)) continue;
        out.append(code.substr(last, t.offset - last));
        out += to;
        last = t.end();
    }
    out.append(code.substr(last));
    return out;
}

std::string_view to_string(AttackKind k) {
    switch (k) {
    case AttackKind::MHM: return "MHM";
    case AttackKind::WIR: return "WIR";
    case AttackKind::DCI: return "DCI";
    }
    return "MHM";
}

AttackKind attack_kind_from_string(std::string_view s) {
    const std::string l = to_lower(s);
    if (l == "mhm") return AttackKind::MHM;
    if (l == "wir") return AttackKind::WIR;
    if (l == "dci") return AttackKind::DCI;
    throw ConfigError("unknown attack kind: " + std::string(s));
}

void to_json(json& j, const AttackConfig& c) {
    j = json{{"kind", to_string(c.kind)},
             {"max_iterations", c.max_iterations},
             {"candidates_per_iteration", c.candidates_per_iteration},
             {"seed", c.seed},
             {"query_budget", c.query_budget}};
}

void from_json(const json& j, AttackConfig& c) {
    AttackConfig d;
    c.kind = attack_kind_from_string(j.value("kind", std::string("MHM")));
    c.max_iterations = j.value("max_iterations", d.max_iterations);
    c.candidates_per_iteration = j.value("candidates_per_iteration", d.candidates_per_iteration);
    c.seed = j.value("seed", d.seed);
    c.query_budget = j.value("query_budget", d.query_budget);
    if (c.max_iterations < 1) throw ConfigError("attack max_iterations must be at least 1");
    if (c.query_budget < 1) throw ConfigError("attack query_budget must be at least 1");
    if (c.candidates_per_iteration < 1) throw ConfigError("attack candidates_per_iteration must be at least 1");
}

void to_json(json& j, const AttackOutcome& o) {
    j = json{{"record_id", o.record_id},
             {"kind", to_string(o.kind)},
             {"success", o.success},
             {"queries_used", o.queries_used},
             {"adversarial_code", o.adversarial_code},
             {"edits", o.edits}};
}

void from_json(const json& j, AttackOutcome& o) {
    o.record_id = j.at("record_id").get<std::string>();
    o.kind = attack_kind_from_string(j.at("kind").get<std::string>());
    o.success = j.at("success").get<bool>();
    o.queries_used = j.at("queries_used").get<long>();
    o.adversarial_code = j.at("adversarial_code").get<std::string>();
    o.edits = j.at("edits");
}

ClientScorer::ClientScorer(ModelClient& client, std::string instruction)
    : client_(client), instruction_(std::move(instruction)) {}

LabelScore ClientScorer::score(const std::string& code, int truth) {
    const auto before = client_.stats();
    Prediction p = client_.label_probability(code, instruction_);
    const auto after = client_.stats();
    LabelScore s;
    s.label = p.label;
    s.queries = (after.completed_requests + after.cache_hits) - (before.completed_requests + before.cache_hits);
    if (auto pt = p.probability_of(truth)) s.p_truth = *pt;
    else s.p_truth = p.label != Label::Unparsed && static_cast<int>(p.label) == truth ? 1.0 : 0.0;
    return s;
}

bool ClientScorer::stochastic() const { return client_.config().probe == ProbeMethod::SampleVote; }

double mh_acceptance(double p, double p_new) {
    return std::min(1.0, (1.0 - p_new) / std::max(1.0 - p, 1e-6));
}

AttackOutcome mhm_attack(const VulnRecord& record, LabelScorer& scorer, const AttackConfig& config,
                         const std::vector<std::string>& pool) {
    AttackOutcome o = start_outcome(record, AttackKind::MHM);
    LabelScore clean = scorer.score(record.code, record.label);
    o.queries_used += clean.queries;
    if (clean.label == Label::Unparsed || static_cast<int>(clean.label) != record.label) {
        note(o, "clean prediction incorrect");
        return o;
    }
    std::vector<std::string> names = extract_identifiers(record.code);
    if (names.empty()) {
        note(o, "no renameable identifiers");
        return o;
    }
    Rng rng(derive_seed(config.seed, "mhm:" + record.record_id));
    std::string current = record.code;
    double p = clean.p_truth;
    for (int it = 0; it < config.max_iterations && o.queries_used < config.query_budget; ++it) {
        const std::size_t vi = static_cast<std::size_t>(rng.below(names.size()));
        auto candidates = fresh_candidates(pool, current, config.candidates_per_iteration, rng);
        if (candidates.empty()) {
            note(o, "identifier pool exhausted");
            break;
        }
        std::string best_code, best_name;
        double best_p = 2.0;
        bool flipped = false;
        for (const auto& cand : candidates) {
            if (o.queries_used >= config.query_budget) break;
            std::string code = rename(current, names[vi], cand);
            LabelScore s = scorer.score(code, record.label);
            o.queries_used += s.queries;
            if (s.label == Label::Unparsed || static_cast<int>(s.label) != record.label) {
                o.edits.push_back({{"op", "rename"}, {"iteration", it}, {"from", names[vi]}, {"to", cand},
                                   {"p", p}, {"p_candidate", s.p_truth}, {"alpha", 1.0}, {"accepted", true},
                                   {"flipped", true}});
                current = std::move(code);
                names[vi] = cand;
                flipped = true;
                break;
            }
            if (s.p_truth < best_p) {
                best_p = s.p_truth;
                best_code = std::move(code);
                best_name = cand;
            }
        }
        if (flipped) {
            o.success = true;
            break;
        }
        if (best_name.empty()) break; // budget ran out before any candidate was scored
        const double alpha = mh_acceptance(p, best_p);
        const bool accept = rng.uniform() < alpha;
        o.edits.push_back({{"op", "rename"}, {"iteration", it}, {"from", names[vi]}, {"to", best_name}, {"p", p},
                           {"p_candidate", best_p}, {"alpha", alpha}, {"accepted", accept}, {"flipped", false}});
        if (accept) {
            current = std::move(best_code);
            names[vi] = best_name;
            p = best_p;
        }
    }
    o.adversarial_code = current;
    return o;
}

std::string unk_placeholder(std::string_view code) {
    const auto present = identifier_set(code);
    std::string name = "UNK";
    for (int i = 1; present.count(name); ++i) name = "UNK_" + std::to_string(i);
    return name;
}

std::vector<RankedIdentifier> wir_rank(const std::string& code, const std::vector<std::string>& identifiers,
                                       LabelScorer& scorer, int truth, double p_clean, long* queries,
                                       long query_budget) {
    const std::string unk = unk_placeholder(code);
    std::vector<RankedIdentifier> ranked;
    for (const auto& v : identifiers) {
        if (queries && query_budget >= 0 && *queries >= query_budget) break;
        LabelScore s = scorer.score(rename(code, v, unk), truth);
        if (queries) *queries += s.queries;
        ranked.push_back({v, p_clean - s.p_truth});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedIdentifier& a, const RankedIdentifier& b) { return a.delta > b.delta; });
    return ranked;
}

AttackOutcome wir_random_attack(const VulnRecord& record, LabelScorer& scorer, const AttackConfig& config,
                                const std::vector<std::string>& pool) {
    AttackOutcome o = start_outcome(record, AttackKind::WIR);
    LabelScore clean = scorer.score(record.code, record.label);
    o.queries_used += clean.queries;
    if (clean.label == Label::Unparsed || static_cast<int>(clean.label) != record.label) {
        note(o, "clean prediction incorrect");
        return o;
    }
    const auto names = extract_identifiers(record.code);
    if (names.empty()) {
        note(o, "no renameable identifiers");
        return o;
    }
    auto ranked = wir_rank(record.code, names, scorer, record.label, clean.p_truth, &o.queries_used,
                           config.query_budget);
    Rng rng(derive_seed(config.seed, "wir:" + record.record_id));
    std::string current = record.code;
    double p = clean.p_truth;
    int iterations = 0;
    for (const auto& r : ranked) {
        if (o.queries_used >= config.query_budget || iterations >= config.max_iterations) break;
        ++iterations;
        auto candidates = fresh_candidates(pool, current, config.candidates_per_iteration, rng);
        if (candidates.empty()) {
            note(o, "identifier pool exhausted");
            break;
        }
        std::string best_code, best_name;
        double best_p = p;
        bool flipped = false;
        for (const auto& cand : candidates) {
            if (o.queries_used >= config.query_budget) break;
            std::string code = rename(current, r.name, cand);
            LabelScore s = scorer.score(code, record.label);
            o.queries_used += s.queries;
            if (s.label == Label::Unparsed || static_cast<int>(s.label) != record.label) {
                best_code = std::move(code);
                best_name = cand;
                best_p = s.p_truth;
                flipped = true;
                break;
            }
            if (s.p_truth < best_p) {
                best_p = s.p_truth;
                best_code = std::move(code);
                best_name = cand;
            }
        }
        const bool keep = !best_name.empty();
        o.edits.push_back({{"op", "rename"}, {"from", r.name}, {"to", keep ? best_name : std::string()},
                           {"delta", r.delta}, {"p", p}, {"p_candidate", best_p}, {"accepted", keep},
                           {"flipped", flipped}});
        if (keep) {
            current = std::move(best_code);
            p = best_p;
        }
        if (flipped) {
            o.success = true;
            break;
        }
    }
    o.adversarial_code = current;
    return o;
}

std::vector<std::size_t> dci_insertion_points(std::string_view code) {
    const auto sig = significant_tokens(code);
    // Brace stack entries: true for a statement block that may hold declarations.
    std::vector<bool> blocks;
    int paren = 0;
    bool seen_body = false;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < sig.size(); ++i) {
        const Token& t = sig[i];
        if (t.is("(") || t.is("[")) ++paren;
        else if (t.is(")") || t.is("]")) --paren;
        else if (t.is("{")) {
            bool block = false;
            if (blocks.empty()) {
                block = !seen_body;
                seen_body = true;
            } else if (blocks.back() && i > 0) {
                const Token& prev = sig[i - 1];
                block = prev.is(")") || prev.is(";") || prev.is("{") || prev.is("}") || prev.is(":") ||
                        prev.is_keyword("else") || prev.is_keyword("do");
                if (block && prev.is(")")) {
                    // switch bodies jump over declarations; struct/initializer braces never follow ')'
                    int depth = 0;
                    for (std::size_t k = i - 1; k > 0; --k) {
                        if (sig[k].is(")")) ++depth;
                        else if (sig[k].is("(") && --depth == 0) {
                            if (sig[k - 1].is_keyword("switch")) block = false;
                            break;
                        }
                    }
                }
            }
            blocks.push_back(block);
            if (block && paren == 0) out.push_back(t.end());
            continue;
        } else if (t.is("}")) {
            if (!blocks.empty()) blocks.pop_back();
            continue;
        }
        if (t.is(";") && paren == 0 && !blocks.empty() && blocks.back()) {
            const bool before_else_or_while =
                i + 1 < sig.size() && (sig[i + 1].is_keyword("else") || sig[i + 1].is_keyword("while"));
            if (!before_else_or_while) out.push_back(t.end());
        }
    }
    return out;
}

std::string dci_declaration(const std::string& identifier, const std::string& snippet) {
    std::string escaped;
    for (char c : snippet) {
        if (c == '\\' || c == '"') escaped += '\\';
        if (c == '\n') {
            escaped += "\\n";
            continue;
        }
        escaped += c;
    }
    return "char " + identifier + "_2[] = \"" + escaped + "\";";
}

DeadCodeInsertion dead_code_insertion(const VulnRecord& record, const std::vector<std::string>& pool,
                                      const std::vector<std::string>& snippet_pool, std::uint64_t seed) {
    if (pool.empty() || snippet_pool.empty()) throw AttackError("dead-code insertion needs identifier and snippet pools");
    const auto points = dci_insertion_points(record.code);
    if (points.empty()) throw AttackError("no legal insertion point in record " + record.record_id);
    Rng rng(seed);
    const auto present = identifier_set(record.code);
    std::vector<std::string> ids = pool;
    rng.shuffle(ids);
    DeadCodeInsertion d;
    for (const auto& id : ids) {
        if (is_valid_identifier(id) && !is_keyword(id) && !present.count(id + "_2")) {
            d.identifier = id;
            break;
        }
    }
    if (d.identifier.empty()) throw AttackError("identifier pool has no collision-free name");
    d.snippet = snippet_pool[rng.below(snippet_pool.size())];
    d.offset = points[rng.below(points.size())];
    d.declaration = dci_declaration(d.identifier, d.snippet);
    d.code = record.code;
    d.code.insert(d.offset, " " + d.declaration);
    return d;
}

AttackOutcome dci_attack(const VulnRecord& record, LabelScorer& scorer, const AttackConfig& config,
                         const std::vector<std::string>& pool, const std::vector<std::string>& snippet_pool) {
    AttackOutcome o = start_outcome(record, AttackKind::DCI);
    LabelScore clean = scorer.score(record.code, record.label);
    o.queries_used += clean.queries;
    if (clean.label == Label::Unparsed || static_cast<int>(clean.label) != record.label) {
        note(o, "clean prediction incorrect");
        return o;
    }
    // Independent single-insertion trials; keep the one that hurts most.
    double best_p = 2.0;
    for (int it = 0; it < config.max_iterations && o.queries_used < config.query_budget; ++it) {
        auto d = dead_code_insertion(record, pool, snippet_pool,
                                     derive_seed(config.seed, "dci:" + record.record_id + ":" + std::to_string(it)));
        LabelScore s = scorer.score(d.code, record.label);
        o.queries_used += s.queries;
        const bool flipped = s.label == Label::Unparsed || static_cast<int>(s.label) != record.label;
        const bool kept = flipped || s.p_truth < best_p;
        o.edits.push_back({{"op", "insert"},
                           {"iteration", it},
                           {"offset", d.offset},
                           {"declaration", d.declaration},
                           {"p", clean.p_truth},
                           {"p_candidate", s.p_truth},
                           {"kept", kept},
                           {"flipped", flipped}});
        if (kept) {
            best_p = s.p_truth;
            o.adversarial_code = d.code;
        }
        if (flipped) {
            o.success = true;
            break;
        }
    }
    return o;
}

AttackOutcome run_attack(const VulnRecord& record, LabelScorer& scorer, const AttackConfig& config,
                         const std::vector<std::string>& pool, const std::vector<std::string>& snippet_pool) {
    switch (config.kind) {
    case AttackKind::MHM: return mhm_attack(record, scorer, config, pool);
    case AttackKind::WIR: return wir_random_attack(record, scorer, config, pool);
    case AttackKind::DCI: return dci_attack(record, scorer, config, pool, snippet_pool);
    }
    throw ConfigError("unknown attack kind");
}

std::vector<std::string> harvest_snippets(const std::vector<VulnRecord>& records) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : records) {
        for (const auto& line : split_lines(r.code)) {
            std::string t = trim(line);
            if (t.size() < 4 || t.back() != ';' || t.rfind("//", 0) == 0) continue;
            if (seen.insert(t).second) out.push_back(std::move(t));
        }
    }
    return out;
}

} // namespace vulninstruct
