#include "vulninstruct/mock_endpoint.hpp"

#include "vulninstruct/errors.hpp"
#include "vulninstruct/prompt_format.hpp"
#include "vulninstruct/util.hpp"

#include <cctype>
#include <chrono>
#include <cmath>

namespace vulninstruct {

using nlohmann::json;

namespace {

std::vector<std::string> string_list(const json& j, const char* key) {
    std::vector<std::string> out;
    if (j.contains(key)) out = j[key].get<std::vector<std::string>>();
    return out;
}

bool all_in(const std::vector<std::string>& needles, const std::string& hay) {
    for (const auto& n : needles)
        if (hay.find(n) == std::string::npos) return false;
    return true;
}

std::optional<std::pair<double, double>> logprob_pair(const json& j) {
    if (!j.is_object()) return std::nullopt;
    return std::make_pair(j.at("1").get<double>(), j.at("0").get<double>());
}

// Uniform in [0,1) from a hash of (body, index).
double hashed_uniform(const std::string& body, int index) {
    std::string h = sha256_hex(body + "#" + std::to_string(index));
    std::uint64_t v = std::stoull(h.substr(0, 13), nullptr, 16);
    return static_cast<double>(v) / static_cast<double>(1ULL << 52);
}

} // namespace

ScriptedResponder::ScriptedResponder(json fixture) {
    if (fixture.contains("rules")) {
        for (const auto& r : fixture["rules"]) {
            Rule rule;
            rule.contains = string_list(r, "contains");
            rule.last_contains = string_list(r, "last_contains");
            if (r.contains("statuses")) rule.statuses = r["statuses"].get<std::vector<int>>();
            if (r.contains("response")) rule.response = r["response"].get<std::string>();
            rule.samples = string_list(r, "samples");
            if (r.contains("label_logprobs")) rule.label_logprobs = logprob_pair(r["label_logprobs"]);
            rules_.push_back(std::move(rule));
        }
    }
    if (fixture.contains("scorer") && fixture["scorer"].is_object()) {
        Scorer s;
        const auto& sj = fixture["scorer"];
        s.last_contains = string_list(sj, "last_contains");
        s.bias = sj.value("bias", 0.0);
        if (sj.contains("weights")) s.weights = sj["weights"].get<std::map<std::string, double>>();
        scorer_ = std::move(s);
    }
    default_response_ = fixture.value("default_response", "0");
}

std::shared_ptr<ScriptedResponder> ScriptedResponder::from_file(const std::filesystem::path& path) {
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError("mock fixture is not valid JSON: " + path.string());
    return std::make_shared<ScriptedResponder>(std::move(j));
}

std::optional<double> ScriptedResponder::scorer_probability(const std::string& last_message) const {
    if (!scorer_ || !all_in(scorer_->last_contains, last_message)) return std::nullopt;
    const std::string input = alpaca_input_of(last_message);
    double s = scorer_->bias;
    std::size_t i = 0;
    while (i < input.size()) {
        if (std::isalpha(static_cast<unsigned char>(input[i])) || input[i] == '_') {
            std::size_t j = i;
            while (j < input.size() && (std::isalnum(static_cast<unsigned char>(input[j])) || input[j] == '_')) ++j;
            auto it = scorer_->weights.find(input.substr(i, j - i));
            if (it != scorer_->weights.end()) s += it->second;
            i = j;
        } else {
            ++i;
        }
    }
    return 1.0 / (1.0 + std::exp(-s));
}

json ScriptedResponder::choice(const std::string& text, std::optional<std::pair<double, double>> lp) {
    json c{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}}, {"finish_reason", "stop"}};
    if (lp && !text.empty()) {
        std::string first(1, text.front());
        double own = first == "1" ? lp->first : first == "0" ? lp->second : 0.0;
        c["logprobs"] = {{"content",
                          json::array({{{"token", first},
                                        {"logprob", own},
                                        {"top_logprobs",
                                         json::array({{{"token", "1"}, {"logprob", lp->first}},
                                                      {{"token", "0"}, {"logprob", lp->second}}})}}})}};
    }
    return c;
}

json ScriptedResponder::envelope(const std::string& body, json choices, std::size_t prompt_chars) const {
    long completion = 0;
    for (auto& c : choices) completion += static_cast<long>(c["message"]["content"].get<std::string>().size() + 3) / 4;
    for (std::size_t i = 0; i < choices.size(); ++i) choices[i]["index"] = i;
    return json{{"id", "mock-" + sha256_hex(body).substr(0, 16)},
                {"object", "chat.completion"},
                {"choices", std::move(choices)},
                {"usage",
                 {{"prompt_tokens", static_cast<long>(prompt_chars + 3) / 4},
                  {"completion_tokens", completion},
                  {"total_tokens", static_cast<long>(prompt_chars + 3) / 4 + completion}}}};
}

HttpResponse ScriptedResponder::handle(const std::string& body) {
    ++requests_;
    json req = json::parse(body, nullptr, false);
    if (req.is_discarded() || !req.contains("messages") || !req["messages"].is_array() || req["messages"].empty())
        return {400, R"({"error":"bad request"})", {}};
    std::string all, last;
    for (const auto& m : req["messages"]) {
        last = m.value("content", "");
        all += last;
        all += '\n';
    }
    const int n = std::max(1, req.value("n", 1));
    const bool want_logprobs = req.value("logprobs", false);

    std::lock_guard lock(mu_);
    for (auto& rule : rules_) {
        if (!all_in(rule.contains, all) || !all_in(rule.last_contains, last)) continue;
        const long hit = rule.hits++;
        if (hit < static_cast<long>(rule.statuses.size()) && rule.statuses[hit] != 200)
            return {rule.statuses[hit], R"({"error":"scripted failure"})", {}};
        json choices = json::array();
        auto lp = want_logprobs ? rule.label_logprobs : std::nullopt;
        if (n > 1 && !rule.samples.empty()) {
            for (int i = 0; i < n; ++i) choices.push_back(choice(rule.samples[i % rule.samples.size()], lp));
        } else {
            const std::string text = rule.response ? *rule.response
                                     : rule.samples.empty() ? default_response_
                                                            : rule.samples.front();
            for (int i = 0; i < n; ++i) choices.push_back(choice(text, lp));
        }
        return {200, envelope(body, std::move(choices), all.size()).dump(), {}};
    }

    json choices = json::array();
    if (auto p1 = scorer_probability(last)) {
        const double p = std::clamp(*p1, 1e-12, 1.0 - 1e-12);
        auto lp = want_logprobs ? std::optional(std::make_pair(std::log(p), std::log(1.0 - p))) : std::nullopt;
        if (n == 1) {
            choices.push_back(choice(p >= 0.5 ? "1" : "0", lp));
        } else {
            for (int i = 0; i < n; ++i) choices.push_back(choice(hashed_uniform(body, i) < p ? "1" : "0", lp));
        }
    } else {
        for (int i = 0; i < n; ++i) choices.push_back(choice(default_response_, std::nullopt));
    }
    return {200, envelope(body, std::move(choices), all.size()).dump(), {}};
}

HttpResponse MockTransport::post(const HttpRequest& request) {
    ++requests_;
    int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {}
    {
        std::lock_guard lock(log_mu_);
        log_.push_back(request);
    }
    if (delay_ms_ > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
    HttpResponse resp = responder_->handle(request.body);
    --in_flight_;
    return resp;
}

std::vector<HttpRequest> MockTransport::log() const {
    std::lock_guard lock(log_mu_);
    return log_;
}

} // namespace vulninstruct
