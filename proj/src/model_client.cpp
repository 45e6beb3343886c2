#include "vulninstruct/model_client.hpp"

#include "vulninstruct/errors.hpp"
#include "vulninstruct/prompt_format.hpp"
#include "vulninstruct/util.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

namespace vulninstruct {

using nlohmann::json;

void to_json(json& j, const ChatMessage& m) { j = json{{"role", m.role}, {"content", m.content}}; }
void from_json(const json& j, ChatMessage& m) {
    m.role = j.at("role").get<std::string>();
    m.content = j.at("content").get<std::string>();
}

std::string_view to_string(ProbeMethod m) {
    switch (m) {
    case ProbeMethod::TokenLogprob: return "token_logprob";
    case ProbeMethod::SampleVote: return "sample_vote";
    case ProbeMethod::None: return "none";
    }
    return "none";
}

ProbeMethod probe_method_from_string(std::string_view s) {
    if (s == "token_logprob") return ProbeMethod::TokenLogprob;
    if (s == "sample_vote") return ProbeMethod::SampleVote;
    if (s == "none") return ProbeMethod::None;
    throw ConfigError("unknown probe method: " + std::string(s));
}

void to_json(json& j, const EndpointConfig& c) {
    j = json{{"base_url", c.base_url},
             {"model_name", c.model_name},
             {"api_key_env", c.api_key_env},
             {"temperature", c.temperature},
             {"max_output_tokens", c.max_output_tokens},
             {"context_budget", c.context_budget},
             {"timeout_ms", c.timeout_ms},
             {"max_in_flight", c.max_in_flight},
             {"min_interval_ms", c.min_interval_ms},
             {"retry", {{"max_attempts", c.retry.max_attempts}, {"base_backoff_ms", c.retry.base_backoff_ms}}},
             {"cache_dir", c.cache_dir},
             {"probe", to_string(c.probe)},
             {"vote_samples", c.vote_samples},
             {"vote_temperature", c.vote_temperature},
             {"prompt_format", c.prompt_format == PromptFormat::Alpaca ? "alpaca" : "plain"}};
}

void from_json(const json& j, EndpointConfig& c) {
    EndpointConfig d;
    c.base_url = j.value("base_url", d.base_url);
    c.model_name = j.value("model_name", d.model_name);
    c.api_key_env = j.value("api_key_env", d.api_key_env);
    c.temperature = j.value("temperature", d.temperature);
    c.max_output_tokens = j.value("max_output_tokens", d.max_output_tokens);
    c.context_budget = j.value("context_budget", d.context_budget);
    c.timeout_ms = j.value("timeout_ms", d.timeout_ms);
    c.max_in_flight = j.value("max_in_flight", d.max_in_flight);
    c.min_interval_ms = j.value("min_interval_ms", d.min_interval_ms);
    if (j.contains("retry")) {
        c.retry.max_attempts = j["retry"].value("max_attempts", d.retry.max_attempts);
        c.retry.base_backoff_ms = j["retry"].value("base_backoff_ms", d.retry.base_backoff_ms);
    }
    c.cache_dir = j.value("cache_dir", d.cache_dir);
    c.probe = probe_method_from_string(j.value("probe", std::string(to_string(d.probe))));
    c.vote_samples = j.value("vote_samples", d.vote_samples);
    c.vote_temperature = j.value("vote_temperature", d.vote_temperature);
    std::string fmt = j.value("prompt_format", std::string("alpaca"));
    if (fmt != "alpaca" && fmt != "plain") throw ConfigError("unknown prompt_format: " + fmt);
    c.prompt_format = fmt == "alpaca" ? PromptFormat::Alpaca : PromptFormat::Plain;
    if (c.context_budget <= 0) throw ConfigError("context_budget must be positive");
    if (c.max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
    if (c.retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
}

bool RequestBudget::try_consume(long tokens) {
    std::lock_guard lock(mu_);
    if (max_requests_ && requests_ >= *max_requests_) return false;
    if (max_tokens_ && tokens_ + tokens > *max_tokens_) return false;
    ++requests_;
    tokens_ += tokens;
    return true;
}

bool RequestBudget::exhausted() const {
    std::lock_guard lock(mu_);
    return (max_requests_ && requests_ >= *max_requests_) || (max_tokens_ && tokens_ >= *max_tokens_);
}

RateLimiter::RateLimiter(int max_in_flight, int min_interval_ms)
    : max_in_flight_(std::max(1, max_in_flight)), min_interval_(min_interval_ms) {}

void RateLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    if (min_interval_.count() > 0) {
        auto next = last_start_ + min_interval_;
        auto now = std::chrono::steady_clock::now();
        if (now < next) {
            // Hold the slot while waiting so that spacing is global.
            ++in_flight_;
            lock.unlock();
            std::this_thread::sleep_until(next);
            lock.lock();
            --in_flight_;
        }
    }
    ++in_flight_;
    last_start_ = std::chrono::steady_clock::now();
    int seen = max_observed_.load();
    while (in_flight_ > seen && !max_observed_.compare_exchange_weak(seen, in_flight_)) {}
}

void RateLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

std::optional<double> Prediction::probability_of(int label_v) const {
    if (!probability || label == Label::Unparsed) return std::nullopt;
    return static_cast<int>(label) == label_v ? *probability : 1.0 - *probability;
}

void to_json(json& j, const Prediction& p) {
    j = json{{"label", p.label == Label::Unparsed ? json("unparsed") : json(static_cast<int>(p.label))},
             {"probability", p.probability ? json(*p.probability) : json(nullptr)},
             {"raw_text", p.raw_text},
             {"probe_method", to_string(p.probe_method)}};
}

void from_json(const json& j, Prediction& p) {
    const auto& l = j.at("label");
    p.label = l.is_string() ? Label::Unparsed : label_from_int(l.get<int>());
    p.probability = j.at("probability").is_null() ? std::nullopt : std::optional<double>(j["probability"].get<double>());
    p.raw_text = j.value("raw_text", "");
    p.probe_method = probe_method_from_string(j.value("probe_method", "none"));
}

std::optional<double> label_one_probability(const std::vector<TokenLogprob>& logprobs) {
    for (const auto& tok : logprobs) {
        std::string t = trim(tok.token);
        if (t != "0" && t != "1") continue;
        std::optional<double> l1, l0;
        for (const auto& alt : tok.top) {
            std::string a = trim(alt.token);
            if (a == "1" && !l1) l1 = alt.logprob;
            if (a == "0" && !l0) l0 = alt.logprob;
        }
        if (t == "1" && !l1) l1 = tok.logprob;
        if (t == "0" && !l0) l0 = tok.logprob;
        if (!l1 && !l0) return std::nullopt;
        if (!l0) return 1.0;
        if (!l1) return 0.0;
        const double m = std::max(*l1, *l0);
        const double e1 = std::exp(*l1 - m);
        const double e0 = std::exp(*l0 - m);
        return e1 / (e1 + e0);
    }
    return std::nullopt;
}

ModelClient::ModelClient(EndpointConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      limiter_(config_.max_in_flight, config_.min_interval_ms),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    if (!config_.api_key_env.empty()) {
        if (const char* v = std::getenv(config_.api_key_env.c_str())) credential_ = v;
    }
    if (!config_.cache_dir.empty()) std::filesystem::create_directories(config_.cache_dir);
}

long ModelClient::estimate_tokens(const std::vector<ChatMessage>& messages) {
    std::size_t chars = 0;
    for (const auto& m : messages) chars += m.content.size();
    return static_cast<long>((chars + 3) / 4);
}

json ModelClient::request_body(const CompletionRequest& req) const {
    json body{{"model", config_.model_name},
              {"messages", req.messages},
              {"temperature", req.temperature.value_or(config_.temperature)},
              {"max_tokens", config_.max_output_tokens}};
    if (req.n > 1) body["n"] = req.n;
    if (req.logprobs) {
        body["logprobs"] = true;
        if (req.top_logprobs > 0) body["top_logprobs"] = req.top_logprobs;
    }
    return body;
}

std::string ModelClient::cache_key(const CompletionRequest& req) const {
    json k = request_body(req);
    k["endpoint"] = config_.base_url;
    k["n"] = req.n;
    k["logprobs"] = req.logprobs;
    k["top_logprobs"] = req.top_logprobs;
    k["salt"] = req.salt;
    return sha256_hex(k.dump());
}

bool ModelClient::is_cached(const CompletionRequest& req) const {
    if (config_.cache_dir.empty()) return false;
    return std::filesystem::exists(std::filesystem::path(config_.cache_dir) / (cache_key(req) + ".json"));
}

CompletionResponse ModelClient::parse_response(const std::string& body) const {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
        throw EndpointError("malformed completion response");
    CompletionResponse out;
    for (const auto& c : j["choices"]) {
        Choice choice;
        if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string())
            choice.text = c["message"]["content"].get<std::string>();
        if (c.contains("logprobs") && c["logprobs"].is_object() && c["logprobs"].contains("content") &&
            c["logprobs"]["content"].is_array()) {
            for (const auto& t : c["logprobs"]["content"]) {
                TokenLogprob tl;
                tl.token = t.value("token", "");
                tl.logprob = t.value("logprob", 0.0);
                if (t.contains("top_logprobs") && t["top_logprobs"].is_array())
                    for (const auto& a : t["top_logprobs"]) tl.top.push_back({a.value("token", ""), a.value("logprob", 0.0)});
                choice.logprobs.push_back(std::move(tl));
            }
        }
        out.choices.push_back(std::move(choice));
    }
    if (j.contains("usage") && j["usage"].is_object()) {
        out.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
        out.completion_tokens = j["usage"].value("completion_tokens", 0L);
    }
    return out;
}

CompletionResponse ModelClient::request(const CompletionRequest& req) {
    const std::string key = cache_key(req);
    const auto cache_path = config_.cache_dir.empty()
                                ? std::filesystem::path()
                                : std::filesystem::path(config_.cache_dir) / (key + ".json");
    if (!cache_path.empty()) {
        std::optional<std::string> cached;
        {
            std::lock_guard lock(cache_mu_);
            if (std::filesystem::exists(cache_path)) cached = read_file(cache_path);
        }
        if (cached) {
            auto resp = parse_response(*cached);
            resp.from_cache = true;
            std::lock_guard lock(stats_mu_);
            ++stats_.cache_hits;
            return resp;
        }
    }

    const long estimate = estimate_tokens(req.messages);
    if (estimate > config_.context_budget)
        throw BudgetError("prompt of ~" + std::to_string(estimate) + " tokens exceeds the context budget of " +
                          std::to_string(config_.context_budget));
    if (budget_ && !budget_->try_consume(estimate)) throw BudgetExhausted("request budget exhausted");

    HttpRequest http;
    http.path = "/chat/completions";
    http.body = request_body(req).dump();
    http.headers.emplace_back("Content-Type", "application/json");
    if (!credential_.empty()) http.headers.emplace_back("Authorization", "Bearer " + credential_);

    int backoff = config_.retry.base_backoff_ms;
    for (int attempt = 1;; ++attempt) {
        HttpResponse resp;
        {
            RateLimiter::Guard guard(limiter_);
            resp = transport_->post(http);
        }
        {
            std::lock_guard lock(stats_mu_);
            ++stats_.network_requests;
        }
        if (resp.status == 200) {
            auto parsed = parse_response(resp.body);
            if (!cache_path.empty()) {
                std::lock_guard lock(cache_mu_);
                write_file_atomic(cache_path, resp.body);
            }
            std::lock_guard lock(stats_mu_);
            ++stats_.completed_requests;
            return parsed;
        }
        if (resp.status == 401 || resp.status == 403)
            throw AuthError("endpoint rejected the credential (HTTP " + std::to_string(resp.status) + ")", resp.status);
        const bool transient = resp.status == 0 || resp.status == 429 || resp.status >= 500;
        if (!transient)
            throw EndpointError("endpoint returned HTTP " + std::to_string(resp.status) + ": " + resp.body, resp.status);
        if (attempt >= config_.retry.max_attempts)
            throw EndpointError("exhausted " + std::to_string(attempt) + " attempts; last status " +
                                    std::to_string(resp.status) + (resp.error.empty() ? "" : " (" + resp.error + ")"),
                                resp.status);
        {
            std::lock_guard lock(stats_mu_);
            ++stats_.retries;
        }
        if (backoff > 0) sleeper_(std::chrono::milliseconds(backoff));
        backoff *= 2;
    }
}

std::string ModelClient::complete(const std::vector<ChatMessage>& messages) {
    CompletionRequest req;
    req.messages = messages;
    return request(req).choices.front().text;
}

std::vector<ChatMessage> ModelClient::classification_messages(std::string_view code, std::string_view instruction) const {
    if (config_.prompt_format == PromptFormat::Alpaca) return {{"user", render_alpaca_prompt(instruction, code)}};
    return {{"user", std::string(instruction) + "\n\n" + std::string(code)}};
}

Prediction ModelClient::classify(std::string_view code, std::string_view instruction) {
    if (config_.probe != ProbeMethod::None) return label_probability(code, instruction);
    Prediction p;
    p.raw_text = complete(classification_messages(code, instruction));
    p.label = parse_label(p.raw_text);
    return p;
}

Prediction ModelClient::label_probability(std::string_view code, std::string_view instruction) {
    if (config_.probe == ProbeMethod::SampleVote) return sample_vote(code, instruction);
    if (config_.probe == ProbeMethod::None) throw ConfigError("label_probability requires a probe method");

    CompletionRequest req;
    req.messages = classification_messages(code, instruction);
    req.logprobs = true;
    req.top_logprobs = 5;
    auto resp = request(req);
    const Choice& c = resp.choices.front();
    auto p1 = label_one_probability(c.logprobs);
    if (!p1) {
        warn("endpoint returned no label-token alternatives; falling back to sample_vote");
        return sample_vote(code, instruction);
    }
    Prediction p;
    p.raw_text = c.text;
    p.label = parse_label(c.text);
    p.probe_method = ProbeMethod::TokenLogprob;
    if (p.label == Label::One) p.probability = *p1;
    else if (p.label == Label::Zero) p.probability = 1.0 - *p1;
    return p;
}

Prediction ModelClient::sample_vote(std::string_view code, std::string_view instruction) {
    const int n = std::max(1, config_.vote_samples);
    std::vector<std::string> texts;
    CompletionRequest req;
    req.messages = classification_messages(code, instruction);
    req.temperature = config_.vote_temperature;
    for (int salt = 0; static_cast<int>(texts.size()) < n && salt < 2 * n; ++salt) {
        req.n = n - static_cast<int>(texts.size());
        req.salt = salt;
        for (auto& c : request(req).choices) {
            if (static_cast<int>(texts.size()) < n) texts.push_back(std::move(c.text));
        }
    }
    int ones = 0, zeros = 0;
    for (const auto& t : texts) {
        Label l = parse_label(t);
        if (l == Label::One) ++ones;
        else if (l == Label::Zero) ++zeros;
    }
    Prediction p;
    p.probe_method = ProbeMethod::SampleVote;
    p.raw_text = texts.empty() ? "" : texts.front();
    if (ones + zeros == 0) return p;
    p.label = ones >= zeros ? Label::One : Label::Zero;
    p.probability = static_cast<double>(std::max(ones, zeros)) / static_cast<double>(ones + zeros);
    return p;
}

void ModelClient::warn(std::string msg) {
    std::lock_guard lock(stats_mu_);
    stats_.warnings.push_back(std::move(msg));
}

ModelClient::Stats ModelClient::stats() const {
    std::lock_guard lock(stats_mu_);
    Stats s = stats_;
    s.max_in_flight = limiter_.max_observed();
    return s;
}

bool truncate_to_tokens(std::string& text, long max_tokens) {
    const std::size_t max_chars = static_cast<std::size_t>(std::max(0L, max_tokens)) * 4;
    if (text.size() <= max_chars) return false;
    std::size_t cut = text.rfind('\n', max_chars);
    if (cut == std::string::npos || cut == 0) cut = max_chars;
    text.resize(cut);
    return true;
}

} // namespace vulninstruct
