#pragma once

#include "vulninstruct/labels.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vulninstruct {

struct ChatMessage {
    std::string role;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

void to_json(nlohmann::json& j, const ChatMessage& m);
void from_json(const nlohmann::json& j, ChatMessage& m);

enum class ProbeMethod { TokenLogprob, SampleVote, None };

std::string_view to_string(ProbeMethod m);
ProbeMethod probe_method_from_string(std::string_view s);

enum class PromptFormat { Alpaca, Plain };

struct RetryPolicy {
    int max_attempts = 4;
    int base_backoff_ms = 500; // doubled after every failed attempt

    bool operator==(const RetryPolicy&) const = default;
};

struct EndpointConfig {
    std::string base_url = "http://127.0.0.1:8000/v1";
    std::string model_name = "mock";
    std::string api_key_env; // name of the environment variable holding the credential
    double temperature = 0.0;
    int max_output_tokens = 512;
    int context_budget = 512; // tokens, estimated at 4 characters per token
    int timeout_ms = 60000;
    int max_in_flight = 4;
    int min_interval_ms = 0;
    RetryPolicy retry;
    std::string cache_dir; // empty disables the on-disk cache
    ProbeMethod probe = ProbeMethod::TokenLogprob;
    int vote_samples = 10;
    double vote_temperature = 1.0;
    PromptFormat prompt_format = PromptFormat::Alpaca;

    bool operator==(const EndpointConfig&) const = default;
};

void to_json(nlohmann::json& j, const EndpointConfig& c);
void from_json(const nlohmann::json& j, EndpointConfig& c);

struct HttpRequest {
    std::string path; // relative to the endpoint base, e.g. "/chat/completions"
    std::string body;
    std::vector<std::pair<std::string, std::string>> headers;
};

struct HttpResponse {
    int status = 0; // 0 = transport failure
    std::string body;
    std::string error;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const HttpRequest& request) = 0;
};

// Speaks HTTP(S) to {base_url}{path}.
class HttpTransport : public Transport {
public:
    HttpTransport(std::string base_url, int timeout_ms);
    HttpResponse post(const HttpRequest& request) override;

private:
    std::string origin_;
    std::string prefix_;
    int timeout_ms_;
};

// Shared cap on network spend. Unset limits are unbounded.
class RequestBudget {
public:
    RequestBudget(std::optional<long> max_requests, std::optional<long> max_tokens)
        : max_requests_(max_requests), max_tokens_(max_tokens) {}

    // Reserves one request of the given estimated size; false when exhausted.
    bool try_consume(long tokens);
    bool exhausted() const;
    long requests_used() const { return requests_; }
    long tokens_used() const { return tokens_; }

private:
    std::optional<long> max_requests_;
    std::optional<long> max_tokens_;
    mutable std::mutex mu_;
    long requests_ = 0;
    long tokens_ = 0;
};

// Bounded in-flight requests plus a minimum spacing between request starts.
class RateLimiter {
public:
    RateLimiter(int max_in_flight, int min_interval_ms);

    void acquire();
    void release();
    int max_observed() const { return max_observed_.load(); }

    class Guard {
    public:
        explicit Guard(RateLimiter& rl) : rl_(rl) { rl_.acquire(); }
        ~Guard() { rl_.release(); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;

    private:
        RateLimiter& rl_;
    };

private:
    int max_in_flight_;
    std::chrono::milliseconds min_interval_;
    std::mutex mu_;
    std::condition_variable cv_;
    int in_flight_ = 0;
    std::atomic<int> max_observed_{0};
    std::chrono::steady_clock::time_point last_start_{};
};

struct TokenAlternative {
    std::string token;
    double logprob = 0.0;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;
    std::vector<TokenAlternative> top;
};

struct Choice {
    std::string text;
    std::vector<TokenLogprob> logprobs;
};

struct CompletionRequest {
    std::vector<ChatMessage> messages;
    std::optional<double> temperature; // defaults to the endpoint config
    int n = 1;
    bool logprobs = false;
    int top_logprobs = 0;
    int salt = 0; // distinguishes repeated identical sampling requests in the cache
};

struct CompletionResponse {
    std::vector<Choice> choices;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    bool from_cache = false;
};

struct Prediction {
    Label label = Label::Unparsed;
    std::optional<double> probability; // probability of `label`
    std::string raw_text;
    ProbeMethod probe_method = ProbeMethod::None;

    // Probability mass on the given binary label, when known.
    std::optional<double> probability_of(int label) const;
};

void to_json(nlohmann::json& j, const Prediction& p);
void from_json(const nlohmann::json& j, Prediction& p);

// Renormalizes the "1"/"0" alternatives of the first generated label token.
// Returns the probability of label 1, or nullopt when no label token carries
// alternatives.
std::optional<double> label_one_probability(const std::vector<TokenLogprob>& logprobs);

class ModelClient {
public:
    struct Stats {
        long network_requests = 0; // HTTP attempts, including retries
        long completed_requests = 0;
        long cache_hits = 0;
        long retries = 0;
        int max_in_flight = 0;
        std::vector<std::string> warnings;
    };

    // The credential is read from the environment variable named in the
    // config; it is sent as a bearer token and never written anywhere.
    ModelClient(EndpointConfig config, std::shared_ptr<Transport> transport);

    const EndpointConfig& config() const { return config_; }

    std::string complete(const std::vector<ChatMessage>& messages);
    CompletionResponse request(const CompletionRequest& req);
    bool is_cached(const CompletionRequest& req) const;

    // Label parsed from the response; probability attached per the configured probe.
    Prediction classify(std::string_view code, std::string_view task_instruction);
    Prediction label_probability(std::string_view code, std::string_view task_instruction);

    std::vector<ChatMessage> classification_messages(std::string_view code, std::string_view instruction) const;

    void set_budget(std::shared_ptr<RequestBudget> budget) { budget_ = std::move(budget); }
    void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleeper_ = std::move(sleeper); }

    Stats stats() const;

    static long estimate_tokens(const std::vector<ChatMessage>& messages);

private:
    std::string cache_key(const CompletionRequest& req) const;
    nlohmann::json request_body(const CompletionRequest& req) const;
    CompletionResponse parse_response(const std::string& body) const;
    Prediction sample_vote(std::string_view code, std::string_view instruction);
    void warn(std::string msg);

    EndpointConfig config_;
    std::shared_ptr<Transport> transport_;
    std::string credential_;
    RateLimiter limiter_;
    std::shared_ptr<RequestBudget> budget_;
    std::function<void(std::chrono::milliseconds)> sleeper_;
    mutable std::mutex cache_mu_;
    mutable std::mutex stats_mu_;
    Stats stats_;
};

// Tail-first truncation of `text` at line granularity so that it fits in
// max_tokens (4 characters per token). Returns true when text was cut.
bool truncate_to_tokens(std::string& text, long max_tokens);

} // namespace vulninstruct
