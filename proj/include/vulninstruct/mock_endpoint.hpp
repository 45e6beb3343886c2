#pragma once

#include "vulninstruct/model_client.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace vulninstruct {

// Answers chat-completion bodies from a scripted fixture:
//
//   {
//     "rules": [
//       {"contains": ["..."], "last_contains": ["..."],
//        "statuses": [429, 429], "response": "1: ...",
//        "samples": ["1", "0", ...], "label_logprobs": {"1": -0.1, "0": -2.3}}
//     ],
//     "scorer": {"last_contains": ["Detect whether"], "bias": -0.5,
//                "weights": {"len": 1.2}},
//     "default_response": "0"
//   }
//
// Rules are tried in order. "contains" is matched against every message,
// "last_contains" against the final message only. "statuses" is consumed one
// entry per matching request before the rule starts answering 200. The scorer
// is a logistic model over word counts of the Alpaca input section; it answers
// with the more likely label and that label's log-scores.
class ScriptedResponder {
public:
    explicit ScriptedResponder(nlohmann::json fixture);
    static std::shared_ptr<ScriptedResponder> from_file(const std::filesystem::path& path);

    HttpResponse handle(const std::string& body);

    // Probability of label 1 the scorer assigns to a prompt, if it applies.
    std::optional<double> scorer_probability(const std::string& last_message) const;

    long requests() const { return requests_.load(); }

private:
    struct Rule {
        std::vector<std::string> contains;
        std::vector<std::string> last_contains;
        std::vector<int> statuses;
        std::optional<std::string> response;
        std::vector<std::string> samples;
        std::optional<std::pair<double, double>> label_logprobs; // (ln p1, ln p0)
        long hits = 0;
    };
    struct Scorer {
        std::vector<std::string> last_contains;
        double bias = 0.0;
        std::map<std::string, double> weights;
    };

    static nlohmann::json choice(const std::string& text, std::optional<std::pair<double, double>> label_logprobs);
    nlohmann::json envelope(const std::string& body, nlohmann::json choices, std::size_t prompt_chars) const;

    std::vector<Rule> rules_;
    std::optional<Scorer> scorer_;
    std::string default_response_;
    std::mutex mu_;
    std::atomic<long> requests_{0};
};

// In-process transport backed by a ScriptedResponder. Tracks concurrency so
// tests can assert the client's in-flight bound.
class MockTransport : public Transport {
public:
    explicit MockTransport(std::shared_ptr<ScriptedResponder> responder, int delay_ms = 0)
        : responder_(std::move(responder)), delay_ms_(delay_ms) {}

    HttpResponse post(const HttpRequest& request) override;

    long requests() const { return requests_.load(); }
    int max_in_flight() const { return max_in_flight_.load(); }
    std::vector<HttpRequest> log() const;

private:
    std::shared_ptr<ScriptedResponder> responder_;
    int delay_ms_;
    std::atomic<long> requests_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
    mutable std::mutex log_mu_;
    std::vector<HttpRequest> log_;
};

// Serves the scripted responder over HTTP on 127.0.0.1 at
// {prefix}/chat/completions. A non-empty required_token makes the server
// answer 401 to requests without the matching bearer token.
class MockServer {
public:
    MockServer(std::shared_ptr<ScriptedResponder> responder, std::string prefix = "/v1",
               std::string required_token = {});
    ~MockServer();
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    int port() const { return port_; }
    std::string base_url() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
    std::string prefix_;
    int port_ = 0;
};

} // namespace vulninstruct
