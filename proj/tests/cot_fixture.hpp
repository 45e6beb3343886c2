#pragma once

// Mini-corpus records, features and a scripted client for CoT replay tests.

#include "test_support.hpp"

#include "vulninstruct/corpus.hpp"
#include "vulninstruct/cot_sv.hpp"
#include "vulninstruct/features.hpp"
#include "vulninstruct/mock_endpoint.hpp"
#include "vulninstruct/model_client.hpp"
#include "vulninstruct/pipeline.hpp"

namespace testsupport {

struct MiniCot {
    std::vector<vulninstruct::VulnRecord> records;
    std::map<std::string, vulninstruct::RecordFeatures> features;

    const vulninstruct::VulnRecord& by_function(const std::string& fn) const {
        for (const auto& r : records)
            if (r.code.find(fn + "(") != std::string::npos) return r;
        throw std::runtime_error("no record for " + fn);
    }
};

inline MiniCot mini_cot() {
    using namespace vulninstruct;
    auto cfg = load_config(data_file("demo_config.json"));
    MiniCot m;
    m.records = deduplicate(ingest(data_file("corpus.jsonl"), "mini", cfg.schemas).records);
    attach_cve_descriptions(m.records, CveStore::load(data_file("cve.json")));
    for (const auto& r : m.records) m.features[r.record_id] = extract_features(r, 1);
    return m;
}

inline vulninstruct::EndpointConfig mini_endpoint(const fs::path& cache) {
    vulninstruct::EndpointConfig c;
    c.context_budget = 4096;
    c.cache_dir = cache.string();
    c.retry.base_backoff_ms = 1;
    return c;
}

inline std::shared_ptr<vulninstruct::ScriptedResponder> mini_responder() {
    return vulninstruct::ScriptedResponder::from_file(data_file("mock_endpoint.json"));
}

} // namespace testsupport
