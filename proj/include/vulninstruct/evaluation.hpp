#pragma once

#include "vulninstruct/labels.hpp"
#include "vulninstruct/model_client.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vulninstruct {

// Unparsed predictions are scored as the wrong class and tallied in n_unparsed.
inline constexpr std::string_view kUnparsedConvention =
    "unparsed predictions are counted as incorrect (fn when truth is 1, fp when truth is 0)";

struct ConfusionCounts {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    long n_unparsed = 0;

    long total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts score(const std::vector<Label>& predictions, const std::vector<int>& ground_truth);

struct EvalReport {
    std::string dataset;
    std::string condition = "clean"; // clean, MHM, WIR, DCI
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    ConfusionCounts counts;
};

EvalReport prf1(const ConfusionCounts& counts);

void to_json(nlohmann::json& j, const EvalReport& r);

struct ScoredPrediction {
    Label predicted = Label::Unparsed;
    int truth = 0;
    std::optional<double> probability; // of the predicted label
};

struct DensityHistogram {
    std::vector<double> bin_edges; // bins + 1 entries over [0, 1]
    std::vector<double> densities;
    long population = 0;
    bool empty = true;

    double integral() const;
};

DensityHistogram density(const std::vector<ScoredPrediction>& predictions, int bins = 20);

std::string density_csv(const DensityHistogram& h);

// One row of adversarial evidence: the label the model gave the attacked code.
struct AttackedPrediction {
    std::string record_id;
    std::string kind; // MHM, WIR, DCI
    Label predicted = Label::Unparsed;
};

// clean: per record_id, truth and clean prediction for one dataset.
struct CleanScores {
    std::string dataset;
    std::map<std::string, ScoredPrediction> by_record;
};

// One report per attack kind: records with an attacked prediction use it,
// the rest keep their clean prediction.
std::vector<EvalReport> robustness_report(const CleanScores& clean, const std::vector<AttackedPrediction>& attacked);

// Aligned plain-text table of reports with the unparsed convention as header.
std::string render_table(const std::vector<EvalReport>& reports);

} // namespace vulninstruct
