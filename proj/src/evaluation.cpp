#include "vulninstruct/evaluation.hpp"

#include "vulninstruct/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace vulninstruct {

ConfusionCounts score(const std::vector<Label>& predictions, const std::vector<int>& ground_truth) {
    if (predictions.size() != ground_truth.size())
        throw Error("score: " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(ground_truth.size()) + " labels");
    ConfusionCounts c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int t = ground_truth[i];
        if (t != 0 && t != 1) throw Error("score: ground truth must be 0 or 1");
        Label p = predictions[i];
        if (p == Label::Unparsed) {
            ++c.n_unparsed;
            p = t == 1 ? Label::Zero : Label::One;
        }
        if (t == 1) (p == Label::One ? c.tp : c.fn)++;
        else (p == Label::One ? c.fp : c.tn)++;
    }
    return c;
}

EvalReport prf1(const ConfusionCounts& counts) {
    EvalReport r;
    r.counts = counts;
    const long pd = counts.tp + counts.fp;
    const long rd = counts.tp + counts.fn;
    r.precision = pd == 0 ? 0.0 : static_cast<double>(counts.tp) / static_cast<double>(pd);
    r.recall = rd == 0 ? 0.0 : static_cast<double>(counts.tp) / static_cast<double>(rd);
    r.f1 = r.precision + r.recall > 0 ? 2 * (r.precision * r.recall) / (r.precision + r.recall) : 0.0;
    return r;
}

void to_json(nlohmann::json& j, const EvalReport& r) {
    j = nlohmann::json{{"dataset", r.dataset},
                       {"condition", r.condition},
                       {"precision", r.precision},
                       {"recall", r.recall},
                       {"f1", r.f1},
                       {"counts",
                        {{"tp", r.counts.tp},
                         {"fp", r.counts.fp},
                         {"fn", r.counts.fn},
                         {"tn", r.counts.tn},
                         {"n_unparsed", r.counts.n_unparsed}}},
                       {"unparsed_convention", kUnparsedConvention}};
}

double DensityHistogram::integral() const {
    double s = 0;
    for (std::size_t i = 0; i < densities.size(); ++i) s += densities[i] * (bin_edges[i + 1] - bin_edges[i]);
    return s;
}

DensityHistogram density(const std::vector<ScoredPrediction>& predictions, int bins) {
    if (bins < 1) throw ConfigError("density needs at least one bin");
    DensityHistogram h;
    h.bin_edges.resize(bins + 1);
    for (int i = 0; i <= bins; ++i) h.bin_edges[i] = static_cast<double>(i) / bins;
    h.densities.assign(bins, 0.0);
    std::vector<long> counts(bins, 0);
    for (const auto& p : predictions) {
        if (p.predicted == Label::Unparsed || static_cast<int>(p.predicted) != p.truth || !p.probability) continue;
        const double v = std::clamp(*p.probability, 0.0, 1.0);
        int b = std::min(bins - 1, static_cast<int>(v * bins));
        ++counts[b];
        ++h.population;
    }
    h.empty = h.population == 0;
    if (h.empty) return h;
    const double width = 1.0 / bins;
    for (int i = 0; i < bins; ++i)
        h.densities[i] = static_cast<double>(counts[i]) / (static_cast<double>(h.population) * width);
    return h;
}

std::string density_csv(const DensityHistogram& h) {
    std::string out = "bin_mid,density\n";
    char buf[64];
    for (std::size_t i = 0; i < h.densities.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.4f,%.6f\n", (h.bin_edges[i] + h.bin_edges[i + 1]) / 2, h.densities[i]);
        out += buf;
    }
    return out;
}

std::vector<EvalReport> robustness_report(const CleanScores& clean, const std::vector<AttackedPrediction>& attacked) {
    if (clean.by_record.empty()) throw Error("robustness_report: missing clean baseline for " + clean.dataset);
    std::map<std::string, std::map<std::string, Label>> per_kind;
    for (const auto& a : attacked) {
        if (!clean.by_record.count(a.record_id))
            throw Error("robustness_report: attack outcome for unscored record " + a.record_id);
        per_kind[a.kind][a.record_id] = a.predicted;
    }
    std::vector<EvalReport> out;
    for (const auto& [kind, overrides] : per_kind) {
        std::vector<Label> preds;
        std::vector<int> truth;
        for (const auto& [id, sp] : clean.by_record) {
            auto it = overrides.find(id);
            preds.push_back(it == overrides.end() ? sp.predicted : it->second);
            truth.push_back(sp.truth);
        }
        EvalReport r = prf1(score(preds, truth));
        r.dataset = clean.dataset;
        r.condition = kind;
        out.push_back(std::move(r));
    }
    return out;
}

std::string render_table(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    os << "# " << kUnparsedConvention << "\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %-9s %9s %9s %9s %6s %6s %6s %6s %9s\n", "dataset", "condition", "precision",
                  "recall", "f1", "tp", "fp", "fn", "tn", "unparsed");
    os << buf;
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof buf, "%-16s %-9s %9.4f %9.4f %9.4f %6ld %6ld %6ld %6ld %9ld\n", r.dataset.c_str(),
                      r.condition.c_str(), r.precision, r.recall, r.f1, r.counts.tp, r.counts.fp, r.counts.fn,
                      r.counts.tn, r.counts.n_unparsed);
        os << buf;
    }
    return os.str();
}

} // namespace vulninstruct
