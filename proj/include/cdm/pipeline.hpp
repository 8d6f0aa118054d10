#pragma once

// End-to-end per-sample evaluation: tokenize, color, render both sides,
// localize, match, validate, score. Batch evaluation runs samples on a
// bounded worker pool and aggregates a summary.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdm/localize.hpp"
#include "cdm/matcher.hpp"
#include "cdm/metrics.hpp"
#include "cdm/render.hpp"
#include "cdm/validator.hpp"

namespace cdm {

struct MetricsToggle {
    bool baselines = true;  // BLEU / edit distance / exact match
};

struct EvalConfig {
    RenderConfig render;
    CostWeights weights;
    RansacParams ransac;
    LocalizeOptions localize;
    EquivTable equiv = EquivTable::builtin();
    MetricsToggle metrics;
    BleuOptions bleu;
    std::string debug_dir;  // per-sample artifact dumps when non-empty
};

struct EvalRecord {
    std::string id;
    std::string gt;
    std::string pred;
    CdmScore cdm;
    std::optional<BaselineScores> baselines;
    bool gt_render_ok = true;  // false marks a data error, not a model error
    bool pred_render_ok = true;
    std::map<std::string, double> timings_ms;
    std::map<std::string, std::string> artifacts;
};

struct Summary {
    std::size_t samples = 0;
    double mean_cdm = 0.0;
    double exprate_at_cdm = 0.0;
    double mean_bleu = 0.0;
    double mean_edit_distance = 0.0;
    double exprate = 0.0;
    double render_success_rate = 0.0;  // prediction-side renders
};

EvalRecord evaluate_pair(const std::string& gt, const std::string& pred,
                         const EvalConfig& cfg, const std::string& id = "");

struct Sample {
    std::string id;
    std::string gt;
    std::string pred;
};

struct BatchResult {
    std::vector<EvalRecord> records;
    Summary summary;
};

// throws EmptyInput on an empty sample list and DuplicateId on repeated ids
BatchResult evaluate_batch(const std::vector<Sample>& samples,
                           const EvalConfig& cfg, int jobs = 0);

// summary over already-computed records (also used to re-check loaded
// reports); throws EmptyInput when records is empty
Summary summarize(const std::vector<EvalRecord>& records);

}  // namespace cdm
