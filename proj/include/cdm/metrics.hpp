#pragma once

// Score computation: CDM (F1 over validated element matches) plus the text
// baselines BLEU, Edit Distance and exact match.

#include <optional>
#include <string>
#include <vector>

#include "cdm/validator.hpp"

namespace cdm {

struct CdmScore {
    long tp = 0, fp = 0, fn = 0;
    double f1 = 0.0;
    bool render_ok = true;
    std::optional<std::string> failure;  // CompileError / Timeout / ...
};

struct BaselineScores {
    double bleu = 0.0;
    double edit_distance = 0.0;  // character-level on raw strings, in [0,1]
    bool exact_match = false;    // normalized token sequences equal
};

// tp = surviving pairs, fp = leftover predictions, fn = leftover ground
// truth; F1 = 2tp / (2tp + fp + fn), 1 when all counts are zero. A failed
// render forces the score to 0.
CdmScore cdm_score(const MatchSet& validated, bool render_ok);

// fraction of scores with f1 == 1 exactly; throws EmptyInput on an empty list
double exprate_at_cdm(const std::vector<CdmScore>& scores);

struct BleuOptions {
    int max_order = 4;
    bool smoothing = false;  // add-one on orders >= 2 with zero matches
};

// 4-gram BLEU with uniform weights and brevity penalty over normalized
// token sequences; orders longer than the hypothesis are skipped
double bleu(const TokenSequence& gt, const TokenSequence& pred,
            const BleuOptions& opts = {});

// token-level Levenshtein / max length
double edit_distance(const TokenSequence& gt, const TokenSequence& pred);

// character-level Levenshtein / max length, the flavor reported next to
// published formula-recognition numbers
double edit_distance_chars(const std::string& gt, const std::string& pred);

}  // namespace cdm
