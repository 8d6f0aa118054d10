#pragma once

// Document-level evaluation: preprocess LaTeX sources, extract displayed
// equations from ground-truth sources and model outputs, pair them with
// two-round edit-distance matching, then score each pair through the
// formula pipeline.

#include <optional>
#include <string>
#include <vector>

#include "cdm/pipeline.hpp"

namespace cdm {

struct DocFormula {
    std::string doc_id;
    int line_no = 0;      // 1-based line of the match start
    std::string body;     // delimiters, \label and \tag stripped
    std::string raw;      // original matched text
};

struct MatchThresholds {
    double round1 = 0.4;
    double round2 = 0.8;
};

enum class DocDialect { LatexSource, MarkdownOutput, BracketOutput };

// Strip % comments (keeping \%), \iffalse...\fi and comment environments;
// expand \newcommand / \renewcommand / \def / \DeclareMathOperator(*) /
// \DeclareRobustCommand aliases (up to 3 nested iterations); drop content
// before \begin{document} when the marker exists.
std::string preprocess_source(const std::string& doc);

std::vector<DocFormula> extract_displayed(const std::string& doc,
                                          DocDialect dialect,
                                          const std::string& doc_id = "");

struct DocMatch {
    std::optional<DocFormula> gt;
    std::optional<DocFormula> pred;
    double distance = 1.0;  // normalized edit distance used for the pairing
    int round = 0;          // 1 or 2, 0 when unmatched
};

// Round 1 walks ground-truth formulas in order and takes the closest
// unmatched prediction within thresholds.round1; round 2 retries leftovers
// against thresholds.round2. Remaining predictions are appended as
// redundant entries.
std::vector<DocMatch> match_two_round(const std::vector<DocFormula>& gt,
                                      const std::vector<DocFormula>& pred,
                                      const MatchThresholds& thresholds);

struct DocEvalResult {
    std::vector<EvalRecord> records;
    Summary summary;
    std::vector<DocMatch> matches;
    // pairs that matched in round 2 with a large distance, kept for human
    // triage instead of silent correction
    std::vector<std::size_t> unmatched_review;
};

DocEvalResult evaluate_document(const std::string& gt_source,
                                const std::string& pred_output,
                                DocDialect pred_dialect, const EvalConfig& cfg,
                                const MatchThresholds& thresholds = {},
                                const std::string& doc_id = "doc");

// same protocol over already-extracted formula lists (pre-extracted GT
// arrives as one formula per line)
DocEvalResult evaluate_formulas(const std::vector<DocFormula>& gt,
                                const std::vector<DocFormula>& pred,
                                const EvalConfig& cfg,
                                const MatchThresholds& thresholds,
                                const std::string& doc_id);

// normalized edit distance on whitespace-collapsed raw strings, the
// document-level pairing metric
double doc_match_distance(const std::string& a, const std::string& b);

}  // namespace cdm
