#include "cdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cdm/errors.hpp"

namespace cdm {

namespace {

template <typename Seq>
double levenshtein_ratio(const Seq& a, const Seq& b) {
    std::size_t n = a.size(), m = b.size();
    if (n == 0 && m == 0) return 0.0;
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]) / static_cast<double>(std::max(n, m));
}

std::vector<std::string> token_texts(const TokenSequence& seq) {
    std::vector<std::string> out;
    out.reserve(seq.tokens.size());
    for (const auto& t : seq.tokens) out.push_back(t.text);
    return out;
}

}  // namespace

CdmScore cdm_score(const MatchSet& validated, bool render_ok) {
    CdmScore s;
    if (!render_ok) {
        s.render_ok = false;
        s.f1 = 0.0;
        return s;
    }
    s.tp = static_cast<long>(validated.pairs.size());
    s.fp = static_cast<long>(validated.unmatched_pred.size());
    s.fn = static_cast<long>(validated.unmatched_gt.size());
    long denom = 2 * s.tp + s.fp + s.fn;
    s.f1 = denom == 0 ? 1.0 : 2.0 * static_cast<double>(s.tp) / denom;
    return s;
}

double exprate_at_cdm(const std::vector<CdmScore>& scores) {
    if (scores.empty()) throw EmptyInput("no scores to aggregate");
    long perfect = std::count_if(scores.begin(), scores.end(),
                                 [](const CdmScore& s) { return s.f1 == 1.0; });
    return static_cast<double>(perfect) / static_cast<double>(scores.size());
}

double bleu(const TokenSequence& gt, const TokenSequence& pred,
            const BleuOptions& opts) {
    auto ref = token_texts(gt);
    auto hyp = token_texts(pred);
    if (hyp.empty()) return ref.empty() ? 1.0 : 0.0;
    if (ref.empty()) return 0.0;

    double log_sum = 0.0;
    for (int n = 1; n <= opts.max_order; ++n) {
        std::size_t order = static_cast<std::size_t>(n);
        if (hyp.size() < order) break;  // shorter orders carry the score

        std::map<std::vector<std::string>, long> ref_grams;
        for (std::size_t i = 0; i + order <= ref.size(); ++i)
            ++ref_grams[{ref.begin() + i, ref.begin() + i + order}];

        long matches = 0;
        long total = static_cast<long>(hyp.size() - order + 1);
        std::map<std::vector<std::string>, long> used;
        for (std::size_t i = 0; i + order <= hyp.size(); ++i) {
            std::vector<std::string> gram(hyp.begin() + i, hyp.begin() + i + order);
            auto it = ref_grams.find(gram);
            if (it != ref_grams.end() && used[gram] < it->second) {
                ++used[gram];
                ++matches;
            }
        }
        if (matches == 0) {
            if (opts.smoothing && n >= 2) {
                log_sum += std::log(1.0 / static_cast<double>(total + 1));
                continue;
            }
            return 0.0;
        }
        log_sum += std::log(static_cast<double>(matches) / total);
    }

    double bp = 1.0;
    if (hyp.size() < ref.size())
        bp = std::exp(1.0 - static_cast<double>(ref.size()) / hyp.size());
    return bp * std::exp(log_sum / opts.max_order);
}

double edit_distance(const TokenSequence& gt, const TokenSequence& pred) {
    return levenshtein_ratio(token_texts(gt), token_texts(pred));
}

double edit_distance_chars(const std::string& gt, const std::string& pred) {
    return levenshtein_ratio(gt, pred);
}

}  // namespace cdm
