#pragma once

// Optimal pairing of predicted elements with ground-truth elements. The
// pair cost blends token identity, bounding-box proximity and source-order
// proximity; the assignment minimizes the total over all injections of the
// smaller element set into the larger one.

#include <vector>

#include "cdm/localize.hpp"

namespace cdm {

struct CostWeights {
    double token = 1.0;
    double position = 0.25;
    double order = 0.25;
};

struct CostParts {
    double token = 0.0;
    double position = 0.0;
    double order = 0.0;
};

struct MatchPair {
    Element gt;
    Element pred;
    double cost = 0.0;
    CostParts parts;
};

struct MatchSet {
    std::vector<MatchPair> pairs;
    std::vector<Element> unmatched_gt;
    std::vector<Element> unmatched_pred;
};

// 0 for identical texts, 0.05 for render-equivalent texts, 1 otherwise
double token_cost(const Element& gt, const Element& pred, const EquivTable& table);

// mean absolute difference of the four normalized bbox coordinates
double position_cost(const Element& gt, const Element& pred);

// absolute difference of normalized source order
double order_cost(const Element& gt, const Element& pred);

MatchSet assign(const ElementSet& gt, const ElementSet& pred,
                const CostWeights& w, const EquivTable& table);

}  // namespace cdm
