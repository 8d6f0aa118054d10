#include "cdm/matcher.hpp"

#include <algorithm>
#include <cmath>

#include "cdm/assignment.hpp"

namespace cdm {

double token_cost(const Element& gt, const Element& pred,
                  const EquivTable& table) {
    switch (equiv(gt.token, pred.token, table)) {
        case EquivRelation::Identical: return 0.0;
        case EquivRelation::RenderEquivalent: return 0.05;
        case EquivRelation::Different: return 1.0;
    }
    return 1.0;
}

double position_cost(const Element& gt, const Element& pred) {
    double sum = 0.0;
    for (int i = 0; i < 4; ++i)
        sum += std::abs(gt.norm_bbox[i] - pred.norm_bbox[i]);
    return sum / 4.0;
}

double order_cost(const Element& gt, const Element& pred) {
    return std::abs(gt.norm_order - pred.norm_order);
}

MatchSet assign(const ElementSet& gt, const ElementSet& pred,
                const CostWeights& w, const EquivTable& table) {
    MatchSet out;

    // canonical element order makes the result independent of input order
    std::vector<const Element*> g, p;
    for (const auto& e : gt.elements) g.push_back(&e);
    for (const auto& e : pred.elements) p.push_back(&e);
    auto by_order = [](const Element* a, const Element* b) {
        return a->token.order_index < b->token.order_index;
    };
    std::sort(g.begin(), g.end(), by_order);
    std::sort(p.begin(), p.end(), by_order);

    std::size_t ng = g.size(), np = p.size();
    if (ng == 0 || np == 0) {
        for (auto* e : g) out.unmatched_gt.push_back(*e);
        for (auto* e : p) out.unmatched_pred.push_back(*e);
        return out;
    }

    // rectangular case: pad to square with a cost above any real pair cost
    std::size_t n = std::max(ng, np);
    double pad = w.token + w.position + w.order + 1.0;
    std::vector<std::vector<double>> cost(n, std::vector<double>(n, pad));
    for (std::size_t i = 0; i < ng; ++i)
        for (std::size_t j = 0; j < np; ++j) {
            double lt = token_cost(*g[i], *p[j], table);
            double lp = position_cost(*g[i], *p[j]);
            double lo = order_cost(*g[i], *p[j]);
            cost[i][j] = w.token * lt + w.position * lp + w.order * lo;
        }

    auto solution = solve_assignment(cost);

    std::vector<bool> pred_used(np, false);
    for (std::size_t i = 0; i < ng; ++i) {
        int j = solution[i];
        if (j < 0 || static_cast<std::size_t>(j) >= np) {
            out.unmatched_gt.push_back(*g[i]);
            continue;
        }
        pred_used[j] = true;
        MatchPair pair;
        pair.gt = *g[i];
        pair.pred = *p[j];
        pair.parts.token = token_cost(pair.gt, pair.pred, table);
        pair.parts.position = position_cost(pair.gt, pair.pred);
        pair.parts.order = order_cost(pair.gt, pair.pred);
        pair.cost = w.token * pair.parts.token + w.position * pair.parts.position +
                    w.order * pair.parts.order;
        out.pairs.push_back(std::move(pair));
    }
    for (std::size_t j = 0; j < np; ++j)
        if (!pred_used[j]) out.unmatched_pred.push_back(*p[j]);
    return out;
}

}  // namespace cdm
