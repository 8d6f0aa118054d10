#pragma once

// shared helpers for building synthetic elements and running the stub
// pipeline inside tests

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cdm/localize.hpp"
#include "cdm/matcher.hpp"

namespace cdm::testing {

inline Element make_element(const std::string& text, int order_index,
                            int seq_len, std::array<double, 4> nb) {
    Element e;
    e.token.text = text;
    e.token.kind = text.size() > 1 && text[0] == '\\' ? TokenKind::Command
                                                      : TokenKind::Char;
    e.token.order_index = order_index;
    e.norm_bbox = nb;
    e.norm_order = static_cast<double>(order_index) / std::max(1, seq_len - 1);
    e.bbox = {static_cast<int>(nb[0] * 100), static_cast<int>(nb[1] * 100),
              static_cast<int>(nb[2] * 100), static_cast<int>(nb[3] * 100)};
    return e;
}

inline ElementSet stub_elements(const std::string& formula) {
    static Palette palette;
    auto seq = tokenize(formula);
    auto src = assign_colors(seq, palette);
    auto img = stub_render(src, RenderConfig{});
    return localize(img, src);
}

// Exhaustive minimum over all injections of the smaller set into the
// larger. Walks ground truth in ascending order and accumulates pair costs
// in that same order, so an equal-cost assignment sums bit-identically to
// the implementation's total.
inline double brute_force_cost(const ElementSet& gt, const ElementSet& pred,
                               const CostWeights& w, const EquivTable& table) {
    std::size_t ng = gt.elements.size(), np = pred.elements.size();
    std::size_t need = std::min(ng, np);
    if (need == 0) return 0.0;

    double best = std::numeric_limits<double>::infinity();
    std::vector<bool> used(np, false);

    std::function<void(std::size_t, std::size_t, double)> rec =
        [&](std::size_t i, std::size_t paired, double acc) {
            if (i == ng) {
                if (paired == need && acc < best) best = acc;
                return;
            }
            std::size_t remaining = ng - i;
            if (need - paired > remaining) return;
            if (paired < need) {
                for (std::size_t j = 0; j < np; ++j) {
                    if (used[j]) continue;
                    const Element& a = gt.elements[i];
                    const Element& b = pred.elements[j];
                    double c = w.token * token_cost(a, b, table) +
                               w.position * position_cost(a, b) +
                               w.order * order_cost(a, b);
                    used[j] = true;
                    rec(i + 1, paired + 1, acc + c);
                    used[j] = false;
                }
            }
            if (remaining > need - paired) rec(i + 1, paired, acc);
        };
    rec(0, 0, 0.0);
    return best;
}

inline double total_cost(const MatchSet& m) {
    double sum = 0.0;
    for (const auto& p : m.pairs) sum += p.cost;
    return sum;
}

}  // namespace cdm::testing
