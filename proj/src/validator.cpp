#include "cdm/validator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cdm/errors.hpp"

namespace cdm {

namespace {

constexpr double kSpreadEps = 1e-18;

struct AxisFit {
    double s = 1.0, t = 0.0;
    bool degenerate = false;
};

// symmetric least squares on (g, p) point pairs: s = sigma_p / sigma_g,
// t = mean_p - s * mean_g
AxisFit fit_axis(const std::vector<double>& g, const std::vector<double>& p) {
    double n = static_cast<double>(g.size());
    double mg = std::accumulate(g.begin(), g.end(), 0.0) / n;
    double mp = std::accumulate(p.begin(), p.end(), 0.0) / n;
    double vg = 0.0, vp = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        vg += (g[i] - mg) * (g[i] - mg);
        vp += (p[i] - mp) * (p[i] - mp);
    }
    AxisFit fit;
    if (vg <= kSpreadEps || vp <= kSpreadEps) {
        fit.degenerate = true;
        fit.s = 1.0;
        fit.t = mp - mg;
        return fit;
    }
    fit.s = std::sqrt(vp / vg);
    fit.t = mp - fit.s * mg;
    return fit;
}

int exhaustive_limit() { return 12; }  // <= C(12,2) samples enumerated fully

std::vector<std::pair<int, int>> candidate_samples(int n, int iterations,
                                                   std::uint32_t seed,
                                                   int round) {
    std::vector<std::pair<int, int>> out;
    if (n <= exhaustive_limit()) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) out.emplace_back(i, j);
        return out;
    }
    std::mt19937 rng(seed + 0x9E3779B9u * static_cast<std::uint32_t>(round + 1));
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int k = 0; k < iterations; ++k) {
        int i = pick(rng), j = pick(rng);
        if (i == j) continue;
        out.emplace_back(std::min(i, j), std::max(i, j));
    }
    return out;
}

}  // namespace

MatchSet token_filter(const MatchSet& m, const EquivTable& table) {
    MatchSet out;
    out.unmatched_gt = m.unmatched_gt;
    out.unmatched_pred = m.unmatched_pred;
    for (const auto& pair : m.pairs) {
        if (equiv(pair.gt.token, pair.pred.token, table) ==
            EquivRelation::Different) {
            out.unmatched_gt.push_back(pair.gt);
            out.unmatched_pred.push_back(pair.pred);
        } else {
            out.pairs.push_back(pair);
        }
    }
    return out;
}

AffineTS fit_ts(const std::vector<MatchPair>& sample) {
    std::vector<double> gx, gy, px, py;
    for (const auto& pair : sample) {
        gx.push_back(pair.gt.norm_bbox[0]);
        gx.push_back(pair.gt.norm_bbox[2]);
        gy.push_back(pair.gt.norm_bbox[1]);
        gy.push_back(pair.gt.norm_bbox[3]);
        px.push_back(pair.pred.norm_bbox[0]);
        px.push_back(pair.pred.norm_bbox[2]);
        py.push_back(pair.pred.norm_bbox[1]);
        py.push_back(pair.pred.norm_bbox[3]);
    }
    if (gx.empty()) throw DegenerateSample("empty sample");

    AxisFit fx = fit_axis(gx, px);
    AxisFit fy = fit_axis(gy, py);
    if (fx.degenerate && fy.degenerate) {
        // only acceptable for the pure-translation fallback when the caller
        // knows what it is doing; a spreadless sample on both axes carries
        // no scale information at all
        bool all_same_x = true, all_same_y = true;
        for (double v : gx) all_same_x &= (v == gx.front());
        for (double v : gy) all_same_y &= (v == gy.front());
        if (all_same_x && all_same_y)
            throw DegenerateSample("all ground-truth coordinates identical");
    }
    return {fx.s, fy.s, fx.t, fy.t};
}

double transform_residual(const MatchPair& pair, const AffineTS& model) {
    double rx1 = model.sx * pair.gt.norm_bbox[0] + model.tx - pair.pred.norm_bbox[0];
    double rx2 = model.sx * pair.gt.norm_bbox[2] + model.tx - pair.pred.norm_bbox[2];
    double ry1 = model.sy * pair.gt.norm_bbox[1] + model.ty - pair.pred.norm_bbox[1];
    double ry2 = model.sy * pair.gt.norm_bbox[3] + model.ty - pair.pred.norm_bbox[3];
    // the larger of the forward and backward views of each axis: identical
    // when measured from either side and never diluted by a large scale
    double nx = std::max(1.0, 1.0 / model.sx);
    double ny = std::max(1.0, 1.0 / model.sy);
    return (std::abs(rx1) * nx + std::abs(rx2) * nx + std::abs(ry1) * ny +
            std::abs(ry2) * ny) /
           4.0;
}

MatchSet ransac_filter(const MatchSet& m, const RansacParams& params) {
    MatchSet out;
    out.unmatched_gt = m.unmatched_gt;
    out.unmatched_pred = m.unmatched_pred;

    int n = static_cast<int>(m.pairs.size());
    if (n == 0) return out;

    if (n == 1) {
        // a lone pair is verified against identity scale + mean offset
        AffineTS model;
        model.tx = ((m.pairs[0].pred.norm_bbox[0] - m.pairs[0].gt.norm_bbox[0]) +
                    (m.pairs[0].pred.norm_bbox[2] - m.pairs[0].gt.norm_bbox[2])) /
                   2.0;
        model.ty = ((m.pairs[0].pred.norm_bbox[1] - m.pairs[0].gt.norm_bbox[1]) +
                    (m.pairs[0].pred.norm_bbox[3] - m.pairs[0].gt.norm_bbox[3])) /
                   2.0;
        if (transform_residual(m.pairs[0], model) <= params.inlier_tol) {
            out.pairs.push_back(m.pairs[0]);
        } else {
            out.unmatched_gt.push_back(m.pairs[0].gt);
            out.unmatched_pred.push_back(m.pairs[0].pred);
        }
        return out;
    }

    if (n < params.min_inliers) {
        // too small to support any model: leave untouched
        out.pairs = m.pairs;
        return out;
    }

    std::vector<int> work(n);
    std::iota(work.begin(), work.end(), 0);
    std::vector<bool> kept(n, false);

    for (int round = 0; round < params.max_rounds && !work.empty(); ++round) {
        int wn = static_cast<int>(work.size());
        if (wn < params.min_inliers) break;

        auto samples = candidate_samples(wn, params.iterations, params.seed, round);

        // model selection by truncated loss (MSAC): residuals above the
        // tolerance contribute the tolerance itself, so a model fitting a
        // group exactly always beats one spreading near-threshold error
        // over everything
        std::vector<int> best_inliers;
        double best_loss = std::numeric_limits<double>::infinity();
        for (const auto& [a, b] : samples) {
            std::vector<MatchPair> sample = {m.pairs[work[a]], m.pairs[work[b]]};
            AffineTS model;
            try {
                model = fit_ts(sample);
            } catch (const DegenerateSample&) {
                continue;
            }
            std::vector<int> inliers;
            double loss = 0.0;
            for (int idx : work) {
                double r = transform_residual(m.pairs[idx], model);
                if (r <= params.inlier_tol) {
                    inliers.push_back(idx);
                    loss += r;
                } else {
                    loss += params.inlier_tol;
                }
            }
            if (loss < best_loss) {
                best_loss = loss;
                best_inliers = std::move(inliers);
            }
        }

        if (static_cast<int>(best_inliers.size()) < params.min_inliers) break;

        for (int idx : best_inliers) kept[idx] = true;
        std::vector<int> rest;
        for (int idx : work)
            if (!kept[idx]) rest.push_back(idx);
        work = std::move(rest);
    }

    for (int i = 0; i < n; ++i) {
        if (kept[i]) {
            out.pairs.push_back(m.pairs[i]);
        } else {
            out.unmatched_gt.push_back(m.pairs[i].gt);
            out.unmatched_pred.push_back(m.pairs[i].pred);
        }
    }
    return out;
}

}  // namespace cdm
