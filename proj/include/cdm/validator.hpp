#pragma once

// Invalid-match elimination: drop pairs whose tokens differ, then verify
// the surviving pairs against per-axis translation+scale transforms fitted
// by RANSAC. Multiple rounds let separately displaced groups (line breaks)
// each find their own transform; pairs conforming to no accepted transform
// are eliminated.

#include <cstdint>

#include "cdm/matcher.hpp"

namespace cdm {

struct AffineTS {
    double sx = 1.0, sy = 1.0;  // scales, always > 0
    double tx = 0.0, ty = 0.0;  // translations in normalized units
};

struct RansacParams {
    double inlier_tol = 0.05;  // max mean |residual| on normalized coords
    int min_inliers = 2;
    int iterations = 200;  // random samples per round (beyond the
                           // exhaustive-enumeration size)
    int max_rounds = 4;
    std::uint32_t seed = 0;
};

// move pairs with Different tokens to the unmatched lists
MatchSet token_filter(const MatchSet& m, const EquivTable& table);

// Fit x' = sx*x + tx and y' = sy*y + ty over the bbox corner coordinates
// of the sample. The fit is the symmetric (geometric-mean) least-squares
// variant, so fitting pred->gt yields the exact inverse transform; on
// noiseless data it coincides with ordinary least squares. An axis with no
// spread falls back to scale 1 and mean-offset translation. Throws
// DegenerateSample when both axes are spreadless.
AffineTS fit_ts(const std::vector<MatchPair>& sample);

// mean |A(gt) - pred| over the 4 bbox coordinates, each axis taken as the
// larger of the forward and inverse-transform views so the value is
// identical when measured from either side
double transform_residual(const MatchPair& pair, const AffineTS& model);

MatchSet ransac_filter(const MatchSet& m, const RansacParams& params);

}  // namespace cdm
