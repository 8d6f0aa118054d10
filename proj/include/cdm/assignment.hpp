#pragma once

#include <vector>

namespace cdm {

// Minimum-cost perfect matching on a square cost matrix (Jonker-Volgenant
// shortest augmenting path, O(n^3)). Returns assignment[row] = column.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

}  // namespace cdm
