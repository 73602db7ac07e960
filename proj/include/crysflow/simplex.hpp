#pragma once

#include <vector>

namespace crysflow {

struct LpSolution {
    bool feasible = false;
    double objective = 0.0;
    std::vector<double> x;
};

/// minimize c·x  subject to  A x = b,  x >= 0.
///
/// Dense two-phase tableau simplex. Bland's rule (lowest index enters, lowest
/// basic index leaves on ties) keeps it cycle-free and deterministic; pivots
/// smaller than `pivot_tol` are never taken. The problem must be bounded,
/// which holds whenever each column of A sums to one.
LpSolution solve_lp(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                    const std::vector<double>& c, double pivot_tol = 1e-10);

}  // namespace crysflow
