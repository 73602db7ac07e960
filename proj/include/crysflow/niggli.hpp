#pragma once

#include <Eigen/Dense>

#include "crysflow/lattice.hpp"

namespace crysflow {

using IMat3 = Eigen::Matrix3i;

struct ReducedBasis {
    Mat3 basis;       // columns a, b, c
    IMat3 transform;  // basis = input * transform, det(transform) = +1
};

/// Křivý–Gruber reduction with an epsilon-guarded comparison at every branch
/// (eps_rel is scaled by V^(2/3)). Throws NoConvergence after max_iter steps.
ReducedBasis niggli_reduce_basis(const Mat3& basis, double eps_rel = 1e-5, int max_iter = 1000);

Lattice niggli_reduce(const Lattice& lattice);

/// Checks the Niggli main and special conditions on a basis.
bool is_niggli_reduced(const Mat3& basis, double eps_rel = 1e-5);

}  // namespace crysflow
