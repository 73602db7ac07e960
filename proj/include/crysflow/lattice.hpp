#pragma once

#include <Eigen/Dense>
#include <array>

namespace crysflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Cell parameters in Å and degrees.
struct Lattice {
    double a = 1.0;
    double b = 1.0;
    double c = 1.0;
    double alpha = 90.0;
    double beta = 90.0;
    double gamma = 90.0;

    static Lattice cubic(double length) { return {length, length, length, 90.0, 90.0, 90.0}; }

    /// Builds parameters from a matrix whose columns are the basis vectors.
    static Lattice from_matrix(const Mat3& basis);

    /// Columns are the a, b, c vectors in the standard orientation
    /// (a along x, b in the xy plane).
    [[nodiscard]] Mat3 matrix() const;

    /// Gram-determinant volume. Only meaningful for valid parameters.
    [[nodiscard]] double volume() const;

    /// Throws InvalidStructure when a parameter violates the Lattice invariants.
    void validate() const;

    [[nodiscard]] std::array<double, 6> params() const { return {a, b, c, alpha, beta, gamma}; }
};

/// Smallest |x - round(x)|-style periodic difference, returned in [-0.5, 0.5).
double periodic_delta(double x) noexcept;

/// Wraps into [0, 1).
double wrap_unit(double x) noexcept;

}  // namespace crysflow
