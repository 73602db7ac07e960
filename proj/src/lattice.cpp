#include "crysflow/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "crysflow/error.hpp"

namespace crysflow {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double gram_determinant(double ca, double cb, double cg) {
    return 1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg;
}

}  // namespace

Lattice Lattice::from_matrix(const Mat3& basis) {
    const Vec3 va = basis.col(0);
    const Vec3 vb = basis.col(1);
    const Vec3 vc = basis.col(2);
    auto angle = [](const Vec3& u, const Vec3& v) {
        double cosine = u.dot(v) / (u.norm() * v.norm());
        return std::acos(std::clamp(cosine, -1.0, 1.0)) / kDeg;
    };
    return {va.norm(), vb.norm(), vc.norm(), angle(vb, vc), angle(va, vc), angle(va, vb)};
}

Mat3 Lattice::matrix() const {
    const double ca = std::cos(alpha * kDeg);
    const double cb = std::cos(beta * kDeg);
    const double cg = std::cos(gamma * kDeg);
    const double sg = std::sin(gamma * kDeg);
    const double cx = c * cb;
    const double cy = c * (ca - cb * cg) / sg;
    const double cz = std::sqrt(std::max(0.0, c * c - cx * cx - cy * cy));
    Mat3 m;
    m << a, b * cg, cx,
         0.0, b * sg, cy,
         0.0, 0.0, cz;
    return m;
}

double Lattice::volume() const {
    const double g = gram_determinant(std::cos(alpha * kDeg), std::cos(beta * kDeg), std::cos(gamma * kDeg));
    return a * b * c * std::sqrt(std::max(0.0, g));
}

void Lattice::validate() const {
    for (double len : {a, b, c}) {
        if (!(len > 0.0) || !std::isfinite(len))
            throw Error(ErrorCode::InvalidStructure, "cell length must be positive, got " + std::to_string(len));
    }
    for (double ang : {alpha, beta, gamma}) {
        if (!(ang > 0.0 && ang < 180.0))
            throw Error(ErrorCode::InvalidStructure, "cell angle must lie in (0, 180), got " + std::to_string(ang));
    }
    const double g = gram_determinant(std::cos(alpha * kDeg), std::cos(beta * kDeg), std::cos(gamma * kDeg));
    if (!(g > 0.0)) throw Error(ErrorCode::InvalidStructure, "cell angles do not describe a positive volume");
}

double periodic_delta(double x) noexcept {
    return x - std::floor(x + 0.5);
}

double wrap_unit(double x) noexcept {
    double w = x - std::floor(x);
    if (w >= 1.0) w = 0.0;
    return w;
}

}  // namespace crysflow
