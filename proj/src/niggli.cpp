#include "crysflow/niggli.hpp"

#include <array>
#include <cmath>

#include "crysflow/error.hpp"

namespace crysflow {

namespace {

struct Metric {
    double A, B, C, xi, eta, zeta;
};

Metric metric_of(const Mat3& m) {
    const Vec3 a = m.col(0), b = m.col(1), c = m.col(2);
    return {a.dot(a), b.dot(b), c.dot(c), 2.0 * b.dot(c), 2.0 * a.dot(c), 2.0 * a.dot(b)};
}

int sign_class(double x, double eps) { return x > eps ? 1 : (x < -eps ? -1 : 0); }

double sgn(double x) { return x >= 0.0 ? 1.0 : -1.0; }

double eps_for(const Mat3& m, double eps_rel) {
    return eps_rel * std::pow(std::abs(m.determinant()), 2.0 / 3.0);
}

// The four proper sign flips of (a, b, c).
constexpr std::array<std::array<int, 3>, 4> kProperFlips = {{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}}};

}  // namespace

ReducedBasis niggli_reduce_basis(const Mat3& input, double eps_rel, int max_iter) {
    Mat3 basis = input;
    IMat3 total = IMat3::Identity();
    const double eps = eps_for(input, eps_rel);

    auto apply = [&](const IMat3& step) {
        basis = basis * step.cast<double>();
        total = total * step;
    };

    for (int iter = 0;; ++iter) {
        if (iter >= max_iter) throw Error(ErrorCode::NoConvergence, "Niggli reduction did not converge");
        Metric p = metric_of(basis);

        // 1: order A <= B
        if (p.A > p.B + eps || (std::abs(p.A - p.B) <= eps && std::abs(p.xi) > std::abs(p.eta) + eps)) {
            IMat3 m;
            m << 0, -1, 0, -1, 0, 0, 0, 0, -1;
            apply(m);
            p = metric_of(basis);
        }
        // 2: order B <= C
        if (p.B > p.C + eps || (std::abs(p.B - p.C) <= eps && std::abs(p.eta) > std::abs(p.zeta) + eps)) {
            IMat3 m;
            m << -1, 0, 0, 0, 0, -1, 0, -1, 0;
            apply(m);
            continue;
        }
        // 3/4: all-acute or all-nonacute
        {
            const int l = sign_class(p.xi, eps), mm = sign_class(p.eta, eps), n = sign_class(p.zeta, eps);
            const bool want_positive = l * mm * n == 1;
            for (const auto& f : kProperFlips) {
                const int nl = l * f[1] * f[2], nm = mm * f[0] * f[2], nn = n * f[0] * f[1];
                const bool ok = want_positive ? (nl == 1 && nm == 1 && nn == 1) : (nl <= 0 && nm <= 0 && nn <= 0);
                if (ok) {
                    if (f[0] != 1 || f[1] != 1 || f[2] != 1) {
                        IMat3 m = IMat3::Zero();
                        m(0, 0) = f[0];
                        m(1, 1) = f[1];
                        m(2, 2) = f[2];
                        apply(m);
                        p = metric_of(basis);
                    }
                    break;
                }
            }
        }
        // 5: reduce b.c
        if (std::abs(p.xi) > p.B + eps || (std::abs(p.xi - p.B) <= eps && 2.0 * p.eta < p.zeta - eps) ||
            (std::abs(p.xi + p.B) <= eps && p.zeta < -eps)) {
            IMat3 m = IMat3::Identity();
            m(1, 2) = -static_cast<int>(sgn(p.xi));
            apply(m);
            continue;
        }
        // 6: reduce a.c
        if (std::abs(p.eta) > p.A + eps || (std::abs(p.eta - p.A) <= eps && 2.0 * p.xi < p.zeta - eps) ||
            (std::abs(p.eta + p.A) <= eps && p.zeta < -eps)) {
            IMat3 m = IMat3::Identity();
            m(0, 2) = -static_cast<int>(sgn(p.eta));
            apply(m);
            continue;
        }
        // 7: reduce a.b
        if (std::abs(p.zeta) > p.A + eps || (std::abs(p.zeta - p.A) <= eps && 2.0 * p.xi < p.eta - eps) ||
            (std::abs(p.zeta + p.A) <= eps && p.eta < -eps)) {
            IMat3 m = IMat3::Identity();
            m(0, 1) = -static_cast<int>(sgn(p.zeta));
            apply(m);
            continue;
        }
        // 8: body diagonal
        const double s = p.xi + p.eta + p.zeta + p.A + p.B;
        if (s < -eps || (std::abs(s) <= eps && 2.0 * (p.A + p.eta) + p.zeta > eps)) {
            IMat3 m = IMat3::Identity();
            m(0, 2) = 1;
            m(1, 2) = 1;
            apply(m);
            continue;
        }
        break;
    }
    return {basis, total};
}

Lattice niggli_reduce(const Lattice& lattice) {
    lattice.validate();
    return Lattice::from_matrix(niggli_reduce_basis(lattice.matrix()).basis);
}

bool is_niggli_reduced(const Mat3& basis, double eps_rel) {
    const double eps = eps_for(basis, eps_rel);
    const Metric p = metric_of(basis);
    if (p.A > p.B + eps || p.B > p.C + eps) return false;
    if (std::abs(p.xi) > p.B + eps || std::abs(p.eta) > p.A + eps || std::abs(p.zeta) > p.A + eps) return false;
    const int l = sign_class(p.xi, eps), m = sign_class(p.eta, eps), n = sign_class(p.zeta, eps);
    const bool all_pos = l == 1 && m == 1 && n == 1;
    const bool all_nonpos = l <= 0 && m <= 0 && n <= 0;
    if (!all_pos && !all_nonpos) return false;
    if (all_nonpos && p.xi + p.eta + p.zeta + p.A + p.B < -eps) return false;
    return true;
}

}  // namespace crysflow
