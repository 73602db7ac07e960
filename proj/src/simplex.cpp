#include "crysflow/simplex.hpp"

#include <cmath>
#include <limits>

namespace crysflow {

namespace {

class Tableau {
public:
    Tableau(const std::vector<std::vector<double>>& A, const std::vector<double>& b, double tol)
        : rows_(A.size()), vars_(A.empty() ? 0 : A.front().size()), tol_(tol) {
        cols_ = vars_ + rows_;  // structural + artificial
        t_.assign(rows_, std::vector<double>(cols_ + 1, 0.0));
        basis_.resize(rows_);
        for (std::size_t r = 0; r < rows_; ++r) {
            const double sign = b[r] < 0.0 ? -1.0 : 1.0;
            for (std::size_t j = 0; j < vars_; ++j) t_[r][j] = sign * A[r][j];
            t_[r][vars_ + r] = 1.0;
            t_[r][cols_] = sign * b[r];
            basis_[r] = vars_ + r;
        }
    }

    // Runs simplex iterations for `cost` restricted to columns < limit.
    bool optimize(const std::vector<double>& cost, std::size_t limit) {
        for (int guard = 0; guard < 100000; ++guard) {
            std::size_t enter = limit;
            for (std::size_t j = 0; j < limit; ++j) {
                if (is_basic(j)) continue;
                if (reduced_cost(cost, j) < -tol_) {
                    enter = j;
                    break;
                }
            }
            if (enter == limit) return true;
            std::size_t leave = rows_;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < rows_; ++r) {
                if (t_[r][enter] <= tol_) continue;
                const double ratio = t_[r][cols_] / t_[r][enter];
                if (ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && basis_[r] < basis_[leave])) {
                    best = ratio;
                    leave = r;
                }
            }
            if (leave == rows_) return false;  // unbounded
            pivot(leave, enter);
        }
        return false;
    }

    // Drives zero-level artificials out of the basis where possible.
    void expel_artificials() {
        for (std::size_t r = 0; r < rows_; ++r) {
            if (basis_[r] < vars_) continue;
            for (std::size_t j = 0; j < vars_; ++j) {
                if (!is_basic(j) && std::abs(t_[r][j]) > tol_) {
                    pivot(r, j);
                    break;
                }
            }
        }
    }

    [[nodiscard]] double value(const std::vector<double>& cost) const {
        double v = 0.0;
        for (std::size_t r = 0; r < rows_; ++r) v += cost[basis_[r]] * t_[r][cols_];
        return v;
    }

    [[nodiscard]] std::vector<double> solution() const {
        std::vector<double> x(vars_, 0.0);
        for (std::size_t r = 0; r < rows_; ++r)
            if (basis_[r] < vars_) x[basis_[r]] = std::max(0.0, t_[r][cols_]);
        return x;
    }

    [[nodiscard]] std::size_t vars() const noexcept { return vars_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

private:
    bool is_basic(std::size_t j) const {
        for (auto b : basis_)
            if (b == j) return true;
        return false;
    }

    double reduced_cost(const std::vector<double>& cost, std::size_t j) const {
        double z = cost[j];
        for (std::size_t r = 0; r < rows_; ++r) z -= cost[basis_[r]] * t_[r][j];
        return z;
    }

    void pivot(std::size_t row, std::size_t col) {
        const double p = t_[row][col];
        for (auto& v : t_[row]) v /= p;
        for (std::size_t r = 0; r < rows_; ++r) {
            if (r == row) continue;
            const double f = t_[r][col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= cols_; ++j) t_[r][j] -= f * t_[row][j];
        }
        basis_[row] = col;
    }

    std::size_t rows_, vars_, cols_ = 0;
    double tol_;
    std::vector<std::vector<double>> t_;
    std::vector<std::size_t> basis_;
};

}  // namespace

LpSolution solve_lp(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                    const std::vector<double>& c, double pivot_tol) {
    LpSolution out;
    Tableau tab(A, b, pivot_tol);
    const std::size_t n = tab.vars();

    std::vector<double> phase1(tab.cols(), 0.0);
    for (std::size_t j = n; j < tab.cols(); ++j) phase1[j] = 1.0;
    tab.optimize(phase1, tab.cols());
    if (tab.value(phase1) > 1e-9) return out;
    tab.expel_artificials();

    std::vector<double> phase2(tab.cols(), 0.0);
    for (std::size_t j = 0; j < n; ++j) phase2[j] = c[j];
    if (!tab.optimize(phase2, n)) return out;

    out.feasible = true;
    out.x = tab.solution();
    out.objective = 0.0;
    for (std::size_t j = 0; j < n; ++j) out.objective += c[j] * out.x[j];
    return out;
}

}  // namespace crysflow
