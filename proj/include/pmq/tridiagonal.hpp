#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

namespace pmq {

/// Symmetric storage is not assumed; lower[i] couples row i+1 to column i,
/// upper[i] couples row i to column i+1.
struct Tridiagonal {
    std::vector<double> lower; // size n-1
    std::vector<double> diag;  // size n
    std::vector<double> upper; // size n-1

    std::size_t size() const { return diag.size(); }

    double one_norm() const {
        const std::size_t n = size();
        double best = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double col = std::fabs(diag[j]);
            if (j > 0) col += std::fabs(upper[j - 1]);
            if (j + 1 < n) col += std::fabs(lower[j]);
            best = std::max(best, col);
        }
        return best;
    }
};

/// LU factorization of a tridiagonal matrix with partial pivoting
/// (LAPACK dgttrf layout: multipliers in dl, second superdiagonal du2).
class TridiagonalLU {
public:
    static std::optional<TridiagonalLU> factor(const Tridiagonal& a) {
        TridiagonalLU lu;
        const std::size_t n = a.size();
        lu.d_ = a.diag;
        lu.dl_ = a.lower;
        lu.du_ = a.upper;
        lu.du2_.assign(n > 2 ? n - 2 : 0, 0.0);
        lu.swap_.assign(n > 1 ? n - 1 : 0, false);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (std::fabs(lu.d_[i]) >= std::fabs(lu.dl_[i])) {
                if (lu.d_[i] == 0.0) return std::nullopt;
                const double fact = lu.dl_[i] / lu.d_[i];
                lu.dl_[i] = fact;
                lu.d_[i + 1] -= fact * lu.du_[i];
            } else {
                const double fact = lu.d_[i] / lu.dl_[i];
                lu.d_[i] = lu.dl_[i];
                lu.dl_[i] = fact;
                const double temp = lu.du_[i];
                lu.du_[i] = lu.d_[i + 1];
                lu.d_[i + 1] = temp - fact * lu.d_[i + 1];
                if (i + 2 < n) {
                    lu.du2_[i] = lu.du_[i + 1];
                    lu.du_[i + 1] = -fact * lu.du_[i + 1];
                }
                lu.swap_[i] = true;
            }
        }
        if (lu.d_[n - 1] == 0.0) return std::nullopt;
        return lu;
    }

    void solve_in_place(std::vector<double>& b) const {
        const std::size_t n = d_.size();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (!swap_[i]) {
                b[i + 1] -= dl_[i] * b[i];
            } else {
                const double temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - dl_[i] * b[i];
            }
        }
        b[n - 1] /= d_[n - 1];
        if (n > 1) b[n - 2] = (b[n - 2] - du_[n - 2] * b[n - 1]) / d_[n - 2];
        for (std::size_t ii = n; ii-- > 2;) {
            const std::size_t i = ii - 2;
            const double du2 = (i < du2_.size()) ? du2_[i] : 0.0;
            b[i] = (b[i] - du_[i] * b[i + 1] - du2 * b[i + 2]) / d_[i];
        }
    }

    /// Exact 1-norm of the inverse by solving against all unit vectors;
    /// O(n^2) which is cheap at quantizer sizes.
    double inverse_one_norm() const {
        const std::size_t n = d_.size();
        double best = 0.0;
        std::vector<double> col(n);
        for (std::size_t j = 0; j < n; ++j) {
            std::fill(col.begin(), col.end(), 0.0);
            col[j] = 1.0;
            solve_in_place(col);
            double sum = 0.0;
            for (double v : col) sum += std::fabs(v);
            if (!std::isfinite(sum)) return std::numeric_limits<double>::infinity();
            best = std::max(best, sum);
        }
        return best;
    }

private:
    std::vector<double> dl_, d_, du_, du2_;
    std::vector<bool> swap_;
};

/// Reciprocal condition estimate in the 1-norm; 0 when the factorization
/// breaks down.
inline double tridiagonal_rcond(const Tridiagonal& a) {
    const double na = a.one_norm();
    if (na == 0.0) return 0.0;
    auto lu = TridiagonalLU::factor(a);
    if (!lu) return 0.0;
    const double ni = lu->inverse_one_norm();
    if (!std::isfinite(ni) || ni == 0.0) return 0.0;
    return 1.0 / (na * ni);
}

} // namespace pmq
