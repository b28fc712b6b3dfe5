#include "softgrasp/nnls.hpp"

#include <limits>
#include <vector>

#include "softgrasp/errors.hpp"

namespace softgrasp {

namespace {

VecX solve_passive(const MatX& A, const VecX& b, const std::vector<char>& passive) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < A.cols(); ++j)
        if (passive[j]) cols.push_back(j);
    VecX z = VecX::Zero(A.cols());
    if (cols.empty()) return z;
    MatX Ap(A.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) Ap.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
    const VecX zp = Ap.completeOrthogonalDecomposition().solve(b);
    for (std::size_t k = 0; k < cols.size(); ++k) z[cols[k]] = zp[static_cast<Eigen::Index>(k)];
    return z;
}

}  // namespace

NnlsResult nnls(const MatX& A, const VecX& b, int max_iterations, double tolerance) {
    if (A.rows() != b.size()) throw InvalidArgument("nnls: A and b sizes differ");
    const Eigen::Index n = A.cols();
    if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 30);
    if (tolerance <= 0)
        tolerance = 10 * std::numeric_limits<double>::epsilon() * A.norm() * std::max<Eigen::Index>(A.rows(), n);

    NnlsResult r;
    r.x = VecX::Zero(n);
    std::vector<char> passive(static_cast<std::size_t>(n), 0);
    VecX w = A.transpose() * (b - A * r.x);

    while (r.iterations < max_iterations) {
        Eigen::Index j = -1;
        double wmax = tolerance;
        for (Eigen::Index k = 0; k < n; ++k)
            if (!passive[k] && w[k] > wmax) {
                wmax = w[k];
                j = k;
            }
        if (j < 0) {
            r.converged = true;
            break;
        }
        passive[j] = 1;
        ++r.iterations;

        // Inner loop: step back toward feasibility until the passive solution is positive.
        while (true) {
            VecX z = solve_passive(A, b, passive);
            bool positive = true;
            for (Eigen::Index k = 0; k < n; ++k)
                if (passive[k] && z[k] <= 0) positive = false;
            if (positive) {
                r.x = z;
                break;
            }
            double alpha = 1.0;
            Eigen::Index blocking = -1;
            for (Eigen::Index k = 0; k < n; ++k)
                if (passive[k] && z[k] <= 0) {
                    const double den = r.x[k] - z[k];
                    const double a = den > 0 ? r.x[k] / den : 0.0;
                    if (a < alpha || blocking < 0) {
                        alpha = a;
                        blocking = k;
                    }
                }
            r.x += alpha * (z - r.x);
            r.x[blocking] = 0;
            for (Eigen::Index k = 0; k < n; ++k)
                if (passive[k] && r.x[k] <= 0) {
                    passive[k] = 0;
                    r.x[k] = 0;
                }
            if (++r.iterations >= max_iterations) break;
        }
        w = A.transpose() * (b - A * r.x);
    }
    r.residual = (A * r.x - b).norm();
    return r;
}

}  // namespace softgrasp
