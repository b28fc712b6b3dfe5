#pragma once

#include "softgrasp/types.hpp"

namespace softgrasp {

struct NnlsResult {
    VecX x;
    double residual = 0.0;  // ||A x - b||
    int iterations = 0;
    bool converged = false;
};

/// min ||A x - b|| subject to x >= 0 (Lawson-Hanson active set).
NnlsResult nnls(const MatX& A, const VecX& b, int max_iterations = 0, double tolerance = 0.0);

}  // namespace softgrasp
