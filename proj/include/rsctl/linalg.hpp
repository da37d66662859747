#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace rsctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// One matrix per regime.
using RegimeMatrices = std::vector<Matrix>;
using RegimeVectors = std::vector<Vector>;

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Largest singular value.
inline double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

/// Smallest eigenvalue of the symmetric part.
inline double min_eigenvalue(const Matrix& m) {
    if (m.rows() == 1) return m(0, 0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline double max_abs_asymmetry(const Matrix& m) { return (m - m.transpose()).cwiseAbs().maxCoeff(); }

}  // namespace rsctl
