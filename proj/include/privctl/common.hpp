#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace privctl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Error hierarchy
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DimensionError : public Error {
  public:
    using Error::Error;
};

class InvalidInputError : public Error {
  public:
    using Error::Error;
};

// Raised when an operation requires a Schur-stable matrix and gets one that
// is not.
class StabilityError : public Error {
  public:
    using Error::Error;
};

// Raised when a synthesis builder is asked to handle a plant outside its
// stability class (e.g. general-estimator design on an unstable plant).
class VariantMismatchError : public Error {
  public:
    using Error::Error;
};

class RecoverySingularError : public Error {
  public:
    explicit RecoverySingularError(const std::string& what, double cond)
        : Error(what), condition_number(cond) {}
    double condition_number;
};

class DivergenceError : public Error {
  public:
    using Error::Error;
};

class NoValidEpsilonError : public Error {
  public:
    using Error::Error;
};

class CalibrationInfeasibleError : public Error {
  public:
    using Error::Error;
};

class InfeasibleError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidInputError(msg);
}

inline void require_dims(bool cond, const std::string& msg) {
    if (!cond) throw DimensionError(msg);
}

// ---------------------------------------------------------------------------
// Small dense-matrix helpers
// ---------------------------------------------------------------------------

inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline bool is_symmetric(const Mat& m, double tol = 1e-10) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.norm());
    return (m - m.transpose()).norm() <= tol * scale;
}

inline Mat symmetrized(const Mat& m) { return 0.5 * (m + m.transpose()); }

// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Mat& m) {
    if (m.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const Mat& m) {
    if (m.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

inline bool is_psd(const Mat& m, double tol = 1e-10) {
    if (!is_symmetric(m, 1e-8)) return false;
    return min_eigenvalue(m) >= -tol * std::max(1.0, m.norm());
}

inline bool is_pd(const Mat& m, double tol = 1e-12) {
    if (!is_symmetric(m, 1e-8)) return false;
    return min_eigenvalue(m) > tol;
}

inline double spectral_radius(const Mat& a) {
    require_dims(a.rows() == a.cols(), "spectral_radius: matrix must be square");
    if (a.rows() == 0) return 0.0;
    Eigen::EigenSolver<Mat> es(a, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// 2-norm condition number via SVD.
inline double condition_number(const Mat& m) {
    if (m.rows() == 0 || m.cols() == 0) return 1.0;
    Eigen::JacobiSVD<Mat> svd(m);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

inline Mat blkdiag(const std::vector<Mat>& blocks) {
    Eigen::Index rows = 0, cols = 0;
    for (const Mat& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    Mat out = Mat::Zero(rows, cols);
    Eigen::Index r = 0, c = 0;
    for (const Mat& b : blocks) {
        out.block(r, c, b.rows(), b.cols()) = b;
        r += b.rows();
        c += b.cols();
    }
    return out;
}

}  // namespace privctl
