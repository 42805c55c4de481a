#pragma once

// Differential-privacy calculus for Gaussian output perturbation:
// Gaussian tail / inverse tail, the kappa(delta, epsilon) multiplier,
// mechanism calibration, H-infinity sensitivity of stable LTI maps, the
// steady-state Kalman error recursion, and the largest privacy loss
// consistent with a prescribed estimation-error floor.

#include <algorithm>
#include <complex>

#include "privctl/lti.hpp"
#include "privctl/solve.hpp"

namespace privctl {

// epsilon: privacy loss; delta: slack; beta: adjacency radius in l2.
struct PrivacyParams {
    double epsilon = 1.0;
    double delta = 0.05;
    double beta = 1.0;

    void validate() const {
        require(std::isfinite(epsilon) && epsilon > 0.0, "PrivacyParams: epsilon must be > 0");
        require(std::isfinite(delta) && delta > 0.0 && delta < 0.5,
                "PrivacyParams: delta must lie in (0, 1/2)");
        require(std::isfinite(beta) && beta > 0.0, "PrivacyParams: beta must be > 0");
    }
};

struct CalibrationResult {
    double sigma = 0.0;
    double kappa = 0.0;
    double K_delta = 0.0;
};

// ---------------------------------------------------------------------------
// Gaussian tail
// ---------------------------------------------------------------------------

// Q(x) = P[N(0,1) > x].
inline double gaussian_tail(double x) {
    require(std::isfinite(x), "gaussian_tail: x must be finite");
    return 0.5 * std::erfc(x / std::sqrt(2.0));
}

// Q^-1(delta): rational initial guess (Acklam's inverse-normal approximation)
// polished by Halley steps on the tail integral itself.
inline double gaussian_tail_inverse(double delta) {
    require(std::isfinite(delta) && delta > 0.0 && delta < 1.0,
            "gaussian_tail_inverse: delta must lie in (0, 1)");

    // Acklam coefficients for the inverse standard normal CDF at p = 1 - delta.
    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};

    const double p = 1.0 - delta;  // Phi(x) = p
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley polish of Q(x) - delta = 0; Q' = -phi, Q'' = x phi.
    for (int it = 0; it < 4; ++it) {
        const double err = gaussian_tail(x) - delta;
        const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
        if (phi <= 0.0) break;
        const double newton = err / phi;  // note Q' = -phi, so step adds
        x = x + newton / (1.0 - 0.5 * x * newton);
        if (std::abs(err) <= 1e-16 * std::max(delta, 1e-300)) break;
    }
    return x;
}

// ---------------------------------------------------------------------------
// Mechanism calibration
// ---------------------------------------------------------------------------

// kappa(delta, epsilon) = (K_delta + sqrt(K_delta^2 + 2 epsilon)) / (2 epsilon).
inline CalibrationResult kappa_full(double delta, double epsilon) {
    require(std::isfinite(epsilon) && epsilon > 0.0, "kappa: epsilon must be > 0");
    require(std::isfinite(delta) && delta > 0.0 && delta <= 0.5,
            "kappa: delta must lie in (0, 1/2]");
    CalibrationResult r;
    r.K_delta = (delta == 0.5) ? 0.0 : gaussian_tail_inverse(delta);
    r.kappa = (r.K_delta + std::sqrt(r.K_delta * r.K_delta + 2.0 * epsilon)) / (2.0 * epsilon);
    return r;
}

inline double kappa(double delta, double epsilon) { return kappa_full(delta, epsilon).kappa; }

// sigma = sensitivity * beta * kappa(delta, epsilon): the smallest Gaussian
// scale making the trajectory mechanism (epsilon, delta)-private for
// l2-adjacency radius beta.
inline CalibrationResult calibrate_mechanism(double sensitivity, double beta, double delta,
                                             double epsilon) {
    require(std::isfinite(sensitivity) && sensitivity >= 0.0,
            "calibrate_mechanism: sensitivity must be nonnegative");
    require(std::isfinite(beta) && beta > 0.0, "calibrate_mechanism: beta must be > 0");
    CalibrationResult r = kappa_full(delta, epsilon);
    r.sigma = sensitivity * beta * r.kappa;
    return r;
}

// Adjacency predicate for finite trajectory pairs (columns are time steps).
inline bool adjacent(const Mat& u1, const Mat& u2, double beta) {
    require_dims(u1.rows() == u2.rows() && u1.cols() == u2.cols(),
                 "adjacent: trajectories must have equal shapes");
    require(std::isfinite(beta) && beta > 0.0, "adjacent: beta must be > 0");
    return (u1 - u2).norm() <= beta;
}

// ---------------------------------------------------------------------------
// H-infinity norm via bounded-real bisection
// ---------------------------------------------------------------------------

namespace detail {

// Feasibility of the discrete bounded-real inequality at level gamma:
// exists P > 0 with [[P - A'PA, -A'PB, -C'], [., gI - B'PB, -D'], [., ., gI]] > 0.
inline bool bounded_real_feasible(const Mat& A, const Mat& B, const Mat& C, const Mat& D,
                                  double gamma) {
    const Eigen::Index nx = A.rows(), nu = B.cols(), ny = C.rows();
    LmiProblem p;
    const int P = p.add_variable("P", nx, nx, VarStructure::symmetric);
    GridConstraint g({nx, nu, ny}, "bounded-real");
    g.set(0, 0, p.var(P) + (-1.0) * (A.transpose() * p.var(P) * A));
    g.set(0, 1, (-1.0) * (A.transpose() * p.var(P) * B));
    g.set(0, 2, LmiProblem::constant((-C.transpose()).eval()));
    g.set(1, 1, LmiProblem::constant((gamma * Mat::Identity(nu, nu)).eval()) +
                    (-1.0) * (B.transpose() * p.var(P) * B));
    g.set(1, 2, LmiProblem::constant((-D.transpose()).eval()));
    g.set(2, 2, LmiProblem::constant((gamma * Mat::Identity(ny, ny)).eval()));
    p.add_constraint(std::move(g));
    GridConstraint pos({nx}, "P-positivity");
    pos.set(0, 0, p.var(P));
    p.add_constraint(std::move(pos));

    SolveOptions opts;
    opts.backend = "ipm";
    return solve(p, opts).status == SolveStatus::optimal;
}

}  // namespace detail

// Peak magnitude of G(z) = C (zI - A)^-1 B + D over the unit circle, by
// bisection on the bounded-real LMI to 1e-4 relative.
inline double hinf_norm(const Mat& A, const Mat& B, const Mat& C, const Mat& D) {
    const Eigen::Index nx = A.rows(), nu = B.cols(), ny = C.rows();
    require_dims(A.cols() == nx && B.rows() == nx && C.cols() == nx && D.rows() == ny &&
                     D.cols() == nu,
                 "hinf_norm: inconsistent state-space dimensions");
    if (nu == 0 || ny == 0) return 0.0;
    const double static_gain = (D.size() == 0) ? 0.0 : Eigen::JacobiSVD<Mat>(D).singularValues()(0);
    if (nx == 0) return static_gain;
    if (!is_schur_stable(A)) {
        throw StabilityError("hinf_norm: A must be Schur stable (norm is infinite)");
    }

    double hi = std::max(1.0, 2.0 * static_gain);
    int grow = 0;
    while (!detail::bounded_real_feasible(A, B, C, D, hi)) {
        hi *= 4.0;
        if (++grow > 60) throw DivergenceError("hinf_norm: no feasible upper bound found");
    }
    double lo = 0.0;
    while (hi - lo > 1e-4 * std::max(hi, 1e-12)) {
        const double mid = 0.5 * (hi + lo);
        if (detail::bounded_real_feasible(A, B, C, D, mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    return hi;  // feasible endpoint: certified upper bound
}

// |G(e^{i theta})| on an n-point uniform grid (independent frequency oracle).
inline double frequency_grid_peak(const Mat& A, const Mat& B, const Mat& C, const Mat& D,
                                  int n_points = 2048) {
    using CMat = Eigen::MatrixXcd;
    const Eigen::Index nx = A.rows();
    double peak = 0.0;
    for (int k = 0; k < n_points; ++k) {
        const double th = 2.0 * M_PI * k / n_points;
        const std::complex<double> z(std::cos(th), std::sin(th));
        CMat G;
        if (nx == 0) {
            G = D.cast<std::complex<double>>();
        } else {
            CMat zIA = z * CMat::Identity(nx, nx) - A.cast<std::complex<double>>();
            G = C.cast<std::complex<double>>() * zIA.lu().solve(B.cast<std::complex<double>>()) +
                D.cast<std::complex<double>>();
        }
        Eigen::JacobiSVD<CMat> svd(G);
        peak = std::max(peak, svd.singularValues()(0));
    }
    return peak;
}

// ---------------------------------------------------------------------------
// Steady-state estimation error (Riccati recursion)
// ---------------------------------------------------------------------------

struct RiccatiPair {
    Mat prior;      // one-step-ahead error covariance
    Mat posterior;  // after the measurement update
    int iterations = 0;
};

// Fixed point of
//   Sigma_+ = A (Sigma^-1 + C'(V+Vp)^-1 C)^-1 A' + D W D' + B Wp B'
// started from Sigma_0 = D W D' + B Wp B'. The update is evaluated in the
// covariance (Joseph) form so singular Sigma is handled.
inline RiccatiPair riccati_error_covariance(const PlantModel& plant, const Mat& Wp,
                                            const Mat& Vp, double rel_tol = 1e-10,
                                            int max_iters = 100000) {
    plant.validate();
    const Eigen::Index nx = plant.nx();
    require_dims(Wp.rows() == plant.nu() && Wp.cols() == plant.nu(),
                 "riccati_error_covariance: Wp must be nu-by-nu");
    require_dims(Vp.rows() == plant.ny() && Vp.cols() == plant.ny(),
                 "riccati_error_covariance: Vp must be ny-by-ny");
    require(is_symmetric(Wp, 1e-8) && is_psd(Wp, 1e-10),
            "riccati_error_covariance: Wp must be symmetric PSD");
    require(is_symmetric(Vp, 1e-8) && is_psd(Vp, 1e-10),
            "riccati_error_covariance: Vp must be symmetric PSD");
    const Mat R = plant.V + Vp;
    require(is_pd(R), "riccati_error_covariance: V + Vp must be positive definite");

    const Mat Psi = symmetrized(plant.D * plant.W * plant.D.transpose() +
                                plant.B * Wp * plant.B.transpose());
    const double scale0 = 1.0 + Psi.norm();

    Mat Sigma = Psi;
    Mat post = Sigma;
    RiccatiPair out;
    for (int it = 0; it < max_iters; ++it) {
        // Measurement update without inverting Sigma.
        const Mat CS = plant.C * Sigma;
        const Mat Sinn = symmetrized(CS * plant.C.transpose() + R);
        const Mat K = Sinn.ldlt().solve(CS).transpose();  // Sigma C' Sinn^-1
        post = symmetrized(Sigma - K * CS);
        const Mat next = symmetrized(plant.A * post * plant.A.transpose() + Psi);
        const double delta = (next - Sigma).norm();
        if (!all_finite(next) || next.norm() > 1e14 * scale0) {
            throw DivergenceError(
                "riccati_error_covariance: recursion diverged (detectability failure)");
        }
        Sigma = next;
        out.iterations = it + 1;
        if (delta <= rel_tol * std::max(1.0, Sigma.norm())) {
            // Recompute the posterior at the fixed point.
            const Mat CS2 = plant.C * Sigma;
            const Mat Sinn2 = symmetrized(CS2 * plant.C.transpose() + R);
            const Mat K2 = Sinn2.ldlt().solve(CS2).transpose();
            out.prior = Sigma;
            out.posterior = symmetrized(Sigma - K2 * CS2);
            return out;
        }
    }
    throw DivergenceError("riccati_error_covariance: no fixed point within iteration budget");
}

// ---------------------------------------------------------------------------
// Largest privacy loss consistent with an estimation-error floor
// ---------------------------------------------------------------------------

struct EpsilonFloorReport {
    double epsilon = 0.0;   // largest admissible privacy loss
    double bound = 0.0;     // closed-form right-hand side of the inequality
    double sigma = 0.0;     // total channel noise scale at epsilon
    double kappa = 0.0;
    double K_delta = 0.0;
    Mat Vp;                 // sigma^2 I - V, the top-up the channel must add
    int cu_index = 0;       // column of C selected for the C_u factor
};

// For a smart adversary to be unable to push its steady error below
// tr(E_floor), the privacy loss cannot exceed
//   sqrt( smax(C)^2 beta^2 (n_x - tr(E_floor)/lmin(Psi)) / (tr(E_floor) C_u^2) )
// with Psi = D W D' + B Wp B'. The channel noise consistent with epsilon is
// V + Vp = sigma^2 I, sigma = smax(C) beta kappa(delta, epsilon); sigma and
// epsilon are coupled, so the largest admissible epsilon is found by
// bisection over [1e-6, 1e2].
inline EpsilonFloorReport max_epsilon_for_error_floor(const PlantModel& plant, const Mat& Wp,
                                                      const Mat& E_floor, double beta,
                                                      double delta) {
    plant.validate();
    require(std::isfinite(beta) && beta > 0.0,
            "max_epsilon_for_error_floor: beta must be > 0");
    require(std::isfinite(delta) && delta > 0.0 && delta < 0.5,
            "max_epsilon_for_error_floor: delta must lie in (0, 1/2)");
    // The floor/ceiling argument behind this bound is stated for slack values
    // in [1e-5, 1e-1]; out-of-range requests are pulled to the nearest edge.
    delta = std::clamp(delta, 1e-5, 1e-1);
    require_dims(E_floor.rows() == plant.nx() && E_floor.cols() == plant.nx(),
                 "max_epsilon_for_error_floor: E_floor must be nx-by-nx");
    require(is_symmetric(E_floor, 1e-8) && is_psd(E_floor, 1e-8),
            "max_epsilon_for_error_floor: E_floor must be symmetric PSD");

    const Mat Psi = symmetrized(plant.D * plant.W * plant.D.transpose() +
                                plant.B * Wp * plant.B.transpose());
    const double lmin = min_eigenvalue(Psi);
    require(lmin > 0.0, "max_epsilon_for_error_floor: D W D' + B Wp B' must be positive definite");

    const double trE = E_floor.trace();
    require(trE > 0.0, "max_epsilon_for_error_floor: tr(E_floor) must be positive");
    const double nx = static_cast<double>(plant.nx());

    // Numerator sign decides existence before anything else is evaluated.
    const double numer = nx - trE / lmin;
    if (numer <= 0.0) {
        throw NoValidEpsilonError(
            "max_epsilon_for_error_floor: error floor exceeds the open-loop noise floor; "
            "no positive privacy loss satisfies the bound");
    }

    Eigen::JacobiSVD<Mat> csvd(plant.C);
    const double smaxC = csvd.singularValues().size() ? csvd.singularValues()(0) : 0.0;
    require(smaxC > 0.0, "max_epsilon_for_error_floor: C must be nonzero");

    // With V + Vp = sigma^2 I the diagonal of C'(V+Vp)^-1 C is sigma^-2
    // |C e_j|^2, so the maximizing state index does not depend on sigma.
    int cu = 0;
    double best = -1.0;
    for (Eigen::Index j = 0; j < plant.nx(); ++j) {
        const double nj = plant.C.col(j).squaredNorm();
        if (nj > best + 1e-15 * std::max(1.0, best)) {
            best = nj;
            cu = static_cast<int>(j);
        }
    }
    const double Cu2 = best;
    require(Cu2 > 0.0, "max_epsilon_for_error_floor: C has no nonzero column");

    const double rhs = std::sqrt(smaxC * smaxC * beta * beta * numer / (trE * Cu2));

    // epsilon <= rhs with rhs independent of epsilon under the isotropic
    // channel; bisection kept for the general coupled form.
    const double lo_lim = 1e-6, hi_lim = 1e2;
    auto admissible = [&](double eps) { return eps <= rhs; };
    if (!admissible(lo_lim)) {
        throw NoValidEpsilonError(
            "max_epsilon_for_error_floor: admissible privacy loss falls below 1e-6");
    }
    double lo = lo_lim, hi = hi_lim;
    if (admissible(hi_lim)) {
        lo = hi_lim;
    } else {
        while (hi - lo > 1e-6) {
            const double mid = 0.5 * (lo + hi);
            if (admissible(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    EpsilonFloorReport rep;
    rep.epsilon = lo;
    rep.bound = rhs;
    rep.cu_index = cu;
    const CalibrationResult cal = calibrate_mechanism(smaxC, beta, delta, rep.epsilon);
    rep.sigma = cal.sigma;
    rep.kappa = cal.kappa;
    rep.K_delta = cal.K_delta;
    rep.Vp = rep.sigma * rep.sigma * Mat::Identity(plant.ny(), plant.ny()) - plant.V;
    if (!is_psd(rep.Vp, 1e-12)) {
        throw CalibrationInfeasibleError(
            "max_epsilon_for_error_floor: sigma^2 I - V is not PSD; the sensor noise already "
            "exceeds the calibrated channel level");
    }
    return rep;
}

}  // namespace privctl
