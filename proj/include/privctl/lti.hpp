#pragma once

// Discrete-time LTI plant/controller/estimator models and the structural
// operations used throughout the library: zero-order-hold discretization,
// steady-state discrete Lyapunov solves, and closed-loop assembly.

#include "privctl/common.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <utility>

namespace privctl {

// Which measurement stream the adversary observes.
//  channel: the transmitted (privatized) measurement y + v + v^p
//  direct:  the raw sensor output y + v, bypassing the channel noise
enum class AdversaryMode { channel, direct };

inline std::string to_string(AdversaryMode m) {
    return m == AdversaryMode::channel ? "channel" : "direct";
}

enum class EstimatorForm { general, restricted };

inline std::string to_string(EstimatorForm f) {
    return f == EstimatorForm::general ? "general" : "restricted";
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

// x+ = A x + B (u + w_p) + D w,   y = C x + v,   z = Cz x
// with w ~ N(0, W), v ~ N(0, V) and (w_p, v_p) the privacy noises chosen by
// the designer.
struct PlantModel {
    Mat A, B, C, Cz, D, W, V;

    PlantModel() = default;

    PlantModel(Mat A_, Mat B_, Mat C_, Mat Cz_, Mat D_, Mat W_, Mat V_)
        : A(std::move(A_)),
          B(std::move(B_)),
          C(std::move(C_)),
          Cz(std::move(Cz_)),
          D(std::move(D_)),
          W(std::move(W_)),
          V(std::move(V_)) {
        validate();
    }

    Eigen::Index nx() const { return A.rows(); }
    Eigen::Index nu() const { return B.cols(); }
    Eigen::Index ny() const { return C.rows(); }
    Eigen::Index nz() const { return Cz.rows(); }
    Eigen::Index nw() const { return D.cols(); }

    void validate() const {
        const Eigen::Index n = A.rows();
        require_dims(n >= 1 && A.cols() == n, "PlantModel: A must be square and non-empty");
        require_dims(B.rows() == n, "PlantModel: B row count must match state dimension");
        require_dims(C.cols() == n, "PlantModel: C column count must match state dimension");
        require_dims(Cz.cols() == n, "PlantModel: Cz column count must match state dimension");
        require_dims(D.rows() == n, "PlantModel: D row count must match state dimension");
        require_dims(W.rows() == D.cols() && W.cols() == D.cols(),
                     "PlantModel: W must be square with the disturbance dimension");
        require_dims(V.rows() == C.rows() && V.cols() == C.rows(),
                     "PlantModel: V must be square with the measurement dimension");
        require(all_finite(A) && all_finite(B) && all_finite(C) && all_finite(Cz) &&
                    all_finite(D) && all_finite(W) && all_finite(V),
                "PlantModel: matrices must be finite");
        require(is_symmetric(W, 1e-10) && is_pd(W), "PlantModel: W must be symmetric positive definite");
        require(is_symmetric(V, 1e-10) && is_pd(V), "PlantModel: V must be symmetric positive definite");
    }
};

// Strictly proper dynamic output feedback:
//   xc+ = Ac xc + Bc y_in,   u = Cc xc
// The direct feedthrough term is structurally zero.
struct ControllerModel {
    Mat Ac, Bc, Cc;

    ControllerModel() = default;

    ControllerModel(Mat Ac_, Mat Bc_, Mat Cc_)
        : Ac(std::move(Ac_)), Bc(std::move(Bc_)), Cc(std::move(Cc_)) {
        const Eigen::Index n = Ac.rows();
        require_dims(Ac.cols() == n, "ControllerModel: Ac must be square");
        require_dims(Bc.rows() == n, "ControllerModel: Bc row count must match controller order");
        require_dims(Cc.cols() == n, "ControllerModel: Cc column count must match controller order");
        require(all_finite(Ac) && all_finite(Bc) && all_finite(Cc),
                "ControllerModel: matrices must be finite");
    }

    Eigen::Index order() const { return Ac.rows(); }
};

// Adversary estimator  xh+ = Ah xh + B u + Bh y_a.
// The restricted form constrains Ah = A - Bh C (innovation form), which is
// what an observer that trusts the plant model would use.
struct EstimatorModel {
    Mat Ah, Bh;
    EstimatorForm form = EstimatorForm::general;

    EstimatorModel() = default;

    EstimatorModel(Mat Ah_, Mat Bh_, EstimatorForm form_)
        : Ah(std::move(Ah_)), Bh(std::move(Bh_)), form(form_) {
        const Eigen::Index n = Ah.rows();
        require_dims(Ah.cols() == n, "EstimatorModel: Ah must be square");
        require_dims(Bh.rows() == n, "EstimatorModel: Bh row count must match state dimension");
        require(all_finite(Ah) && all_finite(Bh), "EstimatorModel: matrices must be finite");
    }

    static EstimatorModel restricted(const PlantModel& plant, Mat Bh_) {
        require_dims(Bh_.rows() == plant.nx() && Bh_.cols() == plant.ny(),
                     "EstimatorModel::restricted: Bh must be nx-by-ny");
        Mat Ah_ = plant.A - Bh_ * plant.C;
        return EstimatorModel(std::move(Ah_), std::move(Bh_), EstimatorForm::restricted);
    }

    // For restricted estimators, the defining identity Ah = A - Bh C.
    bool satisfies_restricted_identity(const PlantModel& plant, double tol = 1e-9) const {
        const Mat expected = plant.A - Bh * plant.C;
        return (Ah - expected).norm() <= tol * std::max(1.0, expected.norm());
    }
};

// An autonomous stochastic loop  xi+ = Acl xi + Bcl n,  out = Ccl xi with
// n ~ N(0, Ncov). Used both for the control loop (out = z) and for the
// adversary estimation loop (out = x - xh).
struct ClosedLoopModel {
    Mat Acl, Bcl, Ccl, Ncov;

    ClosedLoopModel() = default;

    ClosedLoopModel(Mat A_, Mat B_, Mat C_, Mat N_)
        : Acl(std::move(A_)), Bcl(std::move(B_)), Ccl(std::move(C_)), Ncov(std::move(N_)) {
        const Eigen::Index n = Acl.rows();
        require_dims(Acl.cols() == n, "ClosedLoopModel: Acl must be square");
        require_dims(Bcl.rows() == n, "ClosedLoopModel: Bcl row count must match loop dimension");
        require_dims(Ccl.cols() == n, "ClosedLoopModel: Ccl column count must match loop dimension");
        require_dims(Ncov.rows() == Bcl.cols() && Ncov.cols() == Bcl.cols(),
                     "ClosedLoopModel: Ncov must be square with the stacked noise dimension");
        require(is_symmetric(Ncov, 1e-8) && is_psd(Ncov, 1e-10),
                "ClosedLoopModel: Ncov must be symmetric positive semidefinite");
    }

    Eigen::Index dim() const { return Acl.rows(); }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Zero-order-hold discretization of xdot = Ac x + Bc u via the matrix
// exponential of the augmented matrix [[Ac, Bc], [0, 0]] * dt.
inline std::pair<Mat, Mat> discretize(const Mat& Ac, const Mat& Bc, double dt) {
    require_dims(Ac.rows() == Ac.cols(), "discretize: A must be square");
    require_dims(Bc.rows() == Ac.rows(), "discretize: B row count must match A");
    require(all_finite(Ac) && all_finite(Bc), "discretize: matrices must be finite");
    require(std::isfinite(dt) && dt > 0.0, "discretize: dt must be positive");

    const Eigen::Index n = Ac.rows();
    const Eigen::Index m = Bc.cols();
    Mat aug = Mat::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = Ac;
    aug.topRightCorner(n, m) = Bc;
    const Mat e = (aug * dt).exp();
    return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

inline bool is_schur_stable(const Mat& A, double tol = 1e-9) {
    require(all_finite(A), "is_schur_stable: matrix must be finite");
    return spectral_radius(A) < 1.0 - tol;
}

// Steady-state solution of X = A X A' + Q for Schur-stable A, by doubling:
//   X_{k+1} = X_k + A_k X_k A_k',  A_{k+1} = A_k^2.
// Each doubling squares the number of series terms accumulated, so the
// iteration converges in O(log) steps even close to the stability boundary.
inline Mat dlyap_steady(const Mat& A, const Mat& Q, double residual_tol = 1e-10) {
    require_dims(A.rows() == A.cols(), "dlyap_steady: A must be square");
    require_dims(Q.rows() == A.rows() && Q.cols() == A.cols(),
                 "dlyap_steady: Q must have the same shape as A");
    require(all_finite(A) && all_finite(Q), "dlyap_steady: matrices must be finite");
    require(is_symmetric(Q, 1e-8), "dlyap_steady: Q must be symmetric");
    if (!is_schur_stable(A)) {
        throw StabilityError("dlyap_steady: A must be Schur stable");
    }
    if (A.rows() == 0) return Mat(0, 0);

    constexpr int kMaxDoublings = 200;
    Mat X = symmetrized(Q);
    Mat Ak = A;
    for (int it = 0; it < kMaxDoublings; ++it) {
        const double tail = Ak.norm() * Ak.norm() * std::max(1.0, X.norm());
        if (tail <= 0.25 * residual_tol) break;
        X = symmetrized(X + Ak * X * Ak.transpose());
        Ak = Ak * Ak;
        if (!all_finite(X) || !all_finite(Ak)) {
            throw DivergenceError("dlyap_steady: iteration diverged");
        }
    }
    const double resid = (A * X * A.transpose() + symmetrized(Q) - X).norm();
    if (resid > residual_tol * (1.0 + X.norm())) {
        throw DivergenceError("dlyap_steady: residual tolerance not reached");
    }
    return X;
}

// Closed loop of plant + strictly proper controller driven through the
// privatized channel. Loop state [x; xc], noise [w; w_p; v; v_p] with
// covariance blkdiag(W, inv(gamma_w), V, inv(gamma_v)); output z.
inline ClosedLoopModel assemble_closed_loop(const PlantModel& plant, const ControllerModel& ctrl,
                                            const Mat& gamma_w, const Mat& gamma_v) {
    plant.validate();
    const Eigen::Index nx = plant.nx(), nu = plant.nu(), ny = plant.ny(), nw = plant.nw();
    const Eigen::Index nc = ctrl.order();
    require_dims(ctrl.Bc.cols() == ny, "assemble_closed_loop: controller input must match ny");
    require_dims(ctrl.Cc.rows() == nu, "assemble_closed_loop: controller output must match nu");
    require_dims(gamma_w.rows() == nu && gamma_w.cols() == nu,
                 "assemble_closed_loop: gamma_w must be nu-by-nu");
    require_dims(gamma_v.rows() == ny && gamma_v.cols() == ny,
                 "assemble_closed_loop: gamma_v must be ny-by-ny");
    require(is_symmetric(gamma_w, 1e-8) && is_pd(gamma_w),
            "assemble_closed_loop: gamma_w must be symmetric positive definite");
    require(is_symmetric(gamma_v, 1e-8) && is_pd(gamma_v),
            "assemble_closed_loop: gamma_v must be symmetric positive definite");

    Mat Acl = Mat::Zero(nx + nc, nx + nc);
    Acl.topLeftCorner(nx, nx) = plant.A;
    Acl.topRightCorner(nx, nc) = plant.B * ctrl.Cc;
    Acl.bottomLeftCorner(nc, nx) = ctrl.Bc * plant.C;
    Acl.bottomRightCorner(nc, nc) = ctrl.Ac;

    Mat Bcl = Mat::Zero(nx + nc, nw + nu + 2 * ny);
    Bcl.block(0, 0, nx, nw) = plant.D;
    Bcl.block(0, nw, nx, nu) = plant.B;
    Bcl.block(nx, nw + nu, nc, ny) = ctrl.Bc;
    Bcl.block(nx, nw + nu + ny, nc, ny) = ctrl.Bc;

    Mat Ccl = Mat::Zero(plant.nz(), nx + nc);
    Ccl.leftCols(nx) = plant.Cz;

    const Mat Ncov = blkdiag({plant.W, symmetrized(gamma_w.inverse()),
                              plant.V, symmetrized(gamma_v.inverse())});
    return ClosedLoopModel(std::move(Acl), std::move(Bcl), std::move(Ccl), Ncov);
}

// Control-free estimation loop seen by the adversary. Loop state [x; xh],
// output x - xh. In channel mode the adversary reads the privatized stream,
// so the channel noise v_p enters through Bh; in direct mode it reads the raw
// sensor and that input column disappears.
inline ClosedLoopModel assemble_estimation_loop(const PlantModel& plant, const EstimatorModel& est,
                                                const Mat& gamma_w, const Mat& gamma_v,
                                                AdversaryMode mode) {
    plant.validate();
    const Eigen::Index nx = plant.nx(), nu = plant.nu(), ny = plant.ny(), nw = plant.nw();
    require_dims(est.Ah.rows() == nx, "assemble_estimation_loop: estimator order must match nx");
    require_dims(est.Bh.cols() == ny, "assemble_estimation_loop: estimator input must match ny");
    require_dims(gamma_w.rows() == nu && gamma_w.cols() == nu,
                 "assemble_estimation_loop: gamma_w must be nu-by-nu");
    require(is_symmetric(gamma_w, 1e-8) && is_pd(gamma_w),
            "assemble_estimation_loop: gamma_w must be symmetric positive definite");

    Mat Acl = Mat::Zero(2 * nx, 2 * nx);
    Acl.topLeftCorner(nx, nx) = plant.A;
    Acl.bottomLeftCorner(nx, nx) = est.Bh * plant.C;
    Acl.bottomRightCorner(nx, nx) = est.Ah;

    const bool channel = (mode == AdversaryMode::channel);
    if (channel) {
        require_dims(gamma_v.rows() == ny && gamma_v.cols() == ny,
                     "assemble_estimation_loop: gamma_v must be ny-by-ny");
        require(is_symmetric(gamma_v, 1e-8) && is_pd(gamma_v),
                "assemble_estimation_loop: gamma_v must be symmetric positive definite");
    }
    const Eigen::Index nn = nw + nu + (channel ? 2 * ny : ny);
    Mat Bcl = Mat::Zero(2 * nx, nn);
    Bcl.block(0, 0, nx, nw) = plant.D;
    Bcl.block(0, nw, nx, nu) = plant.B;
    Bcl.block(nx, nw + nu, nx, ny) = est.Bh;
    if (channel) Bcl.block(nx, nw + nu + ny, nx, ny) = est.Bh;

    Mat Ccl = Mat::Zero(nx, 2 * nx);
    Ccl.leftCols(nx) = Mat::Identity(nx, nx);
    Ccl.rightCols(nx) = -Mat::Identity(nx, nx);

    std::vector<Mat> cov_blocks = {plant.W, symmetrized(gamma_w.inverse()), plant.V};
    if (channel) cov_blocks.push_back(symmetrized(gamma_v.inverse()));
    return ClosedLoopModel(std::move(Acl), std::move(Bcl), std::move(Ccl), blkdiag(cov_blocks));
}

// Steady-state covariance of the loop state under the stacked white noise.
inline Mat steady_state_covariance(const ClosedLoopModel& loop) {
    return dlyap_steady(loop.Acl, symmetrized(loop.Bcl * loop.Ncov * loop.Bcl.transpose()));
}

// Steady-state covariance of the loop output (Ccl X Ccl').
inline Mat steady_output_covariance(const ClosedLoopModel& loop) {
    const Mat X = steady_state_covariance(loop);
    return symmetrized(loop.Ccl * X * loop.Ccl.transpose());
}

}  // namespace privctl
