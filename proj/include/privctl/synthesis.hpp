#pragma once

// Co-design of privacy noise covariances with output-feedback controllers and
// adversary estimators. Four program builders cover the cross product of
// {Schur-stable plant with a general estimator, arbitrary plant with the
// restricted estimator A_hat = A - B_hat C} x {channel adversary, direct
// adversary}; recovery routines turn certificate variables into realizable
// gains.

#include <map>
#include <string>
#include <utility>

#include "privctl/lmi.hpp"
#include "privctl/lti.hpp"
#include "privctl/solve.hpp"

namespace privctl {

enum class SynthesisVariant { stable_channel, stable_direct, restricted_channel, restricted_direct };

inline const char* to_string(SynthesisVariant v) {
    switch (v) {
        case SynthesisVariant::stable_channel: return "stable-channel";
        case SynthesisVariant::stable_direct: return "stable-direct";
        case SynthesisVariant::restricted_channel: return "restricted-channel";
        case SynthesisVariant::restricted_direct: return "restricted-direct";
    }
    return "?";
}

inline SynthesisVariant synthesis_variant_from_string(const std::string& s) {
    if (s == "stable-channel") return SynthesisVariant::stable_channel;
    if (s == "stable-direct") return SynthesisVariant::stable_direct;
    if (s == "restricted-channel") return SynthesisVariant::restricted_channel;
    if (s == "restricted-direct") return SynthesisVariant::restricted_direct;
    throw InvalidInputError("unknown synthesis variant '" + s + "'");
}

enum class NoiseStructure { full, diagonal };

inline const char* to_string(NoiseStructure s) {
    return s == NoiseStructure::full ? "full" : "diagonal";
}

// Design request: performance bound Zbar on E[z z'], adversary error bound
// Ebar on E[e e'], adversary model, and solver knobs.
struct DesignSpec {
    AdversaryMode adversary_mode = AdversaryMode::channel;
    Mat Zbar;
    Mat Ebar;
    NoiseStructure noise_structure = NoiseStructure::full;
    double gamma_v_cap = 1e6;  // cap on Gamma_v when it is absent from the objective
    double margin = 1e-7;
    SolveOptions solver;

    void validate(const PlantModel& plant) const {
        require_dims(Zbar.rows() == plant.nz() && Zbar.cols() == plant.nz(),
                     "DesignSpec: Zbar must be nz-by-nz");
        require_dims(Ebar.rows() == plant.nx() && Ebar.cols() == plant.nx(),
                     "DesignSpec: Ebar must be nx-by-nx");
        require(is_symmetric(Zbar, 1e-8) && is_pd(Zbar), "DesignSpec: Zbar must be symmetric PD");
        require(is_symmetric(Ebar, 1e-8) && is_pd(Ebar), "DesignSpec: Ebar must be symmetric PD");
        require(std::isfinite(gamma_v_cap) && gamma_v_cap > 0.0,
                "DesignSpec: gamma_v_cap must be > 0");
        require(std::isfinite(margin) && margin >= 0.0, "DesignSpec: margin must be >= 0");
    }
};

struct SynthesisResult {
    SynthesisVariant variant = SynthesisVariant::stable_channel;
    ControllerModel controller;
    EstimatorModel estimator;
    Mat S, U;           // controller factorization with Y X + S U = I
    Mat Gamma_w, Gamma_v;
    Mat Wp, Vp;         // realized privacy covariances (inverses of the Gammas)
    double objective = 0.0;
    std::map<std::string, Mat> certificates;
    LmiSolution solution;
};

namespace detail {

inline Mat spd_inverse(const Mat& M) {
    const Eigen::Index n = M.rows();
    return symmetrized(M.ldlt().solve(Mat::Identity(n, n)));
}

inline Mat inverse_sqrt_spd(const Mat& M) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(M));
    require(es.eigenvalues().minCoeff() > 0.0, "inverse_sqrt_spd: matrix must be positive");
    return symmetrized(es.eigenvectors() *
                       es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                       es.eigenvectors().transpose());
}

// Performance side shared by every variant: the closed-loop covariance grid
// and the Zbar bound grid in (X, Y, Q, L, F, Gamma_w[, Gamma_v]).
inline void add_performance_constraints(LmiProblem& p, const PlantModel& plant,
                                        const DesignSpec& spec, bool direct_mode) {
    const Eigen::Index nx = plant.nx(), nu = plant.nu(), ny = plant.ny(), nz = plant.nz(),
                       nw = plant.nw();
    const VarStructure gs =
        spec.noise_structure == NoiseStructure::diagonal ? VarStructure::diagonal
                                                         : VarStructure::symmetric;
    const int X = p.add_variable("X", nx, nx, VarStructure::symmetric);
    const int Y = p.add_variable("Y", nx, nx, VarStructure::symmetric);
    const int Q = p.add_variable("Q", nx, nx, VarStructure::full);
    const int L = p.add_variable("L", nu, nx, VarStructure::full);
    const int F = p.add_variable("F", nx, ny, VarStructure::full);
    const int Gw = p.add_variable("Gw", nu, nu, gs);
    // Gamma_v is always a program variable; in direct mode it carries no
    // objective weight and is boxed by the cap block below, and the reported
    // value is substituted with the cap afterwards (feasibility is monotone
    // in Gamma_v, so the substitution preserves every certificate).
    const int Gv = p.add_variable("Gv", ny, ny, gs);

    const Mat I_x = Mat::Identity(nx, nx);
    const Mat Winv = spd_inverse(plant.W);
    const Mat Vinv = spd_inverse(plant.V);

    GridConstraint loop({nx, nx, nx, nx, nw, nu, ny, ny}, "closed-loop covariance");
    loop.set(0, 0, p.var(X));
    loop.set(0, 1, LmiProblem::constant(I_x));
    loop.set(0, 2, plant.A * p.var(X) + plant.B * p.var(L));
    loop.set(0, 3, LmiProblem::constant(plant.A));
    loop.set(0, 4, LmiProblem::constant(plant.D));
    loop.set(0, 5, LmiProblem::constant(plant.B));
    loop.set(1, 1, p.var(Y));
    loop.set(1, 2, p.var(Q));
    loop.set(1, 3, p.var(Y) * plant.A + p.var(F) * plant.C);
    loop.set(1, 4, p.var(Y) * plant.D);
    loop.set(1, 5, p.var(Y) * plant.B);
    loop.set(1, 6, p.var(F));
    loop.set(1, 7, p.var(F));
    loop.set(2, 2, p.var(X));
    loop.set(2, 3, LmiProblem::constant(I_x));
    loop.set(3, 3, p.var(Y));
    loop.set(4, 4, LmiProblem::constant(Winv));
    loop.set(5, 5, p.var(Gw));
    loop.set(6, 6, LmiProblem::constant(Vinv));
    loop.set(7, 7, p.var(Gv));
    p.add_constraint(std::move(loop));

    if (direct_mode) {
        // I - Gamma_v / cap >= 0, written in unit scale for solver health
        GridConstraint cap({ny}, "channel-noise cap");
        cap.set(0, 0, LmiProblem::constant(Mat::Identity(ny, ny)) +
                          (-1.0 / spec.gamma_v_cap) * p.var(Gv));
        p.add_constraint(std::move(cap));
    }

    // Bound grid pre-scaled by Zbar^-1/2 (a congruence, so the constraint is
    // unchanged) to keep every constant block near unit norm.
    const Mat Zs = inverse_sqrt_spd(spec.Zbar);
    GridConstraint perf({nz, nx, nx}, "performance bound");
    perf.set(0, 0, LmiProblem::constant(Mat::Identity(nz, nz)));
    perf.set(0, 1, (Zs * plant.Cz) * p.var(X));
    perf.set(0, 2, LmiProblem::constant(Mat(Zs * plant.Cz)));
    perf.set(1, 1, p.var(X));
    perf.set(1, 2, LmiProblem::constant(I_x));
    perf.set(2, 2, p.var(Y));
    p.add_constraint(std::move(perf));
}

// General-estimator constraints (Schur-stable plants): the adversary filter
// covariance grid in (Xh, Yh, Qh, Fh) plus the Ebar bound with the Xh - Uh
// coupling block. with_vp selects whether channel noise reaches the adversary.
inline void add_general_estimator_constraints(LmiProblem& p, const PlantModel& plant,
                                              const DesignSpec& spec, bool with_vp) {
    const Eigen::Index nx = plant.nx(), nu = plant.nu(), ny = plant.ny(), nw = plant.nw();
    const int Xh = p.add_variable("Xh", nx, nx, VarStructure::symmetric);
    const int Yh = p.add_variable("Yh", nx, nx, VarStructure::symmetric);
    const int Qh = p.add_variable("Qh", nx, nx, VarStructure::full);
    const int Fh = p.add_variable("Fh", nx, ny, VarStructure::full);
    const int Uh = p.add_variable("Uh", nx, nx, VarStructure::full);
    const int Gw = p.variable_index("Gw");
    const int Gv = with_vp ? p.variable_index("Gv") : -1;

    const Mat I_x = Mat::Identity(nx, nx);
    const Mat Winv = spd_inverse(plant.W);
    const Mat Vinv = spd_inverse(plant.V);

    std::vector<Eigen::Index> dims = {nx, nx, nx, nx, nw, nu, ny};
    if (with_vp) dims.push_back(ny);
    GridConstraint est(dims, "estimator covariance");
    est.set(0, 0, p.var(Xh));
    est.set(0, 1, LmiProblem::constant(I_x));
    est.set(0, 2, plant.A * p.var(Xh));
    est.set(0, 3, LmiProblem::constant(plant.A));
    est.set(0, 4, LmiProblem::constant(plant.D));
    est.set(0, 5, LmiProblem::constant(plant.B));
    est.set(1, 1, p.var(Yh));
    est.set(1, 2, p.var(Qh));
    est.set(1, 3, p.var(Yh) * plant.A + p.var(Fh) * plant.C);
    est.set(1, 4, p.var(Yh) * plant.D);
    est.set(1, 5, p.var(Yh) * plant.B);
    est.set(1, 6, p.var(Fh));
    if (with_vp) est.set(1, 7, p.var(Fh));
    est.set(2, 2, p.var(Xh));
    est.set(2, 3, LmiProblem::constant(I_x));
    est.set(3, 3, p.var(Yh));
    est.set(4, 4, LmiProblem::constant(Winv));
    est.set(5, 5, p.var(Gw));
    est.set(6, 6, LmiProblem::constant(Vinv));
    if (with_vp) est.set(7, 7, p.var(Gv));
    p.add_constraint(std::move(est));

    // Row 0 pre-scaled by Ebar^-1/2 (congruence; same constraint, unit-scale
    // constants even when the requested bound spans decades).
    const Mat Es = inverse_sqrt_spd(spec.Ebar);
    GridConstraint bound({nx, nx, nx}, "error bound");
    bound.set(0, 0, LmiProblem::constant(I_x));
    bound.set(0, 1, Es * (p.var(Xh) - p.var(Uh)));
    bound.set(0, 2, LmiProblem::constant(Es));
    bound.set(1, 1, p.var(Xh));
    bound.set(1, 2, LmiProblem::constant(I_x));
    bound.set(2, 2, p.var(Yh));
    p.add_constraint(std::move(bound));
}

// Restricted-estimator constraints (arbitrary plants): with Yh = E^-1 and
// Zh = Yh Bh, the error dynamics A - Bh C contract with covariance below
// Yh^-1, and [Ebar I; I Yh] > 0 caps the error.
inline void add_restricted_estimator_constraints(LmiProblem& p, const PlantModel& plant,
                                                 const DesignSpec& spec, bool with_vp) {
    const Eigen::Index nx = plant.nx(), nu = plant.nu(), ny = plant.ny(), nw = plant.nw();
    const int Yh = p.add_variable("Yh", nx, nx, VarStructure::symmetric);
    const int Zh = p.add_variable("Zh", nx, ny, VarStructure::full);
    const int Gw = p.variable_index("Gw");
    const int Gv = with_vp ? p.variable_index("Gv") : -1;

    const Mat Winv = spd_inverse(plant.W);
    const Mat Vinv = spd_inverse(plant.V);

    // [Ebar I; I Yh] > 0 scaled by diag(Ebar^-1/2, I): same constraint with
    // unit-norm constants.
    const Mat Es = inverse_sqrt_spd(spec.Ebar);
    GridConstraint cap({nx, nx}, "error bound");
    cap.set(0, 0, LmiProblem::constant(Mat::Identity(nx, nx)));
    cap.set(0, 1, LmiProblem::constant(Es));
    cap.set(1, 1, p.var(Yh));
    p.add_constraint(std::move(cap));

    std::vector<Eigen::Index> dims = {nx, nx, nw, nu, ny};
    if (with_vp) dims.push_back(ny);
    GridConstraint est(dims, "error dynamics contraction");
    est.set(0, 0, p.var(Yh));
    est.set(0, 1, p.var(Yh) * plant.A - p.var(Zh) * plant.C);
    est.set(0, 2, p.var(Yh) * plant.D);
    est.set(0, 3, p.var(Yh) * plant.B);
    est.set(0, 4, p.var(Zh));
    if (with_vp) est.set(0, 5, p.var(Zh));
    est.set(1, 1, p.var(Yh));
    est.set(2, 2, LmiProblem::constant(Winv));
    est.set(3, 3, p.var(Gw));
    est.set(4, 4, LmiProblem::constant(Vinv));
    if (with_vp) est.set(5, 5, p.var(Gv));
    p.add_constraint(std::move(est));
}

inline void set_noise_objective(LmiProblem& p, bool with_gv) {
    std::vector<std::pair<int, double>> weights = {{p.variable_index("Gw"), 1.0}};
    if (with_gv) weights.push_back({p.variable_index("Gv"), 1.0});
    p.set_objective(std::move(weights));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Program builders
// ---------------------------------------------------------------------------

// Stable plant, adversary on the noisy channel: general estimator, objective
// trace(Gamma_w + Gamma_v).
inline LmiProblem build_stable_channel(const PlantModel& plant, const DesignSpec& spec) {
    plant.validate();
    spec.validate(plant);
    if (!is_schur_stable(plant.A)) {
        throw VariantMismatchError(
            "build_stable_channel: plant is not Schur stable; use the restricted-estimator "
            "builders");
    }
    LmiProblem p(spec.margin);
    detail::add_performance_constraints(p, plant, spec, /*direct_mode=*/false);
    detail::add_general_estimator_constraints(p, plant, spec, /*with_vp=*/true);
    detail::set_noise_objective(p, /*with_gv=*/true);
    return p;
}

// Stable plant, adversary with direct sensor access: channel noise cannot
// privatize, so Gamma_v is pinned at its cap and only trace(Gamma_w) is
// minimized; the estimator grid drops the channel-noise column.
inline LmiProblem build_stable_direct(const PlantModel& plant, const DesignSpec& spec) {
    plant.validate();
    spec.validate(plant);
    if (!is_schur_stable(plant.A)) {
        throw VariantMismatchError(
            "build_stable_direct: plant is not Schur stable; use the restricted-estimator "
            "builders");
    }
    LmiProblem p(spec.margin);
    detail::add_performance_constraints(p, plant, spec, /*direct_mode=*/true);
    detail::add_general_estimator_constraints(p, plant, spec, /*with_vp=*/false);
    detail::set_noise_objective(p, /*with_gv=*/false);
    return p;
}

// Arbitrary plant, channel adversary, estimator restricted to
// A_hat = A - B_hat C; objective trace(Gamma_w + Gamma_v).
inline LmiProblem build_restricted_channel(const PlantModel& plant, const DesignSpec& spec) {
    plant.validate();
    spec.validate(plant);
    LmiProblem p(spec.margin);
    detail::add_performance_constraints(p, plant, spec, /*direct_mode=*/false);
    detail::add_restricted_estimator_constraints(p, plant, spec, /*with_vp=*/true);
    detail::set_noise_objective(p, /*with_gv=*/true);
    return p;
}

// Arbitrary plant, direct adversary, restricted estimator; objective
// trace(Gamma_w) with Gamma_v pinned at its cap.
inline LmiProblem build_restricted_direct(const PlantModel& plant, const DesignSpec& spec) {
    plant.validate();
    spec.validate(plant);
    LmiProblem p(spec.margin);
    detail::add_performance_constraints(p, plant, spec, /*direct_mode=*/true);
    detail::add_restricted_estimator_constraints(p, plant, spec, /*with_vp=*/false);
    detail::set_noise_objective(p, /*with_gv=*/false);
    return p;
}

// ---------------------------------------------------------------------------
// Recovery
// ---------------------------------------------------------------------------

struct ControllerRecovery {
    ControllerModel model;
    Mat S, U;
};

// Controller gains from certificate variables via the factorization S = Y,
// U = Y^-1 - X (so Y X + S U = I holds by construction):
//   A_c = S^-1 (Q - Y A X - Y B L - F C X) U^-1,  B_c = S^-1 F,  C_c = L U^-1.
inline ControllerRecovery recover_controller(const Mat& X, const Mat& Y, const Mat& Q,
                                             const Mat& L, const Mat& F,
                                             const PlantModel& plant) {
    const Eigen::Index nx = plant.nx();
    require_dims(X.rows() == nx && Y.rows() == nx && Q.rows() == nx && L.cols() == nx &&
                     F.rows() == nx,
                 "recover_controller: certificate dimensions do not match the plant");

    auto attempt = [&](const Mat& Yeff) {
        const Mat Yinv = Yeff.ldlt().solve(Mat::Identity(nx, nx));
        return Mat(Yinv - X);
    };

    Mat Yeff = Y;
    Mat U = attempt(Yeff);
    double condU = condition_number(U);
    if (!(condU < 1e12)) {
        Yeff = Y + (1e-9 * Y.norm()) * Mat::Identity(nx, nx);
        U = attempt(Yeff);
        condU = condition_number(U);
        if (!(condU < 1e12)) {
            throw RecoverySingularError("recover_controller: U = Y^-1 - X is numerically singular",
                                        condU);
        }
    }

    const Mat Uinv = U.partialPivLu().inverse();
    const Mat core = Q - Yeff * plant.A * X - Yeff * plant.B * L - F * plant.C * X;
    auto Sldlt = Yeff.ldlt();  // S = Y

    ControllerRecovery out;
    out.S = Yeff;
    out.U = U;
    out.model.Ac = Sldlt.solve(core) * Uinv;
    out.model.Bc = Sldlt.solve(F);
    out.model.Cc = L * Uinv;
    require(all_finite(out.model.Ac) && all_finite(out.model.Bc) && all_finite(out.model.Cc),
            "recover_controller: non-finite gains");
    return out;
}

struct EstimatorRecovery {
    EstimatorModel model;
    Mat Sh, Uh;
};

// General estimator gains: Sh = (I - Yh Xh) Uh^-1 (so Sh Uh = I - Yh Xh),
//   A_hat = Sh^-1 (Qh - Yh A Xh - Fh C Xh) Uh^-1,  B_hat = Sh^-1 Fh.
inline EstimatorRecovery recover_estimator_general(const Mat& Xh, const Mat& Yh, const Mat& Qh,
                                                   const Mat& Fh, const Mat& Uh_in,
                                                   const PlantModel& plant) {
    const Eigen::Index nx = plant.nx();
    require_dims(Xh.rows() == nx && Yh.rows() == nx && Qh.rows() == nx && Fh.rows() == nx &&
                     Uh_in.rows() == nx && Uh_in.cols() == nx,
                 "recover_estimator_general: certificate dimensions do not match the plant");

    Mat Uh = Uh_in;
    double condU = condition_number(Uh);
    if (!(condU < 1e12)) {
        Uh = Uh_in + (1e-9 * Uh_in.norm()) * Mat::Identity(nx, nx);
        condU = condition_number(Uh);
        if (!(condU < 1e12)) {
            throw RecoverySingularError("recover_estimator_general: Uh is numerically singular",
                                        condU);
        }
    }
    const Mat Uinv = Uh.partialPivLu().inverse();
    const Mat Sh = (Mat::Identity(nx, nx) - Yh * Xh) * Uinv;
    const double condS = condition_number(Sh);
    if (!(condS < 1e12)) {
        throw RecoverySingularError(
            "recover_estimator_general: Sh = (I - Yh Xh) Uh^-1 is numerically singular", condS);
    }
    auto Slu = Sh.partialPivLu();

    EstimatorRecovery out;
    out.Sh = Sh;
    out.Uh = Uh;
    out.model.form = EstimatorForm::general;
    out.model.Ah = Slu.solve(Qh - Yh * plant.A * Xh - Fh * plant.C * Xh) * Uinv;
    out.model.Bh = Slu.solve(Fh);
    require(all_finite(out.model.Ah) && all_finite(out.model.Bh),
            "recover_estimator_general: non-finite gains");
    return out;
}

// Restricted estimator: B_hat = Yh^-1 Zh, A_hat = A - B_hat C.
inline EstimatorModel recover_estimator_restricted(const Mat& Yh, const Mat& Zh,
                                                   const PlantModel& plant) {
    require_dims(Yh.rows() == plant.nx() && Yh.cols() == plant.nx() &&
                     Zh.rows() == plant.nx() && Zh.cols() == plant.ny(),
                 "recover_estimator_restricted: certificate dimensions do not match the plant");
    require(is_symmetric(Yh, 1e-8), "recover_estimator_restricted: Yh must be symmetric");
    if (!is_pd(Yh)) {
        throw RecoverySingularError("recover_estimator_restricted: Yh is not positive definite",
                                    condition_number(Yh));
    }
    const Mat Bh = Yh.ldlt().solve(Zh);
    return EstimatorModel::restricted(plant, Bh);
}

// ---------------------------------------------------------------------------
// End-to-end synthesis
// ---------------------------------------------------------------------------

inline SynthesisVariant pick_variant(const PlantModel& plant, AdversaryMode mode) {
    const bool stable = is_schur_stable(plant.A);
    if (stable) {
        return mode == AdversaryMode::channel ? SynthesisVariant::stable_channel
                                              : SynthesisVariant::stable_direct;
    }
    return mode == AdversaryMode::channel ? SynthesisVariant::restricted_channel
                                          : SynthesisVariant::restricted_direct;
}

inline LmiProblem build_program(const PlantModel& plant, const DesignSpec& spec,
                                SynthesisVariant variant) {
    switch (variant) {
        case SynthesisVariant::stable_channel: return build_stable_channel(plant, spec);
        case SynthesisVariant::stable_direct: return build_stable_direct(plant, spec);
        case SynthesisVariant::restricted_channel: return build_restricted_channel(plant, spec);
        case SynthesisVariant::restricted_direct: return build_restricted_direct(plant, spec);
    }
    throw InvalidInputError("build_program: unknown variant");
}

namespace detail {

// On infeasibility, attribute the failure: re-solve with the performance
// constraints alone; if those stand alone feasible, the estimator/error side
// is the binding family.
inline std::string diagnose_infeasibility(const PlantModel& plant, const DesignSpec& spec,
                                          bool direct_mode) {
    LmiProblem probe(spec.margin);
    add_performance_constraints(probe, plant, spec, direct_mode);
    SolveOptions opts = spec.solver;
    const LmiSolution sol = solve(probe, opts);
    if (sol.status == SolveStatus::infeasible) {
        return "performance family (closed-loop covariance / Zbar bound)";
    }
    return "estimator family (error covariance / Ebar bound)";
}

}  // namespace detail

// Builds the variant program, solves it, recovers all gains, and packages
// certificates. Throws InfeasibleError naming the binding constraint family.
inline SynthesisResult synthesize(const PlantModel& plant, const DesignSpec& spec) {
    plant.validate();
    spec.validate(plant);
    const SynthesisVariant variant = pick_variant(plant, spec.adversary_mode);
    const bool direct_mode = spec.adversary_mode == AdversaryMode::direct;
    const bool restricted = variant == SynthesisVariant::restricted_channel ||
                            variant == SynthesisVariant::restricted_direct;

    const LmiProblem program = build_program(plant, spec, variant);
    LmiSolution sol = solve(program, spec.solver);

    if (sol.status == SolveStatus::infeasible) {
        throw InfeasibleError(std::string("synthesis infeasible [") + to_string(variant) +
                              "]: " + detail::diagnose_infeasibility(plant, spec, direct_mode));
    }
    if (sol.status != SolveStatus::optimal) {
        throw Error(std::string("synthesis failed [") + to_string(variant) +
                    "]: " + sol.message);
    }

    const Eigen::Index ny = plant.ny();
    SynthesisResult out;
    out.variant = variant;
    out.Gamma_w = sol.value("Gw");
    out.Gamma_v = direct_mode ? Mat(spec.gamma_v_cap * Mat::Identity(ny, ny)) : sol.value("Gv");
    out.Wp = detail::spd_inverse(out.Gamma_w);
    out.Vp = direct_mode ? Mat((1.0 / spec.gamma_v_cap) * Mat::Identity(ny, ny))
                         : detail::spd_inverse(out.Gamma_v);
    require(is_pd(out.Wp), "synthesize: recovered Wp is not positive definite");
    require(is_pd(out.Vp), "synthesize: recovered Vp is not positive definite");
    out.objective = out.Gamma_w.trace() + (direct_mode ? 0.0 : out.Gamma_v.trace());

    const Mat X = sol.value("X");
    const Mat Y = sol.value("Y");
    ControllerRecovery cr =
        recover_controller(X, Y, sol.value("Q"), sol.value("L"), sol.value("F"), plant);
    out.controller = cr.model;
    out.S = cr.S;
    out.U = cr.U;
    const double factor_resid =
        (Y * X + cr.S * cr.U - Mat::Identity(plant.nx(), plant.nx())).norm();
    require(factor_resid <= 1e-8 * std::max(1.0, (Y * X).norm()),
            "synthesize: controller factorization identity violated");

    out.certificates["X"] = X;
    out.certificates["Y"] = Y;
    out.certificates["Q"] = sol.value("Q");
    out.certificates["L"] = sol.value("L");
    out.certificates["F"] = sol.value("F");
    out.certificates["S"] = cr.S;
    out.certificates["U"] = cr.U;

    if (restricted) {
        const Mat Yh = sol.value("Yh");
        const Mat Zh = sol.value("Zh");
        out.estimator = recover_estimator_restricted(Yh, Zh, plant);
        out.certificates["Yh"] = Yh;
        out.certificates["Zh"] = Zh;
    } else {
        const Mat Xh = sol.value("Xh");
        const Mat Yh = sol.value("Yh");
        EstimatorRecovery er = recover_estimator_general(Xh, Yh, sol.value("Qh"),
                                                         sol.value("Fh"), sol.value("Uh"), plant);
        out.estimator = er.model;
        const double est_resid =
            (er.Sh * er.Uh - (Mat::Identity(plant.nx(), plant.nx()) - Yh * Xh)).norm();
        require(est_resid <= 1e-8 * std::max(1.0, (Yh * Xh).norm()),
                "synthesize: estimator factorization identity violated");
        out.certificates["Xh"] = Xh;
        out.certificates["Yh"] = Yh;
        out.certificates["Qh"] = sol.value("Qh");
        out.certificates["Fh"] = sol.value("Fh");
        out.certificates["Uh"] = er.Uh;
        out.certificates["Sh"] = er.Sh;
    }

    out.solution = std::move(sol);
    return out;
}

}  // namespace privctl
