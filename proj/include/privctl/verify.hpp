#pragma once

// Independent certification of synthesis results: Lyapunov steady-state
// covariance checks against the requested bounds, spectral-radius checks,
// the Kalman optimality floor for the adversary error, and the largest
// privacy loss consistent with that floor.

#include <optional>
#include <sstream>
#include <string>

#include "privctl/privacy.hpp"
#include "privctl/synthesis.hpp"

namespace privctl {

struct EpsilonReport {
    bool valid = false;
    double epsilon = 0.0;
    double sigma = 0.0;
    double bound = 0.0;
    std::string message;
};

struct VerificationReport {
    bool pass = false;
    bool closed_loop_stable = false;
    bool estimation_stable = false;
    bool performance_pass = false;
    bool estimation_pass = false;
    bool kalman_floor_pass = false;
    double closed_loop_radius = std::numeric_limits<double>::quiet_NaN();
    double estimation_radius = std::numeric_limits<double>::quiet_NaN();
    // relative Loewner margins: lambda_min(bound - achieved)/|bound|; pass >= -1e-6
    double performance_margin = std::numeric_limits<double>::quiet_NaN();
    double error_margin = std::numeric_limits<double>::quiet_NaN();
    Mat Zinf, Einf, E_kalman;
    double kalman_floor_trace = std::numeric_limits<double>::quiet_NaN();
    double designed_error_trace = std::numeric_limits<double>::quiet_NaN();
    EpsilonReport epsilon;
    std::string message;
};

// Optimal-linear-estimator floor: the steady a-posteriori Kalman covariance
// with the effective measurement noise the adversary actually faces
// (V + Vp on the channel, V with direct sensor access).
inline Mat kalman_floor(const PlantModel& plant, const Mat& Wp, const Mat& Vp,
                        AdversaryMode mode) {
    const Mat Vp_eff =
        mode == AdversaryMode::channel ? Vp : Mat(Mat::Zero(plant.ny(), plant.ny()));
    return riccati_error_covariance(plant, Wp, Vp_eff).posterior;
}

// Driving-noise covariance of the restricted error dynamics
// e+ = (A - Bh C) e + D w + B wp - Bh (v [+ vp]).
inline Mat restricted_error_noise(const PlantModel& plant, const EstimatorModel& est,
                                  const Mat& Wp, const Mat& Vp, AdversaryMode mode) {
    const Mat Veff = mode == AdversaryMode::channel ? Mat(plant.V + Vp) : plant.V;
    return symmetrized(plant.D * plant.W * plant.D.transpose() +
                       plant.B * Wp * plant.B.transpose() +
                       est.Bh * Veff * est.Bh.transpose());
}

// Steady adversary error covariance for a synthesized design: augmented
// estimation loop for general estimators, reduced error dynamics for
// restricted ones (valid for unstable plants).
inline Mat steady_error_covariance(const PlantModel& plant, const SynthesisResult& result,
                                   AdversaryMode mode) {
    if (result.estimator.form == EstimatorForm::restricted) {
        return dlyap_steady(result.estimator.Ah,
                            restricted_error_noise(plant, result.estimator, result.Wp,
                                                   result.Vp, mode));
    }
    const ClosedLoopModel el =
        assemble_estimation_loop(plant, result.estimator, result.Gamma_w, result.Gamma_v, mode);
    return steady_output_covariance(el);
}

// Full independent certification. Never throws on an unstable or violating
// design: failures land in the report with pass = false.
inline VerificationReport verify_design(const PlantModel& plant, const SynthesisResult& result,
                                        const DesignSpec& spec,
                                        const PrivacyParams& privacy = PrivacyParams{}) {
    plant.validate();
    spec.validate(plant);
    VerificationReport rep;
    std::ostringstream why;

    // Performance side.
    const ClosedLoopModel cl =
        assemble_closed_loop(plant, result.controller, result.Gamma_w, result.Gamma_v);
    rep.closed_loop_radius = spectral_radius(cl.Acl);
    rep.closed_loop_stable = rep.closed_loop_radius < 1.0;
    if (rep.closed_loop_stable) {
        rep.Zinf = steady_output_covariance(cl);
        rep.performance_margin =
            min_eigenvalue(Mat(spec.Zbar - rep.Zinf)) / spec.Zbar.norm();
        rep.performance_pass = rep.performance_margin >= -1e-6;
        if (!rep.performance_pass) {
            why << "performance covariance exceeds Zbar (relative margin "
                << rep.performance_margin << "); ";
        }
    } else {
        why << "closed loop unstable (radius " << rep.closed_loop_radius << "); ";
    }

    // Estimation side.
    if (result.estimator.form == EstimatorForm::restricted) {
        rep.estimation_radius = spectral_radius(result.estimator.Ah);
    } else {
        const ClosedLoopModel el = assemble_estimation_loop(plant, result.estimator,
                                                            result.Gamma_w, result.Gamma_v,
                                                            spec.adversary_mode);
        rep.estimation_radius = spectral_radius(el.Acl);
    }
    rep.estimation_stable = rep.estimation_radius < 1.0;
    if (rep.estimation_stable) {
        rep.Einf = steady_error_covariance(plant, result, spec.adversary_mode);
        rep.designed_error_trace = rep.Einf.trace();
        rep.error_margin = min_eigenvalue(Mat(spec.Ebar - rep.Einf)) / spec.Ebar.norm();
        rep.estimation_pass = rep.error_margin >= -1e-6;
        if (!rep.estimation_pass) {
            why << "error covariance exceeds Ebar (relative margin " << rep.error_margin
                << "); ";
        }
    } else {
        why << "estimation dynamics unstable (radius " << rep.estimation_radius << "); ";
    }

    // Kalman optimality floor.
    if (rep.estimation_stable) {
        try {
            rep.E_kalman = kalman_floor(plant, result.Wp, result.Vp, spec.adversary_mode);
            rep.kalman_floor_trace = rep.E_kalman.trace();
            rep.kalman_floor_pass =
                rep.designed_error_trace >= rep.kalman_floor_trace - 1e-8;
            if (!rep.kalman_floor_pass) {
                why << "designed error trace " << rep.designed_error_trace
                    << " undercuts the optimal-filter floor " << rep.kalman_floor_trace
                    << " (impossible for a correct model); ";
            }
        } catch (const Error& e) {
            rep.kalman_floor_pass = false;
            why << "optimal-filter floor diverged: " << e.what() << "; ";
        }
    }

    // Largest privacy loss consistent with the achieved floor. This is a
    // necessary-condition report: the synthesized Wp is taken as given.
    if (rep.estimation_stable && rep.E_kalman.size() > 0) {
        try {
            const EpsilonFloorReport efr = max_epsilon_for_error_floor(
                plant, result.Wp, rep.E_kalman, privacy.beta, privacy.delta);
            rep.epsilon.valid = true;
            rep.epsilon.epsilon = efr.epsilon;
            rep.epsilon.sigma = efr.sigma;
            rep.epsilon.bound = efr.bound;
        } catch (const Error& e) {
            rep.epsilon.valid = false;
            rep.epsilon.message = e.what();
        }
    }

    rep.pass = rep.closed_loop_stable && rep.estimation_stable && rep.performance_pass &&
               rep.estimation_pass && rep.kalman_floor_pass;
    rep.message = rep.pass ? "all checks passed" : why.str();
    return rep;
}

struct CodesignOutput {
    SynthesisResult synthesis;
    VerificationReport verification;
};

// Synthesis followed by independent certification; infeasibility propagates
// as InfeasibleError from synthesize, verification failures land in the
// report for the caller to act on.
inline CodesignOutput codesign(const PlantModel& plant, const DesignSpec& spec,
                               const PrivacyParams& privacy = PrivacyParams{}) {
    CodesignOutput out;
    out.synthesis = synthesize(plant, spec);
    out.verification = verify_design(plant, out.synthesis, spec, privacy);
    return out;
}

}  // namespace privctl
