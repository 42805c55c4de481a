#pragma once

// Monte-Carlo simulation of the private closed loop plus adversary replay.
//
// Sampling contract (fixed so identical seeds give identical trajectories on
// any platform): a single mt19937_64 stream seeded with `seed`; each scalar
// standard normal consumes exactly two draws via the Box-Muller transform
//   u = (bits >> 11 + 0.5) * 2^-53,  n = sqrt(-2 ln u1) cos(2 pi u2);
// per step the noise vectors are drawn in the order w (nw), wp (nu), v (ny),
// vp (ny), element by element.

#include <cstdint>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "privctl/synthesis.hpp"

namespace privctl {

namespace detail {

inline double standard_normal(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
    const double u2 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline Vec normal_vector(std::mt19937_64& rng, Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = standard_normal(rng);
    return v;
}

}  // namespace detail

struct TrajectoryBundle {
    long horizon = 0;
    long burn_in = 0;
    std::uint64_t seed = 0;
    AdversaryMode mode = AdversaryMode::channel;
    Mat states;                  // nx x T
    Mat controller_states;       // nx x T
    Mat controls;                // nu x T
    Mat outputs;                 // ny x T, the channel signal ybar = C x + v + vp
    Mat adversary_measurements;  // ny x T, ybar (channel) or C x + v (direct)
    Mat adversary_estimates;     // nx x T, estimate held at step k
    Mat errors;                  // nx x T, x_k - xhat_k
    Mat performance;             // nz x T, z = Cz x
    Mat empirical_Z;             // nz x nz over the post-burn-in tail
    Mat empirical_E;             // nx x nx over the post-burn-in tail
};

// Runs the closed loop (plant + recovered controller + privacy noises) with
// the adversary filter in the loop. All initial states are zero. Per step:
// record z, u, and the error; then advance plant, controller, and adversary.
inline TrajectoryBundle simulate(const PlantModel& plant, const SynthesisResult& result,
                                 AdversaryMode mode, long horizon, std::uint64_t seed) {
    plant.validate();
    require(horizon >= 1, "simulate: horizon must be >= 1");
    const Eigen::Index nx = plant.nx(), nu = plant.nu(), ny = plant.ny(), nz = plant.nz(),
                       nw = plant.nw();
    require_dims(result.controller.Ac.rows() == nx, "simulate: controller state must match nx");

    const Mat Lw = Mat(plant.W.llt().matrixL());
    const Mat Lwp = Mat(result.Wp.llt().matrixL());
    const Mat Lv = Mat(plant.V.llt().matrixL());
    const Mat Lvp = Mat(result.Vp.llt().matrixL());
    require(all_finite(Lw) && all_finite(Lwp) && all_finite(Lv) && all_finite(Lvp),
            "simulate: a noise covariance factorization failed");

    TrajectoryBundle b;
    b.horizon = horizon;
    b.burn_in = horizon / 10;
    b.seed = seed;
    b.mode = mode;
    b.states = Mat::Zero(nx, horizon);
    b.controller_states = Mat::Zero(nx, horizon);
    b.controls = Mat::Zero(nu, horizon);
    b.outputs = Mat::Zero(ny, horizon);
    b.adversary_measurements = Mat::Zero(ny, horizon);
    b.adversary_estimates = Mat::Zero(nx, horizon);
    b.errors = Mat::Zero(nx, horizon);
    b.performance = Mat::Zero(nz, horizon);

    std::mt19937_64 rng(seed);
    Vec x = Vec::Zero(nx), xc = Vec::Zero(nx), xh = Vec::Zero(nx);
    Mat accZ = Mat::Zero(nz, nz), accE = Mat::Zero(nx, nx);
    long tail = 0;

    for (long k = 0; k < horizon; ++k) {
        const Vec u = result.controller.Cc * xc;
        const Vec w = Lw * detail::normal_vector(rng, nw);
        const Vec wp = Lwp * detail::normal_vector(rng, nu);
        const Vec v = Lv * detail::normal_vector(rng, ny);
        const Vec vp = Lvp * detail::normal_vector(rng, ny);

        const Vec y = plant.C * x + v;
        const Vec ybar = y + vp;
        const Vec ya = mode == AdversaryMode::channel ? ybar : y;
        const Vec z = plant.Cz * x;
        const Vec e = x - xh;

        b.states.col(k) = x;
        b.controller_states.col(k) = xc;
        b.controls.col(k) = u;
        b.outputs.col(k) = ybar;
        b.adversary_measurements.col(k) = ya;
        b.adversary_estimates.col(k) = xh;
        b.errors.col(k) = e;
        b.performance.col(k) = z;
        if (k >= b.burn_in) {
            accZ += z * z.transpose();
            accE += e * e.transpose();
            ++tail;
        }

        x = plant.A * x + plant.B * (u + wp) + plant.D * w;
        xc = result.controller.Ac * xc + result.controller.Bc * ybar;
        xh = result.estimator.Ah * xh + plant.B * u + result.estimator.Bh * ya;
        if (!x.allFinite() || !xc.allFinite() || !xh.allFinite()) {
            throw DivergenceError("simulate: non-finite state at step " + std::to_string(k));
        }
    }
    b.empirical_Z = accZ / std::max<long>(tail, 1);
    b.empirical_E = accE / std::max<long>(tail, 1);
    return b;
}

// Re-runs an estimator over recorded measurement/control streams from
// xhat_0 = 0; column k of the result is the estimate held at step k:
//   xhat_{k+1} = Ah xhat_k + B u_k + Bh y_k.
inline Mat adversary_replay(const EstimatorModel& est, const PlantModel& plant,
                            const Mat& measurements, const Mat& controls) {
    const Eigen::Index nx = plant.nx(), T = measurements.cols();
    require_dims(measurements.rows() == plant.ny(), "adversary_replay: measurement rows != ny");
    require_dims(controls.rows() == plant.nu() && controls.cols() == T,
                 "adversary_replay: control stream shape mismatch");
    require_dims(est.Ah.rows() == nx && est.Bh.cols() == plant.ny(),
                 "adversary_replay: estimator dimensions do not match the plant");
    Mat est_states = Mat::Zero(nx, T);
    Vec xh = Vec::Zero(nx);
    for (Eigen::Index k = 0; k < T; ++k) {
        est_states.col(k) = xh;
        xh = est.Ah * xh + plant.B * controls.col(k) + est.Bh * measurements.col(k);
    }
    return est_states;
}

// CSV schema: header then one row per step,
//   step, x_0..x_{nx-1}, xhat_0..xhat_{nx-1}, err_norm
// with every number printed to 12 significant digits.
inline void write_trajectory_csv(std::ostream& os, const TrajectoryBundle& b) {
    const Eigen::Index nx = b.states.rows();
    os << "step";
    for (Eigen::Index i = 0; i < nx; ++i) os << ",x" << i;
    for (Eigen::Index i = 0; i < nx; ++i) os << ",xhat" << i;
    os << ",err_norm\n";
    char buf[40];
    for (long k = 0; k < b.horizon; ++k) {
        os << k;
        for (Eigen::Index i = 0; i < nx; ++i) {
            std::snprintf(buf, sizeof buf, "%.12g", b.states(i, k));
            os << ',' << buf;
        }
        for (Eigen::Index i = 0; i < nx; ++i) {
            std::snprintf(buf, sizeof buf, "%.12g", b.adversary_estimates(i, k));
            os << ',' << buf;
        }
        std::snprintf(buf, sizeof buf, "%.12g", b.errors.col(k).norm());
        os << ',' << buf << '\n';
    }
}

inline std::string trajectory_csv(const TrajectoryBundle& b) {
    std::ostringstream ss;
    write_trajectory_csv(ss, b);
    return ss.str();
}

}  // namespace privctl
