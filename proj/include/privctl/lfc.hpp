#pragma once

// Four-area load-frequency-control benchmark: swing-equation generator areas
// coupled through tie lines, phase-difference (Laplacian) measurements with
// an absolute-angle anchor on the last area, turbine-power performance
// outputs, and privacy sweeps over a per-area frequency error floor.
//
// Per-area continuous dynamics, linearized about zero phase differences:
//   theta_i'   = omega_i
//   M_i omega_i' = -D_i omega_i - sum_j B_ij V_i V_j (theta_i - theta_j)
//                  + P_t_i + (demand disturbance)
//   tau_i P_t_i' = -P_t_i - omega_i / R_i + u_i
// State ordering: [theta_1 omega_1 Pt_1 ... theta_n omega_n Pt_n].

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "privctl/verify.hpp"

namespace privctl {

struct LfcParams {
    std::vector<double> inertia;      // M_i
    std::vector<double> damping;      // D_i
    std::vector<double> droop;        // R_i
    std::vector<double> turbine_tau;  // tau_i
    Mat line;                         // symmetric tie-line coefficients B_ij, zero diagonal
    std::vector<double> line_voltage; // V_i (per unit)
    double theta_ref = 0.0;           // absolute-angle reference for the anchored area
    double dt = 0.1;                  // zero-order-hold sampling period [s]
    double demand_var = 1.0;          // per-area demand disturbance variance (W)
    double sensor_var = 0.01;         // per-measurement sensor noise variance (V)

    int areas() const { return static_cast<int>(inertia.size()); }

    void validate() const {
        const int n = areas();
        require(n >= 1, "LfcParams: at least one area required");
        require(damping.size() == static_cast<size_t>(n) &&
                    droop.size() == static_cast<size_t>(n) &&
                    turbine_tau.size() == static_cast<size_t>(n) &&
                    line_voltage.size() == static_cast<size_t>(n),
                "LfcParams: per-area parameter lists must have equal length");
        require(line.rows() == n && line.cols() == n, "LfcParams: line matrix must be n-by-n");
        require(is_symmetric(line, 1e-12), "LfcParams: line coefficients must be symmetric");
        for (int i = 0; i < n; ++i) {
            require(inertia[i] > 0 && damping[i] > 0 && droop[i] > 0 && turbine_tau[i] > 0 &&
                        line_voltage[i] > 0,
                    "LfcParams: physical parameters must be positive");
            require(line(i, i) == 0.0, "LfcParams: line matrix diagonal must be zero");
            for (int j = 0; j < n; ++j)
                require(line(i, j) >= 0.0, "LfcParams: line coefficients must be nonnegative");
        }
        require(theta_ref == 0.0, "LfcParams: anchored reference angle must be zero");
        require(dt > 0.0, "LfcParams: sampling period must be positive");
        require(demand_var > 0.0 && sensor_var > 0.0,
                "LfcParams: noise variances must be positive");
    }

    // Stock four-area benchmark (reduced New England network coefficients):
    // area 1 is tied to areas 2, 3, and 4; areas 2 and 3 are tied to each
    // other; the absolute-angle anchor sits on area 4.
    static LfcParams four_area() {
        LfcParams p;
        p.inertia = {0.1667, 0.2222, 0.16, 0.1304};
        p.damping = {0.0083, 0.0088, 0.0080, 0.0088};
        p.droop = {2.4, 2.7, 2.5, 2.0};
        p.turbine_tau = {0.3, 0.33, 0.35, 0.375};
        p.line = Mat::Zero(4, 4);
        p.line(0, 1) = p.line(1, 0) = 0.545;
        p.line(0, 2) = p.line(2, 0) = 0.545;
        p.line(0, 3) = p.line(3, 0) = 0.545;
        p.line(1, 2) = p.line(2, 1) = 0.545;
        p.line_voltage = {1.0, 1.0, 1.0, 1.0};
        return p;
    }
};

inline Eigen::Index lfc_theta_index(int area) { return 3 * area; }
inline Eigen::Index lfc_omega_index(int area) { return 3 * area + 1; }
inline Eigen::Index lfc_turbine_index(int area) { return 3 * area + 2; }

// Continuous-time system matrices (exposed for spectral checks on the
// undiscretized model).
struct LfcContinuous {
    Mat A, B, D;
};

inline LfcContinuous lfc_continuous(const LfcParams& params) {
    params.validate();
    const int n = params.areas();
    LfcContinuous c;
    c.A = Mat::Zero(3 * n, 3 * n);
    c.B = Mat::Zero(3 * n, n);
    c.D = Mat::Zero(3 * n, n);
    for (int i = 0; i < n; ++i) {
        const Eigen::Index th = lfc_theta_index(i), om = lfc_omega_index(i),
                           pt = lfc_turbine_index(i);
        c.A(th, om) = 1.0;
        c.A(om, om) = -params.damping[i] / params.inertia[i];
        c.A(om, pt) = 1.0 / params.inertia[i];
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double t = params.line(i, j) * params.line_voltage[i] * params.line_voltage[j];
            c.A(om, th) -= t / params.inertia[i];
            c.A(om, lfc_theta_index(j)) += t / params.inertia[i];
        }
        c.A(pt, om) = -1.0 / (params.droop[i] * params.turbine_tau[i]);
        c.A(pt, pt) = -1.0 / params.turbine_tau[i];
        c.B(pt, i) = 1.0 / params.turbine_tau[i];
        c.D(om, i) = 1.0 / params.inertia[i];
    }
    return c;
}

// Phase measurement rows: y_i = sum over tied areas j of (theta_i - theta_j),
// with the last area additionally reading its absolute angle against the
// zero reference. Unit edge weights follow the tie-line adjacency pattern.
inline Mat lfc_measurement_matrix(const LfcParams& params) {
    const int n = params.areas();
    Mat C = Mat::Zero(n, 3 * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i || params.line(i, j) == 0.0) continue;
            C(i, lfc_theta_index(i)) += 1.0;
            C(i, lfc_theta_index(j)) -= 1.0;
        }
    }
    C(n - 1, lfc_theta_index(n - 1)) += 1.0;  // absolute-angle anchor
    return C;
}

// Discretized benchmark plant: zero-order hold on both the control and the
// demand-disturbance channels; measurements and performance outputs are
// sampled directly.
inline PlantModel build_lfc(const LfcParams& params) {
    params.validate();
    const int n = params.areas();
    const LfcContinuous c = lfc_continuous(params);

    Mat BD(3 * n, 2 * n);
    BD.leftCols(n) = c.B;
    BD.rightCols(n) = c.D;
    const auto [Ad, BDd] = discretize(c.A, BD, params.dt);

    PlantModel p;
    p.A = Ad;
    p.B = BDd.leftCols(n);
    p.D = BDd.rightCols(n);
    p.C = lfc_measurement_matrix(params);
    p.Cz = Mat::Zero(n, 3 * n);
    for (int i = 0; i < n; ++i) p.Cz(i, lfc_turbine_index(i)) = 1.0;
    p.W = params.demand_var * Mat::Identity(n, n);
    p.V = params.sensor_var * Mat::Identity(n, n);
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------
// Privacy sweep
// ---------------------------------------------------------------------------

struct SweepOptions {
    double loose_floor = 1e3;  // error-bound entries for non-frequency states
    NoiseStructure noise_structure = NoiseStructure::diagonal;
    double gamma_v_cap = 1e6;
    PrivacyParams privacy{};  // used for the per-row privacy-loss report
};

struct SweepRow {
    double level = 0.0;
    AdversaryMode mode = AdversaryMode::channel;
    SynthesisVariant variant = SynthesisVariant::restricted_channel;
    std::string status;  // "optimal", "infeasible", "verify-failed", "error"
    Vec wp, vp, perf_var;  // per-area diagonals; NaN when status != optimal
    double objective = std::numeric_limits<double>::quiet_NaN();
    double epsilon_star = std::numeric_limits<double>::quiet_NaN();
    std::string note;
};

struct SweepTable {
    int areas = 0;
    std::vector<SweepRow> rows;

    std::string csv() const {
        std::ostringstream os;
        os << "level,adversary_mode,variant,status";
        for (int i = 1; i <= areas; ++i) os << ",wp_" << i;
        for (int i = 1; i <= areas; ++i) os << ",vp_" << i;
        for (int i = 1; i <= areas; ++i) os << ",perf_var_" << i;
        os << ",objective,epsilon_star\n";
        char buf[40];
        auto put = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.12g", v);
            os << ',' << buf;
        };
        for (const SweepRow& r : rows) {
            std::snprintf(buf, sizeof buf, "%.12g", r.level);
            os << buf << ',' << to_string(r.mode) << ',' << to_string(r.variant) << ','
               << r.status;
            for (int i = 0; i < areas; ++i) put(r.wp.size() > i ? r.wp(i) : nan_value());
            for (int i = 0; i < areas; ++i) put(r.vp.size() > i ? r.vp(i) : nan_value());
            for (int i = 0; i < areas; ++i)
                put(r.perf_var.size() > i ? r.perf_var(i) : nan_value());
            put(r.objective);
            put(r.epsilon_star);
            os << '\n';
        }
        return os.str();
    }

   private:
    static double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }
};

// Error bound for one sweep cell: the requested level on every frequency
// state, a loose ceiling everywhere else.
inline Mat lfc_error_bound(int areas, double level, double loose_floor) {
    Mat E = loose_floor * Mat::Identity(3 * areas, 3 * areas);
    for (int i = 0; i < areas; ++i) E(lfc_omega_index(i), lfc_omega_index(i)) = level;
    return E;
}

inline DesignSpec lfc_design_spec(const PlantModel& plant, double level, AdversaryMode mode,
                                  const Mat& Zbar, const SweepOptions& opts) {
    DesignSpec s;
    s.adversary_mode = mode;
    s.Zbar = Zbar;
    s.Ebar = lfc_error_bound(static_cast<int>(plant.nx()) / 3, level, opts.loose_floor);
    s.noise_structure = opts.noise_structure;
    s.gamma_v_cap = opts.gamma_v_cap;
    return s;
}

// One codesign call per privacy level. Infeasible or failed cells are
// reported in their row and the sweep continues.
inline SweepTable sweep_privacy(const PlantModel& plant, const std::vector<double>& levels,
                                AdversaryMode mode, const Mat& Zbar,
                                const SweepOptions& opts = SweepOptions{}) {
    plant.validate();
    const int n = static_cast<int>(plant.nu());
    require(plant.ny() == n && plant.nz() == n && plant.nx() == 3 * n,
            "sweep_privacy: plant does not have the per-area benchmark shape");
    SweepTable table;
    table.areas = n;
    for (double level : levels) {
        SweepRow row;
        row.level = level;
        row.mode = mode;
        row.variant = pick_variant(plant, mode);
        try {
            const DesignSpec spec = lfc_design_spec(plant, level, mode, Zbar, opts);
            const CodesignOutput out = codesign(plant, spec, opts.privacy);
            row.variant = out.synthesis.variant;
            row.wp = out.synthesis.Wp.diagonal();
            row.vp = out.synthesis.Vp.diagonal();
            row.perf_var = out.verification.Zinf.diagonal();
            row.objective = out.synthesis.objective;
            if (out.verification.epsilon.valid) {
                row.epsilon_star = out.verification.epsilon.epsilon;
            }
            row.status = out.verification.pass ? "optimal" : "verify-failed";
            if (!out.verification.pass) row.note = out.verification.message;
        } catch (const InfeasibleError& e) {
            row.status = "infeasible";
            row.note = e.what();
        } catch (const Error& e) {
            row.status = "error";
            row.note = e.what();
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace privctl
