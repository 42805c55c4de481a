#pragma once

// Dense primal-dual interior-point solver for the canonical form produced by
// lmi.hpp:
//
//   minimize c'x  subject to  F_b(x) = F_{b,0} + sum_i x_i F_{b,i} >= 0.
//
// Slack blocks S_b = F_b(x) and dual blocks Z_b (with <F_{b,i}, Z_b> summing
// to c_i) are driven to complementarity with Nesterov-Todd scaling and a
// Mehrotra predictor-corrector step. A primal log-det barrier method is
// provided as an independent second backend, and further backends can be
// registered at runtime.

#include "privctl/lmi.hpp"

#include <cstdlib>
#include <functional>
#include <mutex>

namespace privctl {

enum class SolveStatus { optimal, infeasible, numerical_failure };

inline std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::numerical_failure: return "numerical-failure";
    }
    return "?";
}

struct SolveOptions {
    double tol_gap = 1e-8;
    double tol_feas = 1e-8;
    int max_iters = 200;
    // Backend name; empty means: $PRIVCTL_SOLVER if set, else "ipm".
    std::string backend;
    bool verbose = false;
};

// What a backend returns: packed primal point, per-block duals, and the
// backend's own convergence report.
struct RawSolution {
    SolveStatus status = SolveStatus::numerical_failure;
    Vec x;
    std::vector<Mat> Z;
    double pobj = std::numeric_limits<double>::quiet_NaN();
    double dobj = std::numeric_limits<double>::quiet_NaN();
    double rel_gap = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    std::string message;
};

struct LmiSolution {
    SolveStatus status = SolveStatus::numerical_failure;
    std::map<std::string, Mat> values;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double rel_gap = std::numeric_limits<double>::quiet_NaN();
    // Most negative scaled constraint eigenvalue at the solution (>= 0 means
    // every LMI holds exactly).
    double worst_violation = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    std::string backend;
    std::string message;

    const Mat& value(const std::string& name) const {
        auto it = values.find(name);
        if (it == values.end()) throw InvalidInputError("LmiSolution: no variable " + name);
        return it->second;
    }
};

namespace detail {

inline Eigen::Index svec_dim(Eigen::Index d) { return d * (d + 1) / 2; }

inline void svec_into(const Mat& M, double* col) {
    const Eigen::Index d = M.rows();
    const double rt2 = std::sqrt(2.0);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < d; ++i) {
        col[k++] = M(i, i);
        for (Eigen::Index j = i + 1; j < d; ++j) col[k++] = rt2 * M(i, j);
    }
}

// H_k = T F_k T' for every active scalar of the block, packed as svec columns
// so that SvecH' * SvecH accumulates <F_i, W^-1 F_j W^-1> Gram entries.
inline Mat scaled_coeff_svec(const CanonicalBlock& blk, const Mat& T) {
    const Eigen::Index d = blk.dim;
    Mat out(svec_dim(d), static_cast<Eigen::Index>(blk.active.size()));
    Mat H(d, d);
    for (size_t k = 0; k < blk.active.size(); ++k) {
        H.setZero();
        for (const OuterPair& p : blk.pairs[k]) {
            const Vec ta = T * p.a;
            const Vec tb = T * p.b;
            H.noalias() += p.alpha * (ta * tb.transpose());
            H.noalias() += p.alpha * (tb * ta.transpose());
        }
        svec_into(H, out.col(static_cast<Eigen::Index>(k)).data());
    }
    return out;
}

// <F_k, T> for each active scalar, accumulated into g (T symmetric).
inline void accumulate_inner(const CanonicalBlock& blk, const Mat& T, Vec& g) {
    for (size_t k = 0; k < blk.active.size(); ++k) {
        double s = 0.0;
        for (const OuterPair& p : blk.pairs[k]) s += 2.0 * p.alpha * p.a.dot(T * p.b);
        g[blk.active[k]] += s;
    }
}

// sum_k w[active_k] F_k added onto M.
inline void accumulate_combination(const CanonicalBlock& blk, const Vec& w, Mat& M) {
    for (size_t k = 0; k < blk.active.size(); ++k) {
        const double wk = w[blk.active[k]];
        if (wk == 0.0) continue;
        for (const OuterPair& p : blk.pairs[k]) {
            const Mat ab = p.a * p.b.transpose();
            M += (wk * p.alpha) * (ab + ab.transpose());
        }
    }
}

// Largest step alpha <= cap with X + alpha dX >= 0, given X = L L'.
inline double max_psd_step(const Eigen::LLT<Mat>& lltX, const Mat& dX, double cap) {
    const Mat Li = lltX.matrixL().solve(Mat::Identity(dX.rows(), dX.cols()));
    const Mat Mtil = Li * dX * Li.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(Mtil), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin >= -1e-14) return cap;
    return std::min(cap, -1.0 / lmin);
}

inline bool llt_of(const Mat& M, Eigen::LLT<Mat>& out) {
    out.compute(symmetrized(M));
    return out.info() == Eigen::Success;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Built-in interior-point backend
// ---------------------------------------------------------------------------

inline RawSolution ipm_solve(const CanonicalSdp& sdp, const SolveOptions& opts) {
    RawSolution out;
    const Eigen::Index n = sdp.nvars;
    const size_t nb = sdp.blocks.size();

    double f0_scale = 1.0;
    Eigen::Index total_dim = 0;
    for (const CanonicalBlock& b : sdp.blocks) {
        f0_scale = std::max(f0_scale, b.F0.norm());
        total_dim += b.dim;
    }
    const double c_scale = 1.0 + sdp.c.lpNorm<Eigen::Infinity>();

    // Scalars that never touch a constraint can only be optimal if their cost
    // is zero; then any value works and we pin them at zero.
    std::vector<bool> active_any(static_cast<size_t>(n), false);
    for (const CanonicalBlock& b : sdp.blocks)
        for (int idx : b.active) active_any[static_cast<size_t>(idx)] = true;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!active_any[static_cast<size_t>(i)] && sdp.c[i] != 0.0) {
            out.status = SolveStatus::numerical_failure;
            out.message = "objective is unbounded along an unconstrained variable";
            return out;
        }
    }

    if (nb == 0) {
        out.status = SolveStatus::optimal;
        out.x = Vec::Zero(n);
        out.pobj = out.dobj = 0.0;
        out.rel_gap = 0.0;
        out.message = "unconstrained";
        return out;
    }

    Vec x = Vec::Zero(n);
    std::vector<Mat> S(nb), Z(nb);
    for (size_t b = 0; b < nb; ++b) {
        const double eta = 1.0 + sdp.blocks[b].F0.norm();
        S[b] = eta * Mat::Identity(sdp.blocks[b].dim, sdp.blocks[b].dim);
        Z[b] = eta * Mat::Identity(sdp.blocks[b].dim, sdp.blocks[b].dim);
    }

    std::vector<Mat> Rp(nb), Rinv(nb), Gaff(nb), dSa(nb), dZa(nb), dS(nb), dZ(nb), Tmat(nb),
        SvecH(nb), Rptil(nb);
    std::vector<Vec> lam(nb);
    std::vector<Eigen::LLT<Mat>> lltS(nb), lltZ(nb);

    // Best-so-far iterate for graceful degradation: when the last digits are
    // unreachable (flat optimal faces, extreme cone conditioning) we hand back
    // the best point instead of failing, provided it is tight enough for the
    // post-solve constraint verification to stand a chance.
    Vec best_x;
    std::vector<Mat> best_Z;
    double best_score = std::numeric_limits<double>::infinity();
    double best_gap = 0.0, best_rp = 0.0, best_rd = 0.0, best_pobj = 0.0, best_dobj = 0.0;
    int best_iter = 0;
    auto finish = [&](const std::string& msg) {
        const bool usable = best_x.size() > 0 && best_gap <= 1e-6 && best_rp <= 1e-7 &&
                            best_rd <= 1e-6;
        if (usable) {
            out.status = SolveStatus::optimal;
            out.x = best_x;
            out.Z = best_Z;
            out.pobj = best_pobj;
            out.dobj = best_dobj;
            out.rel_gap = best_gap;
            out.iterations = best_iter;
            out.message = "converged to reduced accuracy (" + msg + ")";
        } else {
            out.status = SolveStatus::numerical_failure;
            out.message = msg;
            out.x = x;
            out.Z = Z;
        }
        return out;
    };

    for (int iter = 0; iter < opts.max_iters; ++iter) {
        // Residuals and merit quantities.
        double gap = 0.0, rp_norm = 0.0;
        for (size_t b = 0; b < nb; ++b) {
            Rp[b] = sdp.blocks[b].eval(x) - S[b];
            rp_norm += Rp[b].squaredNorm();
            gap += S[b].cwiseProduct(Z[b]).sum();
        }
        rp_norm = std::sqrt(rp_norm);
        Vec rd = sdp.c;
        double z_scale = 0.0;
        for (size_t b = 0; b < nb; ++b) {
            Vec az = Vec::Zero(n);
            detail::accumulate_inner(sdp.blocks[b], Z[b], az);
            rd -= az;
            z_scale = std::max(z_scale, Z[b].lpNorm<Eigen::Infinity>());
        }
        const double pobj = sdp.c.dot(x);
        double dobj = 0.0;
        for (size_t b = 0; b < nb; ++b) dobj -= sdp.blocks[b].F0.cwiseProduct(Z[b]).sum();
        const double rel_gap = gap / (1.0 + std::abs(pobj) + std::abs(dobj));
        const double rp_rel = rp_norm / (1.0 + f0_scale);
        // Backward-error scaling: the attainable dual residual floor grows
        // with the size of the dual iterate itself.
        const double rd_rel = rd.lpNorm<Eigen::Infinity>() / (c_scale + z_scale);

        out.iterations = iter;
        out.pobj = pobj;
        out.dobj = dobj;
        out.rel_gap = rel_gap;

        const double score = std::max({rel_gap, rp_rel, rd_rel});
        if (score < best_score) {
            best_score = score;
            best_x = x;
            best_Z = Z;
            best_gap = rel_gap;
            best_rp = rp_rel;
            best_rd = rd_rel;
            best_pobj = pobj;
            best_dobj = dobj;
            best_iter = iter;
        }

        if (opts.verbose) {
            std::fprintf(stderr,
                         "ipm %3d pobj=% .6e dobj=% .6e gap=%.3e rp=%.3e rd=%.3e "
                         "rd_abs=%.3e zmax=%.3e\n",
                         iter, pobj, dobj, rel_gap, rp_rel, rd_rel,
                         rd.lpNorm<Eigen::Infinity>(), z_scale);
        }

        if (rel_gap <= opts.tol_gap && rp_rel <= opts.tol_feas && rd_rel <= opts.tol_feas) {
            out.status = SolveStatus::optimal;
            out.x = x;
            out.Z = Z;
            out.message = "converged";
            return out;
        }

        // Dual improving ray => primal infeasible. Normalize by total trace.
        {
            double trZ = 0.0;
            for (size_t b = 0; b < nb; ++b) trZ += Z[b].trace();
            if (trZ > 0.0) {
                Vec az = Vec::Zero(n);
                double f0z = 0.0;
                for (size_t b = 0; b < nb; ++b) {
                    detail::accumulate_inner(sdp.blocks[b], Z[b], az);
                    f0z += sdp.blocks[b].F0.cwiseProduct(Z[b]).sum();
                }
                az /= trZ;
                f0z /= trZ;
                if (az.lpNorm<Eigen::Infinity>() <= 1e-8 * c_scale && f0z < -1e-8) {
                    out.status = SolveStatus::infeasible;
                    out.x = x;
                    out.Z = Z;
                    for (Mat& zb : out.Z) zb /= trZ;
                    out.message = "dual improving ray certificate";
                    return out;
                }
            }
        }

        // Nesterov-Todd scaling per block.
        bool scale_ok = true;
        for (size_t b = 0; b < nb; ++b) {
            if (!detail::llt_of(S[b], lltS[b]) || !detail::llt_of(Z[b], lltZ[b])) {
                scale_ok = false;
                break;
            }
            const Mat Ls = lltS[b].matrixL();
            const Mat Lz = lltZ[b].matrixL();
            Eigen::JacobiSVD<Mat> svd(Lz.transpose() * Ls,
                                      Eigen::ComputeFullU | Eigen::ComputeFullV);
            lam[b] = svd.singularValues();
            if (lam[b].minCoeff() <= 0.0) {
                scale_ok = false;
                break;
            }
            // Rinv = Lambda^{1/2} V' Ls^{-1}.
            const Mat Lsi =
                Ls.triangularView<Eigen::Lower>().solve(Mat::Identity(Ls.rows(), Ls.cols()));
            Rinv[b] = lam[b].cwiseSqrt().asDiagonal() * svd.matrixV().transpose() * Lsi;
            Rptil[b] = Rinv[b] * Rp[b] * Rinv[b].transpose();
        }
        if (!scale_ok) {
            return finish("lost positive definiteness of an iterate");
        }

        const double mu = gap / static_cast<double>(total_dim);

        // Schur complement M_ij = sum_b <F_i, W^-1 F_j W^-1>.
        Mat M = Mat::Zero(n, n);
        for (size_t b = 0; b < nb; ++b) {
            SvecH[b] = detail::scaled_coeff_svec(sdp.blocks[b], Rinv[b]);
            const auto& act = sdp.blocks[b].active;
            const Mat Msub = SvecH[b].transpose() * SvecH[b];
            for (size_t p = 0; p < act.size(); ++p)
                for (size_t q = 0; q < act.size(); ++q)
                    M(act[p], act[q]) += Msub(static_cast<Eigen::Index>(p),
                                              static_cast<Eigen::Index>(q));
        }
        // Pin unconstrained scalars.
        for (Eigen::Index i = 0; i < n; ++i)
            if (!active_any[static_cast<size_t>(i)]) M(i, i) = 1.0;

        Eigen::LDLT<Mat> ldlt(M);
        if (ldlt.info() != Eigen::Success) {
            // Tiny ridge as a last resort; M is a PSD Gram matrix.
            M.diagonal().array() += 1e-12 * (1.0 + M.trace() / std::max<Eigen::Index>(n, 1));
            ldlt.compute(M);
        }

        auto solve_direction = [&](const std::vector<Mat>& G, Vec& dx, std::vector<Mat>& dS_o,
                                   std::vector<Mat>& dZ_o) -> bool {
            Vec h = -rd;
            for (size_t b = 0; b < nb; ++b) {
                Tmat[b] = Rinv[b].transpose() * (G[b] - Rptil[b]) * Rinv[b];
                detail::accumulate_inner(sdp.blocks[b], Tmat[b], h);
            }
            dx = ldlt.solve(h);
            if (!dx.allFinite()) return false;
            // One pass of iterative refinement recovers direction accuracy
            // lost to Schur-complement conditioning.
            const Vec resid = h - M * dx;
            const Vec corr = ldlt.solve(resid);
            if (corr.allFinite()) dx += corr;
            for (size_t b = 0; b < nb; ++b) {
                Mat lin = Mat::Zero(sdp.blocks[b].dim, sdp.blocks[b].dim);
                detail::accumulate_combination(sdp.blocks[b], dx, lin);
                dS_o[b] = symmetrized(Rp[b] + lin);
                // dZ = Rinv'(G - Rptil)Rinv - Winv (dS - Rp) Winv; the Rp part
                // of dS is already inside Tmat.
                dZ_o[b] = symmetrized(
                    Tmat[b] -
                    Rinv[b].transpose() * (Rinv[b] * lin * Rinv[b].transpose()) * Rinv[b]);
                if (!dS_o[b].allFinite() || !dZ_o[b].allFinite()) return false;
            }
            return true;
        };

        // Predictor (affine scaling direction): target 0, i.e. Rc = -Lambda^2.
        for (size_t b = 0; b < nb; ++b) {
            Gaff[b] = Mat::Zero(sdp.blocks[b].dim, sdp.blocks[b].dim);
            Gaff[b].diagonal() = -lam[b];
        }
        Vec dxa(n);
        if (!solve_direction(Gaff, dxa, dSa, dZa)) {
            return finish("affine direction solve failed");
        }
        double apa = 1.0, ada = 1.0;
        for (size_t b = 0; b < nb; ++b) {
            apa = std::min(apa, detail::max_psd_step(lltS[b], dSa[b], 1.0));
            ada = std::min(ada, detail::max_psd_step(lltZ[b], dZa[b], 1.0));
        }
        double mu_aff = 0.0;
        for (size_t b = 0; b < nb; ++b) {
            mu_aff += (S[b] + apa * dSa[b]).cwiseProduct(Z[b] + ada * dZa[b]).sum();
        }
        mu_aff /= static_cast<double>(total_dim);
        const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

        // Corrector: Rc = sigma mu I - Lambda^2 - sym(dSt_aff dZt_aff).
        std::vector<Mat> Gcor(nb);
        for (size_t b = 0; b < nb; ++b) {
            const Mat dSt = Rinv[b] * dSa[b] * Rinv[b].transpose();
            const Mat dZt = Gaff[b] - dSt;
            Mat Rc = -0.5 * (dSt * dZt + dZt * dSt);
            Rc.diagonal().array() += sigma * mu;
            Rc.diagonal() -= lam[b].cwiseAbs2();
            const Eigen::Index d = sdp.blocks[b].dim;
            Gcor[b].resize(d, d);
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j < d; ++j)
                    Gcor[b](i, j) = (Rc(i, j) + Rc(j, i)) / (lam[b][i] + lam[b][j]);
        }
        Vec dx(n);
        if (!solve_direction(Gcor, dx, dS, dZ)) {
            return finish("corrector direction solve failed");
        }

        double ap = 1.0, ad = 1.0;
        for (size_t b = 0; b < nb; ++b) {
            ap = std::min(ap, 0.98 * detail::max_psd_step(lltS[b], dS[b], 1.0 / 0.98));
            ad = std::min(ad, 0.98 * detail::max_psd_step(lltZ[b], dZ[b], 1.0 / 0.98));
        }
        ap = std::min(ap, 1.0);
        ad = std::min(ad, 1.0);

        // The analytic boundary step can land on a numerically indefinite
        // iterate when cones are badly conditioned; accept only steps whose
        // Cholesky factorization verifiably succeeds, halving otherwise.
        Eigen::LLT<Mat> probe;
        auto pd_everywhere = [&](const std::vector<Mat>& base, const std::vector<Mat>& dir,
                                 double a) {
            for (size_t b = 0; b < nb; ++b) {
                if (!detail::llt_of(base[b] + a * dir[b], probe)) return false;
            }
            return true;
        };
        int halvings = 0;
        while (ap > 1e-12 && !pd_everywhere(S, dS, ap) && halvings < 40) {
            ap *= 0.5;
            ++halvings;
        }
        halvings = 0;
        while (ad > 1e-12 && !pd_everywhere(Z, dZ, ad) && halvings < 40) {
            ad *= 0.5;
            ++halvings;
        }
        if (ap < 1e-10 && ad < 1e-10) {
            return finish("step length collapsed");
        }

        x += ap * dx;
        for (size_t b = 0; b < nb; ++b) {
            S[b] = symmetrized(S[b] + ap * dS[b]);
            Z[b] = symmetrized(Z[b] + ad * dZ[b]);
        }
        if (!x.allFinite()) {
            return finish("iterate diverged");
        }
    }

    return finish("iteration limit reached");
}

// ---------------------------------------------------------------------------
// Primal log-det barrier backend (independent cross-check)
// ---------------------------------------------------------------------------

namespace detail {

// One centering problem: minimize t c'x - sum_b logdet F_b(x) from a strictly
// feasible start. Stops early once `stop` is satisfied at an accepted
// iterate. Returns false on numerical trouble.
inline bool barrier_center(const CanonicalSdp& sdp, double t, Vec& x, int max_newton = 60,
                           const std::function<bool(const Vec&)>* stop = nullptr) {
    const Eigen::Index n = sdp.nvars;
    const size_t nb = sdp.blocks.size();

    auto value = [&](const Vec& xv, double& phi) -> bool {
        phi = t * sdp.c.dot(xv);
        for (size_t b = 0; b < nb; ++b) {
            Eigen::LLT<Mat> l;
            if (!llt_of(sdp.blocks[b].eval(xv), l)) return false;
            phi -= 2.0 * Mat(l.matrixL()).diagonal().array().log().sum();
        }
        return true;
    };

    const double c_scale = 1.0 + sdp.c.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < max_newton; ++it) {
        if (stop && (*stop)(x)) return true;
        Vec g = t * sdp.c;
        Mat H = Mat::Zero(n, n);
        Eigen::LLT<Mat> llt;
        for (size_t b = 0; b < nb; ++b) {
            if (!llt_of(sdp.blocks[b].eval(x), llt)) return false;
            const Mat Li =
                llt.matrixL().solve(Mat::Identity(sdp.blocks[b].dim, sdp.blocks[b].dim));
            const Mat Finv = Li.transpose() * Li;
            Vec gb = Vec::Zero(n);
            accumulate_inner(sdp.blocks[b], Finv, gb);
            g -= gb;
            const Mat Sv = scaled_coeff_svec(sdp.blocks[b], Li);
            const auto& act = sdp.blocks[b].active;
            const Mat Hsub = Sv.transpose() * Sv;
            for (size_t p = 0; p < act.size(); ++p)
                for (size_t q = 0; q < act.size(); ++q)
                    H(act[p], act[q]) +=
                        Hsub(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q));
        }
        for (Eigen::Index i = 0; i < n; ++i)
            if (H(i, i) == 0.0) H(i, i) = 1.0;

        // g/t = c - A*(F^-1)/t is exactly the dual-feasibility residual of the
        // implied dual point Z = F^-1/t, so centering to a small scaled
        // gradient directly controls the certificate quality.
        const double scaled_res = g.lpNorm<Eigen::Infinity>() / (t * c_scale);
        if (scaled_res <= 1e-9) return true;

        Eigen::LDLT<Mat> ld(H);
        Vec dx = ld.solve(-g);
        if (!dx.allFinite()) {
            H.diagonal().array() += 1e-10 * (1.0 + H.trace() / std::max<Eigen::Index>(n, 1));
            ld.compute(H);
            dx = ld.solve(-g);
            if (!dx.allFinite()) return false;
        }
        const double dec2 = -g.dot(dx);  // Newton decrement squared
        if (dec2 <= 0.0) return scaled_res <= 1e-6;

        double phi0;
        if (!value(x, phi0)) return false;
        double step = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls) {
            double phi1;
            const Vec xn = x + step * dx;
            if (value(xn, phi1) &&
                phi1 <= phi0 - 1e-4 * step * dec2 + 1e-13 * (1.0 + std::abs(phi0))) {
                x = xn;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) return scaled_res <= 1e-6;  // stationary to line-search resolution
    }
    return true;
}

}  // namespace detail

inline RawSolution barrier_solve(const CanonicalSdp& sdp, const SolveOptions& opts) {
    RawSolution out;
    const Eigen::Index n = sdp.nvars;
    Eigen::Index total_dim = 0;
    for (const CanonicalBlock& b : sdp.blocks) total_dim += b.dim;
    if (sdp.blocks.empty()) {
        out.status = SolveStatus::optimal;
        out.x = Vec::Zero(n);
        out.pobj = out.dobj = 0.0;
        out.rel_gap = 0.0;
        return out;
    }

    // ---- Phase I: minimize s subject to F_b(x) + s I >= 0 plus a box
    // |x_i| <= R, -R <= s <= s_init + 1. The box keeps the problem bounded
    // and the Newton systems nonsingular; strict feasibility of the original
    // problem is certified as soon as s dips below zero.
    double s0 = 0.0;
    for (const CanonicalBlock& b : sdp.blocks) s0 = std::max(s0, -min_eigenvalue(b.F0));
    const double s_init = 1.0 + 1.1 * s0;
    const double R = 1e8;

    CanonicalSdp aug = sdp;
    aug.nvars = n + 1;
    aug.c = Vec::Zero(n + 1);
    aug.c[n] = 1.0;
    for (CanonicalBlock& b : aug.blocks) {
        std::vector<OuterPair> eye;
        for (Eigen::Index k = 0; k < b.dim; ++k) {
            Vec e = Vec::Zero(b.dim);
            e[k] = 1.0;
            eye.push_back({e, e, 0.5});
        }
        b.active.push_back(static_cast<int>(n));
        b.pairs.push_back(std::move(eye));
    }
    // Box blocks: diag(R + x, R + s) >= 0 and diag(R - x, s_hi - s) >= 0.
    for (int sign : {+1, -1}) {
        CanonicalBlock box;
        box.dim = n + 1;
        box.F0 = R * Mat::Identity(n + 1, n + 1);
        if (sign < 0) box.F0(n, n) = s_init + 1.0;  // upper bound for s
        box.margin = 0.0;
        for (Eigen::Index i = 0; i <= n; ++i) {
            Vec e = Vec::Zero(n + 1);
            e[i] = 1.0;
            box.active.push_back(static_cast<int>(i));
            box.pairs.push_back({OuterPair{e, e, 0.5 * sign}});
        }
        aug.blocks.push_back(std::move(box));
    }
    const Eigen::Index aug_dim = total_dim + 2 * (n + 1);

    Vec xs = Vec::Zero(n + 1);
    xs[n] = s_init;
    const std::function<bool(const Vec&)> stop = [&](const Vec& v) {
        return v[n] < -1e-9 * (1.0 + s0);
    };

    double t = 1.0 / (1.0 + s_init);
    bool strictly_feasible = false;
    int outer = 0;
    for (; outer < 60; ++outer) {
        if (!detail::barrier_center(aug, t, xs, 60, &stop)) break;
        if (stop(xs) || xs[n] < -1e-12) {
            strictly_feasible = true;
            break;
        }
        const double gap = static_cast<double>(aug_dim) / t;
        if (gap < 0.25 * std::max(xs[n], 1e-300)) {
            // Centered with a positive slack floor: certifiably infeasible,
            // unless the box itself is the binding constraint.
            if (xs.head(n).lpNorm<Eigen::Infinity>() > 0.9 * R) {
                out.status = SolveStatus::numerical_failure;
                out.message = "phase one hit the variable box";
            } else {
                out.status = SolveStatus::infeasible;
                out.message = "phase-one slack stays positive";
            }
            out.iterations = outer;
            return out;
        }
        t *= 4.0;
    }
    if (!strictly_feasible) {
        out.status = SolveStatus::numerical_failure;
        out.message = "phase one stalled";
        return out;
    }

    Vec x = xs.head(n);

    // ---- Phase II on the original problem (skipped for pure feasibility).
    if (sdp.c.isZero(0.0)) {
        out.x = x;
        out.pobj = 0.0;
        out.iterations = outer;
        out.Z.resize(sdp.blocks.size());
        double dobj = 0.0;
        const double eta = 0.1 * opts.tol_gap / static_cast<double>(total_dim);
        for (size_t b = 0; b < sdp.blocks.size(); ++b) {
            Eigen::LLT<Mat> l;
            if (!detail::llt_of(sdp.blocks[b].eval(x), l)) {
                out.status = SolveStatus::numerical_failure;
                out.message = "feasible point lost strictness";
                return out;
            }
            const Mat Li =
                l.matrixL().solve(Mat::Identity(sdp.blocks[b].dim, sdp.blocks[b].dim));
            out.Z[b] = symmetrized(eta * (Li.transpose() * Li));
            dobj -= sdp.blocks[b].F0.cwiseProduct(out.Z[b]).sum();
        }
        out.dobj = dobj;
        out.rel_gap = 0.1 * opts.tol_gap;
        out.status = SolveStatus::optimal;
        out.message = "strictly feasible point";
        return out;
    }

    t = 1.0 / (1.0 + std::abs(sdp.c.dot(x)));
    int outer2 = 0;
    for (; outer2 < 64; ++outer2) {
        if (!detail::barrier_center(sdp, t, x)) {
            out.status = SolveStatus::numerical_failure;
            out.message = "centering failed";
            out.x = x;
            return out;
        }
        const double pobj = sdp.c.dot(x);
        const double gap = static_cast<double>(total_dim) / t;
        if (gap <= 0.5 * opts.tol_gap * (1.0 + std::abs(pobj))) break;
        t *= 8.0;
    }

    out.x = x;
    out.pobj = sdp.c.dot(x);
    out.iterations = outer + outer2;
    out.Z.resize(sdp.blocks.size());
    double dobj = 0.0;
    for (size_t b = 0; b < sdp.blocks.size(); ++b) {
        Eigen::LLT<Mat> l;
        if (!detail::llt_of(sdp.blocks[b].eval(x), l)) {
            out.status = SolveStatus::numerical_failure;
            out.message = "final iterate not strictly feasible";
            return out;
        }
        const Mat Li = l.matrixL().solve(Mat::Identity(sdp.blocks[b].dim, sdp.blocks[b].dim));
        out.Z[b] = symmetrized((Li.transpose() * Li) / t);
        dobj -= sdp.blocks[b].F0.cwiseProduct(out.Z[b]).sum();
    }
    out.dobj = dobj;
    out.rel_gap = static_cast<double>(total_dim) / t / (1.0 + std::abs(out.pobj) + std::abs(dobj));
    out.status = SolveStatus::optimal;
    out.message = "barrier path converged";
    return out;
}

// ---------------------------------------------------------------------------
// Backend registry and the verified solve() entry point
// ---------------------------------------------------------------------------

using BackendFn = std::function<RawSolution(const CanonicalSdp&, const SolveOptions&)>;

namespace detail {

struct Registry {
    std::mutex mu;
    std::map<std::string, BackendFn> backends;
    Registry() {
        backends["ipm"] = [](const CanonicalSdp& s, const SolveOptions& o) {
            return ipm_solve(s, o);
        };
        backends["barrier"] = [](const CanonicalSdp& s, const SolveOptions& o) {
            return barrier_solve(s, o);
        };
    }
};

inline Registry& registry() {
    static Registry r;
    return r;
}

}  // namespace detail

inline void register_backend(const std::string& name, BackendFn fn) {
    require(!name.empty(), "register_backend: name must be non-empty");
    auto& reg = detail::registry();
    std::lock_guard<std::mutex> lock(reg.mu);
    reg.backends[name] = std::move(fn);
}

inline std::vector<std::string> registered_backends() {
    auto& reg = detail::registry();
    std::lock_guard<std::mutex> lock(reg.mu);
    std::vector<std::string> names;
    for (const auto& [k, v] : reg.backends) names.push_back(k);
    return names;
}

inline std::string default_backend_name() {
    if (const char* env = std::getenv("PRIVCTL_SOLVER"); env && *env) return env;
    return "ipm";
}

// Solve and independently verify. A backend's "optimal" claim is accepted
// only if the returned point satisfies every LMI to tol_feas (dense
// eigendecomposition) and, when duals are supplied, the duality gap and dual
// feasibility are consistent; otherwise the result is demoted to
// numerical-failure.
inline LmiSolution solve(const LmiProblem& problem, SolveOptions opts = {}) {
    const CanonicalSdp sdp = canonicalize(problem);
    const std::string name = opts.backend.empty() ? default_backend_name() : opts.backend;
    BackendFn fn;
    {
        auto& reg = detail::registry();
        std::lock_guard<std::mutex> lock(reg.mu);
        auto it = reg.backends.find(name);
        if (it == reg.backends.end())
            throw InvalidInputError("solve: unknown backend '" + name + "'");
        fn = it->second;
    }
    const RawSolution raw = fn(sdp, opts);

    LmiSolution sol;
    sol.backend = name;
    sol.status = raw.status;
    sol.iterations = raw.iterations;
    sol.message = raw.message;
    sol.rel_gap = raw.rel_gap;

    if (raw.status != SolveStatus::optimal) {
        if (raw.x.size() == sdp.nvars) {
            for (size_t i = 0; i < sdp.vars.size(); ++i)
                sol.values[sdp.vars[i].name] = sdp.devectorize(static_cast<int>(i), raw.x);
        }
        return sol;
    }

    if (raw.x.size() != sdp.nvars || !raw.x.allFinite()) {
        sol.status = SolveStatus::numerical_failure;
        sol.message = "backend '" + name + "' rejected: malformed primal point";
        return sol;
    }

    // Primal feasibility, scaled per block.
    double worst = std::numeric_limits<double>::infinity();
    for (const CanonicalBlock& b : sdp.blocks) {
        const double scale = std::max(1.0, b.F0.norm());
        worst = std::min(worst, min_eigenvalue(b.eval(raw.x)) / scale);
    }
    if (sdp.blocks.empty()) worst = 0.0;
    sol.worst_violation = -std::min(worst, 0.0);
    sol.objective = sdp.c.dot(raw.x);

    bool ok = worst >= -opts.tol_feas;
    std::string why = ok ? "" : "constraint violated";

    if (ok && raw.Z.size() == sdp.blocks.size()) {
        double gap = 0.0;
        bool zpsd = true;
        double zmax = 0.0;
        Vec az = Vec::Zero(sdp.nvars);
        for (size_t b = 0; b < sdp.blocks.size(); ++b) {
            const CanonicalBlock& blk = sdp.blocks[b];
            if (raw.Z[b].rows() != blk.dim || !raw.Z[b].allFinite() ||
                min_eigenvalue(raw.Z[b]) < -opts.tol_feas * std::max(1.0, raw.Z[b].norm())) {
                zpsd = false;
                break;
            }
            gap += blk.eval(raw.x).cwiseProduct(raw.Z[b]).sum();
            detail::accumulate_inner(blk, raw.Z[b], az);
            zmax = std::max(zmax, raw.Z[b].lpNorm<Eigen::Infinity>());
        }
        if (!zpsd) {
            ok = false;
            why = "dual certificate not PSD";
        } else {
            const double dobj = sol.objective - gap;
            const double rel = gap / (1.0 + std::abs(sol.objective) + std::abs(dobj));
            // Dual residual scaled by the dual iterate: large multipliers
            // raise the attainable floor (same scaling the backend uses).
            const double dres = (sdp.c - az).lpNorm<Eigen::Infinity>() /
                                (1.0 + sdp.c.lpNorm<Eigen::Infinity>() + zmax);
            sol.rel_gap = rel;
            // Allow the backend's reduced-accuracy exit (gap <= 1e-6); tighter
            // gap requests still apply when they exceed that floor.
            if (rel > std::max(10.0 * opts.tol_gap, 2e-6) || rel < -1e-12) {
                ok = false;
                why = "duality gap too large";
            } else if (dres > 1e-5) {
                ok = false;
                why = "dual feasibility residual too large";
            }
        }
    }

    if (!ok) {
        sol.status = SolveStatus::numerical_failure;
        sol.message = "backend '" + name + "' rejected: " + why;
        return sol;
    }

    for (size_t i = 0; i < sdp.vars.size(); ++i)
        sol.values[sdp.vars[i].name] = sdp.devectorize(static_cast<int>(i), raw.x);
    return sol;
}

}  // namespace privctl
