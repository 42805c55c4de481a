#pragma once

// LMI modeling layer: matrix decision variables, affine block-grid
// constraints with an implied symmetric mirror, weighted-trace objectives,
// and canonicalization to a standard conic form
//
//   minimize c'x  subject to  F_b(x) = F_{b,0} + sum_i x_i F_{b,i} >= 0
//
// with one PSD cone per block. Symmetric variables vectorize with sqrt(2)
// off-diagonal scaling so Frobenius inner products carry over to dot
// products on x.

#include "privctl/common.hpp"

#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <utility>

namespace privctl {

enum class VarStructure { symmetric, full, diagonal };

struct MatrixVar {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    VarStructure structure = VarStructure::symmetric;
    Eigen::Index offset = 0;  // first scalar index in the packed vector

    Eigen::Index scalar_count() const {
        switch (structure) {
            case VarStructure::symmetric: return rows * (rows + 1) / 2;
            case VarStructure::full: return rows * cols;
            case VarStructure::diagonal: return rows;
        }
        return 0;
    }
};

// One affine term  left * V * right  (or left * V' * right).
struct LinTerm {
    int var = -1;
    bool transposed = false;
    Mat left, right;
};

// Affine matrix expression: sum of terms plus a constant.
class LinExpr {
  public:
    LinExpr() = default;

    explicit LinExpr(Mat constant) : rows_(constant.rows()), cols_(constant.cols()) {
        constant_ = std::move(constant);
    }

    static LinExpr variable(int var, Eigen::Index rows, Eigen::Index cols, bool transposed) {
        LinExpr e;
        e.rows_ = transposed ? cols : rows;
        e.cols_ = transposed ? rows : cols;
        e.constant_ = Mat::Zero(e.rows_, e.cols_);
        e.terms_.push_back({var, transposed, Mat::Identity(e.rows_, e.rows_),
                            Mat::Identity(e.cols_, e.cols_)});
        return e;
    }

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }
    const std::vector<LinTerm>& terms() const { return terms_; }
    const Mat& constant() const { return constant_; }

    LinExpr transpose() const {
        LinExpr e;
        e.rows_ = cols_;
        e.cols_ = rows_;
        e.constant_ = constant_.transpose();
        for (const LinTerm& t : terms_) {
            e.terms_.push_back({t.var, !t.transposed, t.right.transpose(), t.left.transpose()});
        }
        return e;
    }

    friend LinExpr operator+(LinExpr a, const LinExpr& b) {
        require_dims(a.rows_ == b.rows_ && a.cols_ == b.cols_,
                     "LinExpr: addition dimension mismatch");
        a.constant_ += b.constant_;
        a.terms_.insert(a.terms_.end(), b.terms_.begin(), b.terms_.end());
        return a;
    }

    friend LinExpr operator-(LinExpr a, const LinExpr& b) { return std::move(a) + (-1.0) * b; }

    friend LinExpr operator*(const Mat& m, LinExpr e) {
        require_dims(m.cols() == e.rows_, "LinExpr: left multiply dimension mismatch");
        e.constant_ = m * e.constant_;
        for (LinTerm& t : e.terms_) t.left = m * t.left;
        e.rows_ = m.rows();
        return e;
    }

    friend LinExpr operator*(LinExpr e, const Mat& m) {
        require_dims(e.cols_ == m.rows(), "LinExpr: right multiply dimension mismatch");
        e.constant_ = e.constant_ * m;
        for (LinTerm& t : e.terms_) t.right = t.right * m;
        e.cols_ = m.cols();
        return e;
    }

    friend LinExpr operator*(double s, LinExpr e) {
        e.constant_ *= s;
        for (LinTerm& t : e.terms_) t.left *= s;
        return e;
    }

    // Dense evaluation given per-variable values (used by round-trip checks).
    Mat eval(const std::vector<Mat>& values) const {
        Mat out = constant_;
        for (const LinTerm& t : terms_) {
            const Mat& v = values.at(static_cast<size_t>(t.var));
            out += t.left * (t.transposed ? v.transpose() : v) * t.right;
        }
        return out;
    }

  private:
    Eigen::Index rows_ = 0, cols_ = 0;
    std::vector<LinTerm> terms_;
    Mat constant_;
};

// Embed a 1x1 expression as expr * I_d (sum of e_i expr e_i').
inline LinExpr spread_scalar(const LinExpr& scalar, Eigen::Index d) {
    require_dims(scalar.rows() == 1 && scalar.cols() == 1,
                 "spread_scalar: expression must be 1x1");
    LinExpr out(Mat::Zero(d, d));
    for (Eigen::Index i = 0; i < d; ++i) {
        Mat e = Mat::Zero(d, 1);
        e(i, 0) = 1.0;
        out = std::move(out) + e * scalar * e.transpose();
    }
    return out;
}

// Symmetric block grid: cells are given for i <= j, the lower triangle is the
// transposed mirror.
struct GridConstraint {
    std::string label;
    std::vector<Eigen::Index> dims;
    std::map<std::pair<int, int>, LinExpr> cells;

    explicit GridConstraint(std::vector<Eigen::Index> dims_, std::string label_ = "")
        : label(std::move(label_)), dims(std::move(dims_)) {
        for (Eigen::Index d : dims) require(d >= 1, "GridConstraint: block dims must be positive");
    }

    Eigen::Index dim() const {
        Eigen::Index d = 0;
        for (Eigen::Index bd : dims) d += bd;
        return d;
    }

    Eigen::Index block_start(int i) const {
        Eigen::Index s = 0;
        for (int k = 0; k < i; ++k) s += dims[static_cast<size_t>(k)];
        return s;
    }

    void set(int i, int j, LinExpr e) {
        require(i >= 0 && j >= 0 && i < static_cast<int>(dims.size()) &&
                    j < static_cast<int>(dims.size()),
                "GridConstraint: cell index out of range");
        require(i <= j, "GridConstraint: set upper-triangle cells only; the mirror is implied");
        require_dims(e.rows() == dims[static_cast<size_t>(i)] &&
                         e.cols() == dims[static_cast<size_t>(j)],
                     "GridConstraint: cell shape must match block dims");
        cells.insert_or_assign({i, j}, std::move(e));
    }
};

// ---------------------------------------------------------------------------
// Canonical conic form
// ---------------------------------------------------------------------------

// alpha * (a b' + b a'); symmetric rank-<=2 building block of each F_{b,i}.
struct OuterPair {
    Vec a, b;
    double alpha = 0.0;
};

struct CanonicalBlock {
    std::string label;
    Eigen::Index dim = 0;
    Mat F0;                                   // constant term, margin included
    double margin = 0.0;                      // the shift applied to F0
    std::vector<int> active;                  // global scalar indices present
    std::vector<std::vector<OuterPair>> pairs;  // per active scalar

    // Dense F_i for the k-th active scalar.
    Mat coefficient(size_t k) const {
        Mat F = Mat::Zero(dim, dim);
        for (const OuterPair& p : pairs[k]) {
            F += p.alpha * (p.a * p.b.transpose() + p.b * p.a.transpose());
        }
        return F;
    }

    // F0 + sum_i x_i F_i.
    Mat eval(const Vec& x) const {
        Mat F = F0;
        for (size_t k = 0; k < active.size(); ++k) {
            const double xi = x[active[k]];
            if (xi == 0.0) continue;
            for (const OuterPair& p : pairs[k]) {
                const Mat ab = p.a * p.b.transpose();
                F += (xi * p.alpha) * (ab + ab.transpose());
            }
        }
        return F;
    }
};

struct CanonicalSdp {
    std::vector<MatrixVar> vars;  // offsets filled in
    Eigen::Index nvars = 0;
    Vec c;
    std::vector<CanonicalBlock> blocks;

    // Unpack one variable from the packed scalar vector.
    Mat devectorize(int var, const Vec& x) const {
        const MatrixVar& v = vars.at(static_cast<size_t>(var));
        Mat m = Mat::Zero(v.rows, v.cols);
        Eigen::Index k = v.offset;
        switch (v.structure) {
            case VarStructure::symmetric:
                for (Eigen::Index i = 0; i < v.rows; ++i) {
                    for (Eigen::Index j = i; j < v.cols; ++j, ++k) {
                        const double s = (i == j) ? 1.0 : 1.0 / std::sqrt(2.0);
                        m(i, j) = x[k] * s;
                        m(j, i) = x[k] * s;
                    }
                }
                break;
            case VarStructure::full:
                for (Eigen::Index i = 0; i < v.rows; ++i)
                    for (Eigen::Index j = 0; j < v.cols; ++j, ++k) m(i, j) = x[k];
                break;
            case VarStructure::diagonal:
                for (Eigen::Index i = 0; i < v.rows; ++i, ++k) m(i, i) = x[k];
                break;
        }
        return m;
    }

    std::vector<Mat> devectorize_all(const Vec& x) const {
        std::vector<Mat> out;
        out.reserve(vars.size());
        for (size_t i = 0; i < vars.size(); ++i) out.push_back(devectorize(static_cast<int>(i), x));
        return out;
    }

    // Pack per-variable values into the scalar vector (inverse of devectorize).
    Vec vectorize(const std::vector<Mat>& values) const {
        Vec x = Vec::Zero(nvars);
        for (size_t vi = 0; vi < vars.size(); ++vi) {
            const MatrixVar& v = vars[vi];
            const Mat& m = values.at(vi);
            require_dims(m.rows() == v.rows && m.cols() == v.cols,
                         "vectorize: value shape mismatch for " + v.name);
            Eigen::Index k = v.offset;
            switch (v.structure) {
                case VarStructure::symmetric:
                    for (Eigen::Index i = 0; i < v.rows; ++i)
                        for (Eigen::Index j = i; j < v.cols; ++j, ++k)
                            x[k] = (i == j) ? m(i, i) : std::sqrt(2.0) * 0.5 * (m(i, j) + m(j, i));
                    break;
                case VarStructure::full:
                    for (Eigen::Index i = 0; i < v.rows; ++i)
                        for (Eigen::Index j = 0; j < v.cols; ++j, ++k) x[k] = m(i, j);
                    break;
                case VarStructure::diagonal:
                    for (Eigen::Index i = 0; i < v.rows; ++i, ++k) x[k] = m(i, i);
                    break;
            }
        }
        return x;
    }
};

// ---------------------------------------------------------------------------
// Problem container
// ---------------------------------------------------------------------------

class LmiProblem {
  public:
    explicit LmiProblem(double margin = 1e-7) : margin_(margin) {
        require(margin >= 0.0, "LmiProblem: margin must be nonnegative");
    }

    int add_variable(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                     VarStructure structure) {
        require(rows >= 1 && cols >= 1, "LmiProblem: variable dims must be positive");
        if (structure != VarStructure::full) {
            require_dims(rows == cols, "LmiProblem: symmetric/diagonal variables must be square");
        }
        for (const MatrixVar& v : vars_) {
            require(v.name != name, "LmiProblem: duplicate variable name " + name);
        }
        vars_.push_back({name, rows, cols, structure, 0});
        return static_cast<int>(vars_.size()) - 1;
    }

    // Expression handles.
    LinExpr var(int id) const {
        const MatrixVar& v = checked(id);
        return LinExpr::variable(id, v.rows, v.cols, false);
    }
    LinExpr var_t(int id) const {
        const MatrixVar& v = checked(id);
        return LinExpr::variable(id, v.rows, v.cols, true);
    }
    static LinExpr constant(Mat m) { return LinExpr(std::move(m)); }
    static LinExpr zero(Eigen::Index r, Eigen::Index c) { return LinExpr(Mat::Zero(r, c)); }

    void add_constraint(GridConstraint g) {
        for (const auto& [ij, expr] : g.cells) {
            for (const LinTerm& t : expr.terms()) {
                require(t.var >= 0 && t.var < static_cast<int>(vars_.size()),
                        "LmiProblem: constraint references an undeclared variable");
            }
        }
        constraints_.push_back(std::move(g));
    }

    // minimize sum_k weight_k * tr(var_k)
    void set_objective(std::vector<std::pair<int, double>> trace_weights) {
        for (const auto& [id, w] : trace_weights) {
            const MatrixVar& v = checked(id);
            require_dims(v.rows == v.cols, "LmiProblem: trace objective needs a square variable");
            (void)w;
        }
        objective_ = std::move(trace_weights);
    }

    const std::vector<MatrixVar>& variables() const { return vars_; }
    const std::vector<GridConstraint>& constraints() const { return constraints_; }
    const std::vector<std::pair<int, double>>& objective() const { return objective_; }
    double margin() const { return margin_; }
    int variable_index(const std::string& name) const {
        for (size_t i = 0; i < vars_.size(); ++i)
            if (vars_[i].name == name) return static_cast<int>(i);
        throw InvalidInputError("LmiProblem: unknown variable " + name);
    }

  private:
    const MatrixVar& checked(int id) const {
        require(id >= 0 && id < static_cast<int>(vars_.size()),
                "LmiProblem: variable id out of range");
        return vars_[static_cast<size_t>(id)];
    }

    double margin_;
    std::vector<MatrixVar> vars_;
    std::vector<GridConstraint> constraints_;
    std::vector<std::pair<int, double>> objective_;
};

inline LmiProblem build_problem(std::vector<MatrixVar> vars, std::vector<GridConstraint> grids,
                                std::vector<std::pair<std::string, double>> trace_weights,
                                double margin = 1e-7) {
    LmiProblem p(margin);
    for (const MatrixVar& v : vars) p.add_variable(v.name, v.rows, v.cols, v.structure);
    for (GridConstraint& g : grids) p.add_constraint(std::move(g));
    std::vector<std::pair<int, double>> obj;
    for (const auto& [name, w] : trace_weights) obj.emplace_back(p.variable_index(name), w);
    p.set_objective(std::move(obj));
    return p;
}

// ---------------------------------------------------------------------------
// Canonicalization
// ---------------------------------------------------------------------------

namespace detail {

// Decompose the basis matrix of one packed scalar of a variable into
// elementary e_i e_j' pieces: E = sum gamma * e_i e_j'.
struct BasisPiece {
    Eigen::Index i, j;
    double gamma;
};

inline void scalar_basis(const MatrixVar& v, Eigen::Index k, std::vector<BasisPiece>& out) {
    out.clear();
    switch (v.structure) {
        case VarStructure::symmetric: {
            // k-th upper-triangle position, row-major.
            Eigen::Index i = 0, rem = k;
            while (rem >= v.rows - i) {
                rem -= v.rows - i;
                ++i;
            }
            const Eigen::Index j = i + rem;
            if (i == j) {
                out.push_back({i, i, 1.0});
            } else {
                const double g = 1.0 / std::sqrt(2.0);
                out.push_back({i, j, g});
                out.push_back({j, i, g});
            }
            break;
        }
        case VarStructure::full:
            out.push_back({k / v.cols, k % v.cols, 1.0});
            break;
        case VarStructure::diagonal:
            out.push_back({k, k, 1.0});
            break;
    }
}

}  // namespace detail

inline CanonicalSdp canonicalize(const LmiProblem& problem) {
    CanonicalSdp sdp;
    sdp.vars = problem.variables();
    Eigen::Index offset = 0;
    for (MatrixVar& v : sdp.vars) {
        v.offset = offset;
        offset += v.scalar_count();
    }
    sdp.nvars = offset;

    sdp.c = Vec::Zero(sdp.nvars);
    for (const auto& [id, w] : problem.objective()) {
        const MatrixVar& v = sdp.vars[static_cast<size_t>(id)];
        Eigen::Index k = v.offset;
        switch (v.structure) {
            case VarStructure::symmetric:
                for (Eigen::Index i = 0; i < v.rows; ++i) {
                    sdp.c[k] += w;  // diagonal entry of the packed triangle
                    k += v.rows - i;
                }
                break;
            case VarStructure::full:
                for (Eigen::Index i = 0; i < v.rows; ++i) sdp.c[v.offset + i * v.cols + i] += w;
                break;
            case VarStructure::diagonal:
                for (Eigen::Index i = 0; i < v.rows; ++i) sdp.c[v.offset + i] += w;
                break;
        }
    }

    std::vector<detail::BasisPiece> basis;
    for (const GridConstraint& g : problem.constraints()) {
        CanonicalBlock blk;
        blk.label = g.label;
        blk.dim = g.dim();

        // Constant part with the symmetric mirror, then the strictness shift.
        Mat F0 = Mat::Zero(blk.dim, blk.dim);
        for (const auto& [ij, expr] : g.cells) {
            const auto [bi, bj] = ij;
            const Eigen::Index r0 = g.block_start(bi), c0 = g.block_start(bj);
            const Mat& cst = expr.constant();
            F0.block(r0, c0, cst.rows(), cst.cols()) += cst;
            if (bi != bj) {
                F0.block(c0, r0, cst.cols(), cst.rows()) += cst.transpose();
            } else {
                require(is_symmetric(cst, 1e-12),
                        "canonicalize: non-symmetric grid (diagonal cell constant in " + g.label +
                            ")");
            }
        }
        blk.margin = problem.margin() * std::max(1.0, F0.norm());
        blk.F0 = F0 - blk.margin * Mat::Identity(blk.dim, blk.dim);

        // Linear part, one pair list per touched scalar.
        std::map<int, std::vector<OuterPair>> per_scalar;
        for (const auto& [ij, expr] : g.cells) {
            const auto [bi, bj] = ij;
            const Eigen::Index r0 = g.block_start(bi), c0 = g.block_start(bj);
            const bool diag_cell = (bi == bj);
            for (const LinTerm& t : expr.terms()) {
                const MatrixVar& v = sdp.vars[static_cast<size_t>(t.var)];
                const Eigen::Index nk = v.scalar_count();
                for (Eigen::Index k = 0; k < nk; ++k) {
                    detail::scalar_basis(v, k, basis);
                    for (const detail::BasisPiece& bp : basis) {
                        const Eigen::Index pi = t.transposed ? bp.j : bp.i;
                        const Eigen::Index pj = t.transposed ? bp.i : bp.j;
                        Vec a = Vec::Zero(blk.dim);
                        Vec b = Vec::Zero(blk.dim);
                        a.segment(r0, t.left.rows()) = t.left.col(pi);
                        b.segment(c0, t.right.cols()) = t.right.row(pj).transpose();
                        const double alpha = diag_cell ? 0.5 * bp.gamma : bp.gamma;
                        if (a.isZero(0.0) || b.isZero(0.0) || alpha == 0.0) continue;
                        per_scalar[static_cast<int>(v.offset + k)].push_back(
                            {std::move(a), std::move(b), alpha});
                    }
                }
            }
        }
        for (auto& [idx, plist] : per_scalar) {
            blk.active.push_back(idx);
            blk.pairs.push_back(std::move(plist));
        }
        sdp.blocks.push_back(std::move(blk));
    }

    // Probe: the pair representation is symmetric by construction, so compare
    // it against a direct cell-wise evaluation to catch grids whose diagonal
    // cells are not actually symmetric expressions.
    {
        std::mt19937_64 rng(0x5eedULL);
        std::normal_distribution<double> gauss(0.0, 1.0);
        Vec x(sdp.nvars);
        for (Eigen::Index i = 0; i < sdp.nvars; ++i) x[i] = gauss(rng);
        const std::vector<Mat> values = sdp.devectorize_all(x);
        for (size_t gi = 0; gi < problem.constraints().size(); ++gi) {
            const GridConstraint& g = problem.constraints()[gi];
            const CanonicalBlock& blk = sdp.blocks[gi];
            Mat direct = Mat::Zero(blk.dim, blk.dim);
            for (const auto& [ij, expr] : g.cells) {
                const auto [bi, bj] = ij;
                const Eigen::Index r0 = g.block_start(bi), c0 = g.block_start(bj);
                const Mat cell = expr.eval(values);
                direct.block(r0, c0, cell.rows(), cell.cols()) +=
                    cell - expr.constant();  // linear part only
                if (bi != bj)
                    direct.block(c0, r0, cell.cols(), cell.rows()) +=
                        (cell - expr.constant()).transpose();
            }
            const Mat viaPairs = blk.eval(x) - blk.F0;
            const double scale = std::max(1.0, direct.norm());
            if ((viaPairs - direct).norm() > 1e-10 * scale) {
                throw InvalidInputError(
                    "canonicalize: non-symmetric grid (diagonal cell of " + blk.label +
                    " has an asymmetric linear part)");
            }
        }
    }
    return sdp;
}

// ---------------------------------------------------------------------------
// Canonical-form text export (coordinate triplets, upper triangle)
// ---------------------------------------------------------------------------

inline std::string export_canonical_text(const CanonicalSdp& sdp) {
    std::ostringstream os;
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        return std::string(buf);
    };
    os << "privctl-canonical-sdp v1\n";
    os << "variables " << sdp.nvars << "\n";
    os << "blocks " << sdp.blocks.size() << "\n";
    os << "objective";
    for (Eigen::Index i = 0; i < sdp.nvars; ++i) {
        if (sdp.c[i] != 0.0) os << " " << i << ":" << num(sdp.c[i]);
    }
    os << "\n";
    for (size_t b = 0; b < sdp.blocks.size(); ++b) {
        const CanonicalBlock& blk = sdp.blocks[b];
        os << "block " << b << " dim " << blk.dim << " label " << (blk.label.empty() ? "-" : blk.label)
           << "\n";
        auto emit = [&](int var_plus1, const Mat& F) {
            for (Eigen::Index i = 0; i < F.rows(); ++i) {
                for (Eigen::Index j = i; j < F.cols(); ++j) {
                    if (F(i, j) != 0.0) {
                        os << var_plus1 << " " << i << " " << j << " " << num(F(i, j)) << "\n";
                    }
                }
            }
        };
        emit(0, blk.F0);
        for (size_t k = 0; k < blk.active.size(); ++k) {
            emit(blk.active[k] + 1, blk.coefficient(k));
        }
    }
    return os.str();
}

}  // namespace privctl
