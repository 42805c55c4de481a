#include <catch2/catch_amalgamated.hpp>

#include "privctl/lti.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <random>

using namespace privctl;

namespace {

bool approx_equal(const Mat& a, const Mat& b, double tol) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return (a - b).norm() <= tol * std::max(1.0, b.norm());
}

// Reference Lyapunov solve via the Kronecker linear system
// (I - A (x) A) vec(X) = vec(Q); independent of the doubling iteration.
Mat dlyap_kron(const Mat& A, const Mat& Q) {
    const Eigen::Index n = A.rows();
    const Mat K = Mat::Identity(n * n, n * n) - Eigen::kroneckerProduct(A, A);
    const Vec x = K.fullPivLu().solve(Vec(Q.reshaped()));
    return x.reshaped(n, n);
}

Mat random_stable(std::mt19937_64& rng, int n, double rho) {
    std::normal_distribution<double> g(0.0, 1.0);
    Mat A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = g(rng);
    return A * (rho / spectral_radius(A));
}

}  // namespace

TEST_CASE("discretize matches scalar closed form") {
    Mat A(1, 1), B(1, 1);
    A << -1.0;
    B << 1.0;
    auto [Ad, Bd] = discretize(A, B, 0.1);
    CHECK(Ad(0, 0) == Catch::Approx(std::exp(-0.1)).epsilon(1e-12));
    CHECK(Bd(0, 0) == Catch::Approx(1.0 - std::exp(-0.1)).epsilon(1e-12));
}

TEST_CASE("discretize double integrator is exact") {
    Mat A = Mat::Zero(2, 2);
    A(0, 1) = 1.0;
    Mat B = Mat::Zero(2, 1);
    B(1, 0) = 1.0;
    const double dt = 0.37;
    auto [Ad, Bd] = discretize(A, B, dt);
    Mat Ad_ref(2, 2), Bd_ref(2, 1);
    Ad_ref << 1.0, dt, 0.0, 1.0;
    Bd_ref << 0.5 * dt * dt, dt;
    CHECK(approx_equal(Ad, Ad_ref, 1e-14));
    CHECK(approx_equal(Bd, Bd_ref, 1e-14));
}

TEST_CASE("discretize zero dynamics gives identity and dt-scaled input") {
    Mat A = Mat::Zero(3, 3);
    Mat B = Mat::Identity(3, 2).eval();
    auto [Ad, Bd] = discretize(A, B, 0.5);
    CHECK(approx_equal(Ad, Mat::Identity(3, 3), 1e-14));
    CHECK(approx_equal(Bd, 0.5 * B, 1e-14));
}

TEST_CASE("discretize satisfies the semigroup property") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    Mat A(4, 4), B(4, 2);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) A(i, j) = g(rng);
        for (int j = 0; j < 2; ++j) B(i, j) = g(rng);
    }
    const double dt = 0.1;
    auto [A1, B1] = discretize(A, B, dt);
    auto [A2, B2] = discretize(A, B, 2.0 * dt);
    CHECK(approx_equal(A2, (A1 * A1).eval(), 1e-10));
    // One interval of B applied then propagated, plus a fresh interval.
    CHECK(approx_equal(B2, (A1 * B1 + B1).eval(), 1e-10));
}

TEST_CASE("discretize rejects bad inputs") {
    Mat A = Mat::Zero(2, 2), B = Mat::Zero(2, 1);
    CHECK_THROWS_AS(discretize(A, B, 0.0), InvalidInputError);
    CHECK_THROWS_AS(discretize(A, B, -1.0), InvalidInputError);
    CHECK_THROWS_AS(discretize(Mat::Zero(2, 3), B, 0.1), DimensionError);
}

TEST_CASE("is_schur_stable thresholds at unit spectral radius") {
    Mat A(1, 1);
    A << 0.999999;
    CHECK(is_schur_stable(A));
    A << 1.0;
    CHECK_FALSE(is_schur_stable(A));
    A << 1.05;
    CHECK_FALSE(is_schur_stable(A));
    CHECK(is_schur_stable(Mat::Zero(3, 3)));
}

TEST_CASE("dlyap_steady scalar closed form") {
    Mat A(1, 1), Q(1, 1);
    A << 0.5;
    Q << 1.0;
    const Mat X = dlyap_steady(A, Q);
    CHECK(X(0, 0) == Catch::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("dlyap_steady matches Kronecker reference on random stable systems") {
    std::mt19937_64 rng(29);
    for (double rho : {0.5, 0.9, 0.99}) {
        for (int n : {2, 4, 6}) {
            const Mat A = random_stable(rng, n, rho);
            Mat Q0(n, n);
            std::normal_distribution<double> g(0.0, 1.0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) Q0(i, j) = g(rng);
            const Mat Q = (Q0 * Q0.transpose()).eval();
            const Mat X = dlyap_steady(A, Q);
            CHECK(approx_equal(X, dlyap_kron(A, Q), 1e-9));
            CHECK((A * X * A.transpose() + Q - X).norm() <= 1e-10 * (1.0 + X.norm()));
            CHECK((X - X.transpose()).norm() <= 1e-12 * std::max(1.0, X.norm()));
        }
    }
}

TEST_CASE("dlyap_steady near the stability boundary") {
    Mat A(1, 1), Q(1, 1);
    A << 0.999999;
    Q << 1.0;
    const Mat X = dlyap_steady(A, Q);
    CHECK(X(0, 0) == Catch::Approx(1.0 / (1.0 - 0.999999 * 0.999999)).epsilon(1e-9));
}

TEST_CASE("dlyap_steady rejects unstable and malformed inputs") {
    Mat A(1, 1), Q(1, 1);
    A << 1.0;
    Q << 1.0;
    CHECK_THROWS_AS(dlyap_steady(A, Q), StabilityError);
    A << 1.2;
    CHECK_THROWS_AS(dlyap_steady(A, Q), StabilityError);
    Mat Qbad(2, 2);
    Qbad << 0.0, 1.0, -1.0, 0.0;
    CHECK_THROWS_AS(dlyap_steady(Mat::Zero(2, 2), Qbad), InvalidInputError);
}

TEST_CASE("dlyap_steady agrees with a Monte-Carlo trajectory") {
    Mat A(2, 2);
    A << 0.6, 0.2, -0.1, 0.4;
    Mat Q(2, 2);
    Q << 1.0, 0.3, 0.3, 0.5;
    const Mat X = dlyap_steady(A, Q);

    // Simulate x+ = A x + n, n ~ N(0, Q), and compare the time-average outer
    // product against X using batch-means standard errors.
    const Mat Lq = Eigen::LLT<Mat>(Q).matrixL();
    std::mt19937_64 rng(777);
    auto gauss = [&rng]() {
        // Explicit Box-Muller on 53-bit uniforms keeps this reproducible.
        const double u1 = ((rng() >> 11) + 0.5) * 0x1p-53;
        const double u2 = ((rng() >> 11) + 0.5) * 0x1p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };
    const int steps = 200000, burn = 20000, batches = 50;
    const int per_batch = (steps - burn) / batches;
    Vec x = Vec::Zero(2);
    std::vector<Mat> batch_mean(batches, Mat::Zero(2, 2));
    for (int k = 0; k < steps; ++k) {
        Vec n(2);
        n << gauss(), gauss();
        x = A * x + Lq * n;
        if (k >= burn) {
            const int b = std::min((k - burn) / per_batch, batches - 1);
            batch_mean[b] += x * x.transpose();
        }
    }
    Mat mean = Mat::Zero(2, 2), var = Mat::Zero(2, 2);
    for (auto& bm : batch_mean) bm /= per_batch;
    for (const auto& bm : batch_mean) mean += bm;
    mean /= batches;
    for (const auto& bm : batch_mean) var += (bm - mean).cwiseProduct(bm - mean);
    var /= (batches - 1);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const double se = std::sqrt(var(i, j) / batches);
            CHECK(std::abs(mean(i, j) - X(i, j)) <= 3.0 * se + 1e-12);
        }
    }
}

TEST_CASE("assemble_closed_loop block structure") {
    Mat A(2, 2), B(2, 1), C(1, 2), Cz(1, 2), D(2, 1), W(1, 1), V(1, 1);
    A << 0.5, 0.1, 0.0, 0.4;
    B << 1.0, 0.5;
    C << 1.0, 0.0;
    Cz << 0.0, 1.0;
    D << 0.2, 0.1;
    W << 2.0;
    V << 0.3;
    PlantModel plant(A, B, C, Cz, D, W, V);
    Mat Ac(2, 2), Bc(2, 1), Cc(1, 2);
    Ac << 0.1, 0.0, 0.2, 0.3;
    Bc << 1.0, -1.0;
    Cc << 0.5, 0.25;
    ControllerModel ctrl(Ac, Bc, Cc);
    Mat gw = Mat::Identity(1, 1) * 4.0;
    Mat gv = Mat::Identity(1, 1) * 5.0;

    const ClosedLoopModel loop = assemble_closed_loop(plant, ctrl, gw, gv);
    REQUIRE(loop.Acl.rows() == 4);
    REQUIRE(loop.Bcl.cols() == 1 + 1 + 1 + 1);
    CHECK(approx_equal(loop.Acl.topLeftCorner(2, 2), A, 1e-15));
    CHECK(approx_equal(loop.Acl.topRightCorner(2, 2), (B * Cc).eval(), 1e-15));
    CHECK(approx_equal(loop.Acl.bottomLeftCorner(2, 2), (Bc * C).eval(), 1e-15));
    CHECK(approx_equal(loop.Acl.bottomRightCorner(2, 2), Ac, 1e-15));
    CHECK(approx_equal(loop.Bcl.block(0, 0, 2, 1), D, 1e-15));
    CHECK(approx_equal(loop.Bcl.block(0, 1, 2, 1), B, 1e-15));
    CHECK(approx_equal(loop.Bcl.block(2, 2, 2, 1), Bc, 1e-15));
    CHECK(approx_equal(loop.Bcl.block(2, 3, 2, 1), Bc, 1e-15));
    CHECK(loop.Bcl.block(2, 0, 2, 2).isZero(0.0));
    CHECK(loop.Bcl.block(0, 2, 2, 2).isZero(0.0));
    CHECK(approx_equal(loop.Ccl, (Mat(1, 4) << 0.0, 1.0, 0.0, 0.0).finished(), 1e-15));
    Mat Ncov_ref = Mat::Zero(4, 4);
    Ncov_ref(0, 0) = 2.0;
    Ncov_ref(1, 1) = 0.25;
    Ncov_ref(2, 2) = 0.3;
    Ncov_ref(3, 3) = 0.2;
    CHECK(approx_equal(loop.Ncov, Ncov_ref, 1e-14));
}

TEST_CASE("assemble_closed_loop with zero controller reduces to open loop") {
    Mat A(1, 1), B(1, 1), C(1, 1), Cz(1, 1), D(1, 1), W(1, 1), V(1, 1);
    A << 0.5;
    B << 1.0;
    C << 1.0;
    Cz << 1.0;
    D << 1.0;
    W << 1.0;
    V << 1.0;
    PlantModel plant(A, B, C, Cz, D, W, V);
    ControllerModel zero(Mat::Zero(1, 1), Mat::Zero(1, 1), Mat::Zero(1, 1));
    Mat gw = Mat::Identity(1, 1) * 2.0;  // W_p = 0.5
    Mat gv = Mat::Identity(1, 1);

    const ClosedLoopModel loop = assemble_closed_loop(plant, zero, gw, gv);
    CHECK(approx_equal(loop.Acl, blkdiag({A, Mat::Zero(1, 1)}), 1e-15));
    // Var(x) = (D W D' + B W_p B') / (1 - A^2) = 1.5 / 0.75 = 2.
    const Mat Z = steady_output_covariance(loop);
    CHECK(Z(0, 0) == Catch::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("assemble_estimation_loop matches reduced error dynamics for restricted form") {
    Mat A(2, 2), B(2, 1), C(1, 2), Cz(1, 2), D(2, 2), W(2, 2), V(1, 1);
    A << 0.7, 0.2, 0.0, 0.5;
    B << 1.0, 0.3;
    C << 1.0, -0.5;
    Cz << 1.0, 0.0;
    D = Mat::Identity(2, 2);
    W = Mat::Identity(2, 2) * 0.8;
    V << 0.2;
    PlantModel plant(A, B, C, Cz, D, W, V);
    Mat Bh(2, 1);
    Bh << 0.4, 0.1;
    const EstimatorModel est = EstimatorModel::restricted(plant, Bh);
    CHECK(est.satisfies_restricted_identity(plant));

    const Mat gw = Mat::Identity(1, 1) * 2.5;  // W_p = 0.4
    const Mat gv = Mat::Identity(1, 1) * 4.0;  // V_p = 0.25

    // Channel mode: e+ = (A - Bh C) e + D w + B w_p - Bh (v + v_p).
    {
        const ClosedLoopModel loop =
            assemble_estimation_loop(plant, est, gw, gv, AdversaryMode::channel);
        REQUIRE(loop.Bcl.cols() == 2 + 1 + 1 + 1);
        const Mat E = steady_output_covariance(loop);
        const Mat Ae = A - Bh * C;
        const Mat Qe = D * W * D.transpose() + B * 0.4 * B.transpose() +
                       Bh * (0.2 + 0.25) * Bh.transpose();
        CHECK(approx_equal(E, dlyap_steady(Ae, Qe), 1e-9));
    }
    // Direct mode: the channel-noise column disappears.
    {
        const ClosedLoopModel loop =
            assemble_estimation_loop(plant, est, gw, gv, AdversaryMode::direct);
        REQUIRE(loop.Bcl.cols() == 2 + 1 + 1);
        const Mat E = steady_output_covariance(loop);
        const Mat Ae = A - Bh * C;
        const Mat Qe =
            D * W * D.transpose() + B * 0.4 * B.transpose() + Bh * 0.2 * Bh.transpose();
        CHECK(approx_equal(E, dlyap_steady(Ae, Qe), 1e-9));
    }
}

TEST_CASE("estimator restricted identity detects mismatch") {
    Mat A(1, 1), B(1, 1), C(1, 1), Cz(1, 1), D(1, 1), W(1, 1), V(1, 1);
    A << 0.5;
    B << 1.0;
    C << 1.0;
    Cz << 1.0;
    D << 1.0;
    W << 1.0;
    V << 1.0;
    PlantModel plant(A, B, C, Cz, D, W, V);
    EstimatorModel general(Mat::Identity(1, 1) * 0.9, Mat::Identity(1, 1) * 0.3,
                           EstimatorForm::general);
    CHECK_FALSE(general.satisfies_restricted_identity(plant));
}

TEST_CASE("model validation rejects inconsistent dimensions") {
    Mat A = Mat::Identity(2, 2) * 0.5;
    Mat B = Mat::Ones(2, 1), C = Mat::Ones(1, 2), Cz = Mat::Ones(1, 2), D = Mat::Ones(2, 1);
    Mat W = Mat::Identity(1, 1), V = Mat::Identity(1, 1);
    CHECK_THROWS_AS(PlantModel(A, Mat::Ones(3, 1), C, Cz, D, W, V), DimensionError);
    CHECK_THROWS_AS(PlantModel(A, B, C, Cz, D, Mat::Identity(2, 2), V), DimensionError);
    Mat Wneg(1, 1);
    Wneg << -1.0;
    CHECK_THROWS_AS(PlantModel(A, B, C, Cz, D, Wneg, V), InvalidInputError);
}
