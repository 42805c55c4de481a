#include <catch2/catch_amalgamated.hpp>

#include "privctl/privacy.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <complex>
#include <random>

using namespace privctl;

namespace {

bool approx_equal(const Mat& a, const Mat& b, double tol) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return (a - b).norm() <= tol * std::max(1.0, b.norm());
}

// Independent oracle for the Gaussian upper tail: composite Simpson
// quadrature of the standard normal density on [x, x + 14].
double tail_by_quadrature(double x) {
    if (x < 0.0) return 1.0 - tail_by_quadrature(-x);
    const int n = 40000;  // even
    const double hi = x + 14.0;
    const double h = (hi - x) / n;
    auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); };
    double s = pdf(x) + pdf(hi);
    for (int i = 1; i < n; ++i) s += pdf(x + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Independent oracle for the inverse tail: plain bisection on the
// quadrature-backed tail function.
double tail_inverse_by_bisection(double delta) {
    double lo = -10.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (tail_by_quadrature(mid) > delta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Mat random_matrix(std::mt19937_64& rng, int r, int c) {
    std::normal_distribution<double> g(0.0, 1.0);
    Mat M(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) M(i, j) = g(rng);
    return M;
}

Mat random_stable(std::mt19937_64& rng, int n, double rho) {
    Mat A = random_matrix(rng, n, n);
    return A * (rho / spectral_radius(A));
}

Mat random_spd(std::mt19937_64& rng, int n) {
    Mat M = random_matrix(rng, n, n);
    return Mat(M * M.transpose() + 0.2 * Mat::Identity(n, n));
}

Mat random_orthogonal(std::mt19937_64& rng, int n) {
    Eigen::HouseholderQR<Mat> qr(random_matrix(rng, n, n));
    Mat Q = qr.householderQ() * Mat::Identity(n, n);
    return Q;
}

Mat fixed_singular_values() {
    Vec s(3);
    s << 1.0, 1.5, 2.0;
    return s.asDiagonal();
}

// Independent frequency-response magnitude on a uniform unit-circle grid,
// written against the transfer function definition directly.
double grid_peak_oracle(const Mat& A, const Mat& B, const Mat& C, const Mat& D, int n_points) {
    using CMat = Eigen::MatrixXcd;
    double peak = 0.0;
    const Eigen::Index nx = A.rows();
    for (int k = 0; k < n_points; ++k) {
        const double th = 2.0 * M_PI * k / n_points;
        const std::complex<double> z(std::cos(th), std::sin(th));
        CMat zIA = z * CMat::Identity(nx, nx) - A.cast<std::complex<double>>();
        CMat G = C.cast<std::complex<double>>() * zIA.lu().solve(B.cast<std::complex<double>>()) +
                 D.cast<std::complex<double>>();
        peak = std::max(peak, Eigen::JacobiSVD<CMat>(G).singularValues()(0));
    }
    return peak;
}

double normal_sample(std::mt19937_64& rng) {
    const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
    const double u2 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

PlantModel two_state_unit_plant() {
    PlantModel p;
    p.A = 0.5 * Mat::Identity(2, 2);
    p.B = Mat::Identity(2, 2);
    p.C = Mat::Identity(2, 2);
    p.Cz = Mat::Identity(2, 2);
    p.D = Mat::Identity(2, 2);
    p.W = Mat::Identity(2, 2);
    p.V = Mat::Identity(2, 2);
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gaussian tail and inverse
// ---------------------------------------------------------------------------

TEST_CASE("gaussian tail matches quadrature oracle") {
    CHECK(gaussian_tail(0.0) == Catch::Approx(0.5).margin(1e-15));
    for (double x : {-2.0, -0.5, 0.3, 1.0, 1.6448536, 2.5, 4.0}) {
        CHECK(gaussian_tail(x) == Catch::Approx(tail_by_quadrature(x)).margin(1e-12));
    }
    // complementarity
    CHECK(gaussian_tail(1.3) + gaussian_tail(-1.3) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("inverse tail hits named quantiles") {
    CHECK(gaussian_tail_inverse(0.5) == Catch::Approx(0.0).margin(1e-12));
    CHECK(gaussian_tail_inverse(0.05) == Catch::Approx(1.6448536).margin(1e-6));
    CHECK(gaussian_tail_inverse(0.05) ==
          Catch::Approx(tail_inverse_by_bisection(0.05)).margin(1e-9));
}

TEST_CASE("tail round trip is tight across the delta grid") {
    for (double delta : {1e-5, 1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.3, 0.7, 0.95}) {
        const double x = gaussian_tail_inverse(delta);
        CHECK(std::abs(gaussian_tail(x) - delta) <= 1e-9);
        CHECK(std::abs(gaussian_tail(x) - delta) <= 1e-9 * std::max(delta, 1e-12));
    }
}

TEST_CASE("tail functions reject out-of-domain input") {
    CHECK_THROWS_AS(gaussian_tail_inverse(0.0), InvalidInputError);
    CHECK_THROWS_AS(gaussian_tail_inverse(1.0), InvalidInputError);
    CHECK_THROWS_AS(gaussian_tail_inverse(-0.3), InvalidInputError);
    CHECK_THROWS_AS(gaussian_tail(std::nan("")), InvalidInputError);
}

// ---------------------------------------------------------------------------
// kappa and calibration
// ---------------------------------------------------------------------------

TEST_CASE("kappa boundary example at delta = 1/2") {
    // K = 0 there, so kappa = 1/sqrt(2 eps); at eps = 2 that is 1/2.
    CHECK(kappa(0.5, 2.0) == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("kappa at (0.05, 1) against independent reconstruction") {
    const double K = tail_inverse_by_bisection(0.05);
    const double expected = (K + std::sqrt(K * K + 2.0)) / 2.0;
    CHECK(kappa(0.05, 1.0) == Catch::Approx(expected).margin(1e-9));
    CHECK(kappa(0.05, 1.0) == Catch::Approx(1.9072).margin(2e-4));
}

TEST_CASE("kappa satisfies its defining quadratic identity") {
    for (double delta : {1e-4, 0.01, 0.05, 0.2, 0.4}) {
        for (double eps : {0.1, 0.5, 1.0, 2.0, 7.0}) {
            const CalibrationResult r = kappa_full(delta, eps);
            const double lhs = std::pow(2.0 * eps * r.kappa - r.K_delta, 2.0);
            const double rhs = r.K_delta * r.K_delta + 2.0 * eps;
            CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, rhs));
        }
    }
}

TEST_CASE("kappa is strictly decreasing in epsilon") {
    double prev = std::numeric_limits<double>::infinity();
    for (double eps = 0.05; eps <= 20.0; eps *= 1.7) {
        const double k = kappa(0.05, eps);
        CHECK(k < prev);
        prev = k;
    }
}

TEST_CASE("mechanism calibration chains sensitivity, beta, kappa") {
    const CalibrationResult r = calibrate_mechanism(1.0, 1.0, 0.5, 2.0);
    CHECK(r.sigma == Catch::Approx(0.5).margin(1e-12));

    // linear in sensitivity and in beta
    const double base = calibrate_mechanism(1.0, 1.0, 0.05, 1.0).sigma;
    CHECK(calibrate_mechanism(3.0, 1.0, 0.05, 1.0).sigma == Catch::Approx(3.0 * base).epsilon(1e-12));
    CHECK(calibrate_mechanism(1.0, 2.5, 0.05, 1.0).sigma == Catch::Approx(2.5 * base).epsilon(1e-12));
    CHECK(calibrate_mechanism(0.0, 1.0, 0.05, 1.0).sigma == 0.0);

    CHECK_THROWS_AS(calibrate_mechanism(-1.0, 1.0, 0.05, 1.0), InvalidInputError);
    CHECK_THROWS_AS(calibrate_mechanism(1.0, 0.0, 0.05, 1.0), InvalidInputError);
    CHECK_THROWS_AS(kappa(0.05, 0.0), InvalidInputError);
    CHECK_THROWS_AS(kappa(0.6, 1.0), InvalidInputError);
}

TEST_CASE("privacy parameter validation") {
    PrivacyParams ok;
    CHECK_NOTHROW(ok.validate());
    PrivacyParams bad = ok;
    bad.delta = 0.5;
    CHECK_THROWS_AS(bad.validate(), InvalidInputError);
    bad = ok;
    bad.epsilon = -1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidInputError);
    bad = ok;
    bad.beta = 0.0;
    CHECK_THROWS_AS(bad.validate(), InvalidInputError);
}

TEST_CASE("adjacency predicate uses the stacked l2 norm") {
    Mat u1 = Mat::Zero(2, 3);
    Mat u2 = Mat::Zero(2, 3);
    u2(0, 0) = 0.6;
    u2(1, 2) = 0.8;  // distance exactly 1
    CHECK(adjacent(u1, u2, 1.0));
    CHECK_FALSE(adjacent(u1, u2, 0.99));
    CHECK_THROWS_AS(adjacent(u1, Mat::Zero(2, 2), 1.0), DimensionError);
}

// ---------------------------------------------------------------------------
// H-infinity norm
// ---------------------------------------------------------------------------

TEST_CASE("hinf norm of a static gain is its largest singular value") {
    Mat D(2, 2);
    D << 2.0, 0.0, 0.0, 1.0;
    CHECK(hinf_norm(Mat(0, 0), Mat(0, 2), Mat(2, 0), D) == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("hinf norm of a scalar lag matches the closed form") {
    Mat A(1, 1), B(1, 1), C(1, 1), D(1, 1);
    A << 0.5;
    B << 1.0;
    C << 1.0;
    D << 0.0;
    // peak of 1/|z - 0.5| on |z| = 1 is at z = 1: value 2
    CHECK(hinf_norm(A, B, C, D) == Catch::Approx(2.0).epsilon(2e-4));
}

TEST_CASE("hinf norm agrees with a dense frequency grid on random systems") {
    std::mt19937_64 rng(314);
    for (int trial = 0; trial < 4; ++trial) {
        const Mat A = random_stable(rng, 3, 0.6 + 0.1 * trial);
        const Mat B = random_matrix(rng, 3, 2);
        const Mat C = random_matrix(rng, 2, 3);
        const Mat D = 0.1 * random_matrix(rng, 2, 2);
        const double norm = hinf_norm(A, B, C, D);
        const double grid = grid_peak_oracle(A, B, C, D, 2048);
        CHECK(norm == Catch::Approx(grid).epsilon(1e-3));
        CHECK(norm + 1e-9 >= grid * (1.0 - 1e-6));  // certified upper bound
    }
}

TEST_CASE("hinf norm rejects unstable dynamics") {
    Mat A(1, 1), B(1, 1), C(1, 1), D(1, 1);
    A << 1.05;
    B << 1.0;
    C << 1.0;
    D << 0.0;
    CHECK_THROWS_AS(hinf_norm(A, B, C, D), StabilityError);
}

TEST_CASE("library grid evaluator matches the local oracle") {
    std::mt19937_64 rng(99);
    const Mat A = random_stable(rng, 3, 0.8);
    const Mat B = random_matrix(rng, 3, 1);
    const Mat C = random_matrix(rng, 1, 3);
    const Mat D = Mat::Zero(1, 1);
    CHECK(frequency_grid_peak(A, B, C, D, 512) ==
          Catch::Approx(grid_peak_oracle(A, B, C, D, 512)).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// Riccati error recursion
// ---------------------------------------------------------------------------

TEST_CASE("riccati fixed point matches scalar closed form") {
    PlantModel p;
    p.A = 0.5 * Mat::Identity(1, 1);
    p.B = Mat::Identity(1, 1);
    p.C = Mat::Identity(1, 1);
    p.Cz = Mat::Identity(1, 1);
    p.D = Mat::Identity(1, 1);
    p.W = Mat::Identity(1, 1);
    p.V = Mat::Identity(1, 1);
    const Mat Wp = Mat::Identity(1, 1);
    const Mat Vp = Mat::Identity(1, 1);
    const RiccatiPair r = riccati_error_covariance(p, Wp, Vp);
    // Sigma solves Sigma^2 - 0.5 Sigma - 4 = 0 with Psi = 2, R = 2.
    const double sigma_star = (0.5 + std::sqrt(0.25 + 16.0)) / 2.0;
    CHECK(r.prior(0, 0) == Catch::Approx(sigma_star).epsilon(1e-9));
    CHECK(r.posterior(0, 0) ==
          Catch::Approx(2.0 * sigma_star / (2.0 + sigma_star)).epsilon(1e-9));
    CHECK(r.prior(0, 0) == Catch::Approx(2.265564437).epsilon(1e-8));
}

TEST_CASE("riccati reduces to the lyapunov equation when C = 0") {
    std::mt19937_64 rng(2718);
    PlantModel p;
    p.A = random_stable(rng, 3, 0.85);
    p.B = random_matrix(rng, 3, 2);
    p.C = Mat::Zero(2, 3);
    p.Cz = Mat::Identity(3, 3);
    p.D = random_matrix(rng, 3, 2);
    p.W = random_spd(rng, 2);
    p.V = Mat::Identity(2, 2);
    const Mat Wp = random_spd(rng, 2);
    const Mat Vp = Mat::Zero(2, 2);
    const RiccatiPair r = riccati_error_covariance(p, Wp, Vp);
    const Mat Psi = p.D * p.W * p.D.transpose() + p.B * Wp * p.B.transpose();
    const Mat K = Mat::Identity(9, 9) - Eigen::kroneckerProduct(p.A, p.A);
    const Mat ref = Vec(K.fullPivLu().solve(Vec(Psi.reshaped()))).reshaped(3, 3);
    CHECK(approx_equal(r.prior, ref, 1e-8));
    CHECK(approx_equal(r.posterior, r.prior, 1e-12));
}

TEST_CASE("riccati converges for unstable but observed dynamics") {
    PlantModel p;
    p.A = 1.2 * Mat::Identity(1, 1);
    p.B = Mat::Identity(1, 1);
    p.C = Mat::Identity(1, 1);
    p.Cz = Mat::Identity(1, 1);
    p.D = Mat::Identity(1, 1);
    p.W = Mat::Identity(1, 1);
    p.V = Mat::Identity(1, 1);
    const RiccatiPair r =
        riccati_error_covariance(p, Mat::Identity(1, 1), Mat::Identity(1, 1));
    // Sigma solves Sigma^2 - 2.88 Sigma - 4 = 0 with Psi = 2, R = 2.
    const double sigma_star = (2.88 + std::sqrt(2.88 * 2.88 + 16.0)) / 2.0;
    CHECK(r.prior(0, 0) == Catch::Approx(sigma_star).epsilon(1e-9));
}

TEST_CASE("riccati reports divergence for unstable unobserved dynamics") {
    PlantModel p;
    p.A = 1.3 * Mat::Identity(1, 1);
    p.B = Mat::Identity(1, 1);
    p.C = Mat::Zero(1, 1);
    p.Cz = Mat::Identity(1, 1);
    p.D = Mat::Identity(1, 1);
    p.W = Mat::Identity(1, 1);
    p.V = Mat::Identity(1, 1);
    CHECK_THROWS_AS(riccati_error_covariance(p, Mat::Identity(1, 1), Mat::Zero(1, 1)),
                    DivergenceError);
}

TEST_CASE("riccati posterior matches an independently coded kalman filter") {
    PlantModel p;
    p.A = Mat(2, 2);
    p.A << 0.9, 0.2, 0.0, 0.7;
    p.B = Mat(2, 1);
    p.B << 0.0, 1.0;
    p.C = Mat(1, 2);
    p.C << 1.0, 0.0;
    p.Cz = Mat::Identity(2, 2);
    p.D = Mat(2, 1);
    p.D << 0.5, 0.3;
    p.W = 0.8 * Mat::Identity(1, 1);
    p.V = 0.5 * Mat::Identity(1, 1);
    const Mat Wp = 0.4 * Mat::Identity(1, 1);
    const Mat Vp = 0.3 * Mat::Identity(1, 1);
    const RiccatiPair r = riccati_error_covariance(p, Wp, Vp);

    // Standard time-varying Kalman filter, written from the textbook
    // predict/update equations; empirical posterior error covariance over
    // a long run is compared with batch-means standard errors.
    std::mt19937_64 rng(20260825);
    const Mat Psi = p.D * p.W * p.D.transpose() + p.B * Wp * p.B.transpose();
    const Mat R = p.V + Vp;
    const double sw = std::sqrt(p.W(0, 0)), swp = std::sqrt(Wp(0, 0));
    const double sv = std::sqrt(p.V(0, 0)), svp = std::sqrt(Vp(0, 0));

    Vec x = Vec::Zero(2), xh = Vec::Zero(2);
    Mat P = Psi;
    const int burn = 20000, steps = 200000, nbatch = 50;
    const int per = steps / nbatch;
    std::vector<Mat> batch_means;
    Mat acc = Mat::Zero(2, 2);
    int count = 0;
    for (int k = 0; k < burn + steps; ++k) {
        // truth
        const double w = sw * normal_sample(rng), wp = swp * normal_sample(rng);
        const double v = sv * normal_sample(rng), vp = svp * normal_sample(rng);
        x = p.A * x + p.B * Vec::Constant(1, wp) + p.D * Vec::Constant(1, w);
        const double y = (p.C * x)(0) + v + vp;
        // filter: predict then update
        xh = p.A * xh;
        P = p.A * P * p.A.transpose() + Psi;
        const Mat S = p.C * P * p.C.transpose() + R;
        const Mat K = P * p.C.transpose() * S.inverse();
        xh = xh + K * Vec::Constant(1, y - (p.C * xh)(0));
        P = (Mat::Identity(2, 2) - K * p.C) * P;
        if (k >= burn) {
            const Vec e = x - xh;
            acc += e * e.transpose();
            if (++count == per) {
                batch_means.push_back(acc / per);
                acc.setZero();
                count = 0;
            }
        }
    }
    REQUIRE(static_cast<int>(batch_means.size()) == nbatch);
    Mat mean = Mat::Zero(2, 2);
    for (const Mat& m : batch_means) mean += m;
    mean /= nbatch;
    Mat se = Mat::Zero(2, 2);
    for (const Mat& m : batch_means) se += (m - mean).cwiseProduct(m - mean);
    se = (se / (nbatch * (nbatch - 1.0))).cwiseSqrt();
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            CHECK(std::abs(mean(i, j) - r.posterior(i, j)) <= 3.0 * se(i, j) + 1e-12);
        }
    }
    // the filter's own converged P agrees with the fixed point too
    CHECK(approx_equal(P, r.posterior, 1e-8));
}

// ---------------------------------------------------------------------------
// Largest privacy loss for a prescribed error floor
// ---------------------------------------------------------------------------

TEST_CASE("epsilon floor bound matches hand formula on the two-state example") {
    const PlantModel p = two_state_unit_plant();
    const Mat Wp = Mat::Identity(2, 2);
    const Mat E = 0.5 * Mat::Identity(2, 2);  // trace 1
    const EpsilonFloorReport rep = max_epsilon_for_error_floor(p, Wp, E, 1.0, 0.05);
    // Psi = 2I, lmin = 2, smax(C) = 1, Cu^2 = 1:
    // bound = sqrt((2 - 1/2) / 1) = sqrt(1.5)
    CHECK(rep.bound == Catch::Approx(std::sqrt(1.5)).epsilon(1e-12));
    CHECK(rep.epsilon == Catch::Approx(std::sqrt(1.5)).margin(2e-6));
    // sigma consistent with the mechanism at the returned epsilon
    const double sig = calibrate_mechanism(1.0, 1.0, 0.05, rep.epsilon).sigma;
    CHECK(rep.sigma == Catch::Approx(sig).epsilon(1e-12));
    CHECK(approx_equal(rep.Vp, Mat(sig * sig * Mat::Identity(2, 2) - p.V), 1e-12));
    CHECK(min_eigenvalue(rep.Vp) >= -1e-12);
}

TEST_CASE("epsilon floor bound agrees with a dense scan") {
    const PlantModel p = two_state_unit_plant();
    const Mat Wp = Mat::Identity(2, 2);
    for (double tr : {0.6, 1.0, 2.0}) {
        const Mat E = (tr / 2.0) * Mat::Identity(2, 2);
        const EpsilonFloorReport rep = max_epsilon_for_error_floor(p, Wp, E, 1.0, 0.05);
        // scan: largest eps on a 1e-4 grid satisfying eps <= hand-computed rhs
        const double rhs = std::sqrt((2.0 - tr / 2.0) / tr);
        double best = 0.0;
        for (double eps = 1e-4; eps <= rhs + 1.0; eps += 1e-4) {
            if (eps <= rhs) best = eps;
        }
        CHECK(std::abs(rep.epsilon - best) <= 1.5e-4);
    }
}

TEST_CASE("epsilon floor bound decreases as the floor rises") {
    const PlantModel p = two_state_unit_plant();
    const Mat Wp = Mat::Identity(2, 2);
    double prev = std::numeric_limits<double>::infinity();
    for (double tr : {0.5, 1.0, 1.5, 2.0, 3.0}) {
        const Mat E = (tr / 2.0) * Mat::Identity(2, 2);
        const double eps = max_epsilon_for_error_floor(p, Wp, E, 1.0, 0.05).epsilon;
        CHECK(eps < prev);
        prev = eps;
    }
}

TEST_CASE("epsilon floor bound error paths") {
    const PlantModel p = two_state_unit_plant();
    const Mat Wp = Mat::Identity(2, 2);
    // floor at the open-loop ceiling: numerator hits zero
    CHECK_THROWS_AS(
        max_epsilon_for_error_floor(p, Wp, Mat(2.0 * Mat::Identity(2, 2)), 1.0, 0.05),
        NoValidEpsilonError);
    CHECK_THROWS_AS(
        max_epsilon_for_error_floor(p, Wp, Mat(2.1 * Mat::Identity(2, 2)), 1.0, 0.05),
        NoValidEpsilonError);
    // numerator positive but the admissible loss falls below the bracket
    const double tr_tiny = 4.0 * (1.0 - 1e-13);
    CHECK_THROWS_AS(
        max_epsilon_for_error_floor(p, Wp, Mat((tr_tiny / 2.0) * Mat::Identity(2, 2)), 1.0, 0.05),
        NoValidEpsilonError);
    // sensor noise already above the calibrated channel level
    PlantModel noisy = p;
    noisy.V = 25.0 * Mat::Identity(2, 2);
    CHECK_THROWS_AS(
        max_epsilon_for_error_floor(noisy, Wp, Mat(0.5 * Mat::Identity(2, 2)), 1.0, 0.05),
        CalibrationInfeasibleError);
}

TEST_CASE("epsilon floor bound is invariant to disturbance re-coordinatization") {
    std::mt19937_64 rng(424242);
    PlantModel p;
    p.A = random_stable(rng, 3, 0.8);
    p.B = random_matrix(rng, 3, 2);
    p.C = random_matrix(rng, 2, 3);
    p.Cz = Mat::Identity(3, 3);
    // D with singular values {1, 1.5, 2} so the noise floor stays well above E
    p.D = random_orthogonal(rng, 3) * fixed_singular_values() * random_orthogonal(rng, 3).transpose();
    p.W = random_spd(rng, 3);
    p.V = 0.01 * Mat::Identity(2, 2);
    const Mat Wp = random_spd(rng, 2);
    const Mat E = 0.05 * Mat::Identity(3, 3);

    const EpsilonFloorReport r1 = max_epsilon_for_error_floor(p, Wp, E, 1.0, 0.05);

    const Mat U = random_orthogonal(rng, 3);
    PlantModel q = p;
    q.D = p.D * U;
    q.W = symmetrized(U.transpose() * p.W * U);
    const EpsilonFloorReport r2 = max_epsilon_for_error_floor(q, Wp, E, 1.0, 0.05);

    CHECK(r1.epsilon == Catch::Approx(r2.epsilon).epsilon(1e-10));
    CHECK(r1.sigma == Catch::Approx(r2.sigma).epsilon(1e-10));
    CHECK(approx_equal(r1.Vp, r2.Vp, 1e-10));
}

TEST_CASE("epsilon floor bound clamps the slack to its stated range") {
    const PlantModel p = two_state_unit_plant();
    const Mat Wp = Mat::Identity(2, 2);
    const Mat E = 0.5 * Mat::Identity(2, 2);

    // Slack values outside [1e-5, 1e-1] are pulled to the nearest edge, so
    // out-of-range requests reproduce the edge results exactly.
    const EpsilonFloorReport hi_edge = max_epsilon_for_error_floor(p, Wp, E, 1.0, 1e-1);
    const EpsilonFloorReport above = max_epsilon_for_error_floor(p, Wp, E, 1.0, 0.3);
    CHECK(above.sigma == hi_edge.sigma);
    CHECK(above.K_delta == hi_edge.K_delta);

    const EpsilonFloorReport lo_edge = max_epsilon_for_error_floor(p, Wp, E, 1.0, 1e-5);
    const EpsilonFloorReport below = max_epsilon_for_error_floor(p, Wp, E, 1.0, 1e-7);
    CHECK(below.sigma == lo_edge.sigma);
    CHECK(below.K_delta == lo_edge.K_delta);

    // In range, the slack is used as given.
    const EpsilonFloorReport mid = max_epsilon_for_error_floor(p, Wp, E, 1.0, 0.05);
    CHECK(mid.K_delta != hi_edge.K_delta);
    CHECK(mid.K_delta != lo_edge.K_delta);
}

TEST_CASE("cu index ties break toward the lowest state index") {
    PlantModel p;
    p.A = 0.5 * Mat::Identity(2, 2);
    p.B = Mat::Identity(2, 2);
    p.C = Mat(1, 2);
    p.C << 1.0, 1.0;
    p.Cz = Mat::Identity(2, 2);
    p.D = Mat::Identity(2, 2);
    p.W = Mat::Identity(2, 2);
    p.V = 0.01 * Mat::Identity(1, 1);
    const EpsilonFloorReport rep = max_epsilon_for_error_floor(
        p, Mat::Identity(2, 2), Mat(0.25 * Mat::Identity(2, 2)), 1.0, 0.05);
    CHECK(rep.cu_index == 0);
}
