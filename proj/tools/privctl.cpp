// Command-line front end: designs privacy noise + controller/estimator pairs
// from a JSON config, re-verifies stored designs, simulates closed loops, and
// runs the load-frequency-control privacy sweep.
//
// Exit codes: 0 success (design verified / checks passed), 1 configuration or
// I/O problem, 2 design infeasible, 3 produced-but-unverifiable result
// (certificate check or empirical check failed).

#include <CLI11.hpp>

#include "privctl/io.hpp"
#include "privctl/sim.hpp"
#include "privctl/verify.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace {

using namespace privctl;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitUnverified = 3;

void print_report(const VerificationReport& rep) {
    std::printf("verification:        %s\n", rep.pass ? "pass" : "FAIL");
    if (!rep.pass) std::printf("reason:              %s\n", rep.message.c_str());
    std::printf("closed-loop radius:  %.12g\n", rep.closed_loop_radius);
    std::printf("estimation radius:   %.12g\n", rep.estimation_radius);
    std::printf("performance margin:  %.12g\n", rep.performance_margin);
    std::printf("error margin:        %.12g\n", rep.error_margin);
    std::printf("tr(E_inf):           %.12g (optimal-filter floor %.12g)\n",
                rep.designed_error_trace, rep.kalman_floor_trace);
    if (rep.epsilon.valid) {
        std::printf("epsilon guarantee:   %.12g (noise floor sigma %.12g)\n", rep.epsilon.epsilon,
                    rep.epsilon.sigma);
    } else {
        std::printf("epsilon guarantee:   not available (%s)\n", rep.epsilon.message.c_str());
    }
}

// ---------------------------------------------------------------------------
// design
// ---------------------------------------------------------------------------

int run_design(const std::string& config_path, const std::string& out_path) {
    const Json cfg = load_json_file(config_path);
    detail::check_keys(cfg, "config", {"plant", "design", "privacy"});
    StoredDesign doc;
    doc.plant = plant_from_json(detail::need(cfg, "config", "plant"), "config.plant");
    doc.spec = design_from_json(detail::need(cfg, "config", "design"), "config.design");
    if (cfg.contains("privacy"))
        doc.privacy = privacy_from_json(cfg["privacy"], "config.privacy");

    // Shape and symmetry problems are configuration mistakes; a well-formed
    // bound that is not positive definite makes the design request itself
    // unsatisfiable.
    if (doc.spec.Zbar.rows() != doc.plant.nz() || doc.spec.Zbar.cols() != doc.plant.nz())
        detail::config_fail("config.design.Zbar", "must be nz-by-nz for this plant");
    if (doc.spec.Ebar.rows() != doc.plant.nx() || doc.spec.Ebar.cols() != doc.plant.nx())
        detail::config_fail("config.design.Ebar", "must be nx-by-nx for this plant");
    if (!is_symmetric(doc.spec.Zbar, 1e-8) || !is_symmetric(doc.spec.Ebar, 1e-8))
        detail::config_fail("config.design", "Zbar and Ebar must be symmetric");
    if (!is_pd(doc.spec.Zbar) || !is_pd(doc.spec.Ebar)) {
        std::fprintf(stderr, "infeasible: performance/error bound is not positive definite\n");
        return kExitInfeasible;
    }

    CodesignOutput out;
    try {
        out = codesign(doc.plant, doc.spec, doc.privacy);
    } catch (const InfeasibleError& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return kExitInfeasible;
    }
    doc.synthesis = out.synthesis;

    std::printf("variant:             %s\n", to_string(out.synthesis.variant));
    std::printf("objective:           %.12g\n", out.synthesis.objective);
    std::printf("tr(Wp):              %.12g\n", out.synthesis.Wp.trace());
    std::printf("tr(Vp):              %.12g\n", out.synthesis.Vp.trace());
    print_report(out.verification);

    write_text_file(out_path, to_json(doc, out.verification).dump(2) + "\n");
    std::printf("wrote: %s\n", out_path.c_str());
    return out.verification.pass ? kExitOk : kExitUnverified;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int run_verify(const std::string& result_path, const std::string& config_path) {
    const Json jdoc = load_json_file(result_path);
    StoredDesign doc = stored_design_from_json(jdoc, "result");
    if (!config_path.empty()) {
        const Json cfg = load_json_file(config_path);
        detail::check_keys(cfg, "config", {"plant", "design", "privacy"});
        if (cfg.contains("plant"))
            doc.plant = plant_from_json(cfg["plant"], "config.plant");
        if (cfg.contains("design"))
            doc.spec = design_from_json(cfg["design"], "config.design");
        if (cfg.contains("privacy"))
            doc.privacy = privacy_from_json(cfg["privacy"], "config.privacy");
    }
    const VerificationReport rep = verify_design(doc.plant, doc.synthesis, doc.spec, doc.privacy);
    print_report(rep);
    return rep.pass ? kExitOk : kExitUnverified;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

// Standard error of each empirical covariance entry from batch means over the
// post-burn-in tail; returns the largest |difference| / (3 SE + floor) over
// all entries, so a value <= 1 means every entry sits within three standard
// errors of the analytic target.
double worst_se_ratio(const Mat& samples, Eigen::Index burn_in, const Mat& analytic,
                      const Mat& empirical) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index total = samples.cols() - burn_in;
    const int batches = 50;
    const Eigen::Index len = total / batches;
    require(len >= 2, "simulate: horizon too short for batch statistics");
    std::vector<Mat> means;
    means.reserve(static_cast<size_t>(batches));
    for (int b = 0; b < batches; ++b) {
        Mat m = Mat::Zero(n, n);
        for (Eigen::Index t = 0; t < len; ++t) {
            const Vec c = samples.col(burn_in + b * len + t);
            m += c * c.transpose();
        }
        means.push_back(m / static_cast<double>(len));
    }
    Mat grand = Mat::Zero(n, n);
    for (const Mat& m : means) grand += m;
    grand /= static_cast<double>(batches);
    Mat var = Mat::Zero(n, n);
    for (const Mat& m : means) var += (m - grand).cwiseProduct(m - grand);
    var /= static_cast<double>(batches - 1);
    const Mat se = (var / static_cast<double>(batches)).cwiseSqrt();

    const double floor = 1e-9 * std::max(1.0, analytic.cwiseAbs().maxCoeff());
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double diff = std::abs(empirical(i, j) - analytic(i, j));
            worst = std::max(worst, diff / (3.0 * se(i, j) + floor));
        }
    return worst;
}

int run_simulate(const std::string& result_path, long horizon, std::uint64_t seed,
                 const std::string& out_path) {
    if (horizon < 1) throw ConfigError("--horizon must be >= 1");
    const StoredDesign doc = stored_design_from_json(load_json_file(result_path), "result");

    const VerificationReport rep = verify_design(doc.plant, doc.synthesis, doc.spec, doc.privacy);
    if (!rep.closed_loop_stable || !rep.estimation_stable) {
        std::fprintf(stderr, "cannot simulate: stored design is not stable (%s)\n",
                     rep.message.c_str());
        return kExitUnverified;
    }

    TrajectoryBundle bundle;
    try {
        bundle = simulate(doc.plant, doc.synthesis, doc.spec.adversary_mode, horizon, seed);
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "simulation diverged: %s\n", e.what());
        return kExitUnverified;
    }
    write_text_file(out_path, trajectory_csv(bundle));
    std::printf("wrote: %s\n", out_path.c_str());
    std::printf("horizon:             %ld (burn-in %ld, seed %" PRIu64 ")\n", bundle.horizon,
                bundle.burn_in, bundle.seed);

    std::printf("tr empirical Z:      %.12g (analytic %.12g)\n", bundle.empirical_Z.trace(),
                rep.Zinf.trace());
    std::printf("tr empirical E:      %.12g (analytic %.12g)\n", bundle.empirical_E.trace(),
                rep.Einf.trace());

    bool ok = true;
    if (bundle.horizon - bundle.burn_in >= 100) {
        const double rz =
            worst_se_ratio(bundle.performance, bundle.burn_in, rep.Zinf, bundle.empirical_Z);
        const double re =
            worst_se_ratio(bundle.errors, bundle.burn_in, rep.Einf, bundle.empirical_E);
        ok = rz <= 1.0 && re <= 1.0;
        std::printf("covariance check:    %s (worst |diff|/3SE: performance %.12g, error %.12g)\n",
                    ok ? "pass" : "FAIL", rz, re);
    } else {
        std::printf("covariance check:    skipped (horizon too short for batch statistics)\n");
    }
    return ok ? kExitOk : kExitUnverified;
}

// ---------------------------------------------------------------------------
// lfc-sweep
// ---------------------------------------------------------------------------

bool nondecreasing(const std::vector<double>& v) {
    for (size_t i = 0; i + 1 < v.size(); ++i)
        if (v[i + 1] < v[i] - 1e-9) return false;
    return true;
}

std::string trend_summary(const SweepTable& ch, const SweepTable& di) {
    std::string out;
    char line[256];
    auto emit = [&](const char* name, const char* verdict) {
        std::snprintf(line, sizeof line, "trend %-28s %s\n", name, verdict);
        out += line;
    };

    auto optimal_rows = [](const SweepTable& t) {
        std::vector<const SweepRow*> rows;
        for (const SweepRow& r : t.rows)
            if (r.status == "optimal") rows.push_back(&r);
        return rows;
    };
    const auto chr = optimal_rows(ch);
    const auto dir = optimal_rows(di);
    const size_t skipped = (ch.rows.size() - chr.size()) + (di.rows.size() - dir.size());
    if (skipped > 0) {
        std::snprintf(line, sizeof line, "note: %zu non-optimal row(s) excluded from trends\n",
                      skipped);
        out += line;
    }

    for (const auto* mode : {&chr, &dir}) {
        const char* tag = mode == &chr ? "wp-nondecreasing[channel]:" : "wp-nondecreasing[direct]:";
        if (mode->empty()) {
            emit(tag, "n/a");
            continue;
        }
        std::vector<double> sums;
        for (const SweepRow* r : *mode) sums.push_back(r->wp.sum());
        emit(tag, nondecreasing(sums) ? "ok" : "violated");
    }

    if (!chr.empty() && !dir.empty()) {
        bool ok = true;
        for (const SweepRow* d : dir)
            for (const SweepRow* c : chr)
                if (d->level == c->level && d->wp.sum() < c->wp.sum() - 1e-9) ok = false;
        emit("wp-direct>=channel:", ok ? "ok" : "violated");
    } else {
        emit("wp-direct>=channel:", "n/a");
    }

    if (!dir.empty()) {
        bool ok = true;
        for (const SweepRow* d : dir)
            if (d->vp.sum() > 1e-3) ok = false;
        emit("vp-direct-negligible:", ok ? "ok" : "violated");
    }
    if (!chr.empty()) {
        bool ok = true;
        for (const SweepRow* c : chr)
            if (c->vp.sum() <= c->wp.sum()) ok = false;
        emit("vp-channel-dominates-wp:", ok ? "ok" : "violated");
    }

    for (const auto* mode : {&chr, &dir}) {
        const char* tag =
            mode == &chr ? "perf-nondecreasing[channel]:" : "perf-nondecreasing[direct]:";
        if (mode->empty()) {
            emit(tag, "n/a");
            continue;
        }
        bool ok = true;
        const Eigen::Index areas = (*mode)[0]->perf_var.size();
        for (Eigen::Index a = 0; a < areas; ++a) {
            std::vector<double> per;
            for (const SweepRow* r : *mode) per.push_back(r->perf_var(a));
            if (!nondecreasing(per)) ok = false;
        }
        emit(tag, ok ? "ok" : "violated");
    }
    return out;
}

int run_lfc_sweep(const std::string& config_path, const std::string& out_path,
                  const std::vector<double>& level_override, const std::string& mode) {
    SweepConfig cfg;
    if (!config_path.empty())
        cfg = sweep_config_from_json(load_json_file(config_path), "config");
    if (!level_override.empty()) cfg.levels = level_override;

    const PlantModel plant = build_lfc(cfg.params);
    const Mat Zbar = cfg.zbar * Mat::Identity(plant.nz(), plant.nz());

    SweepTable channel, direct;
    if (mode == "channel" || mode == "both")
        channel = sweep_privacy(plant, cfg.levels, AdversaryMode::channel, Zbar, cfg.options);
    if (mode == "direct" || mode == "both")
        direct = sweep_privacy(plant, cfg.levels, AdversaryMode::direct, Zbar, cfg.options);

    SweepTable combined;
    combined.areas = cfg.params.areas();
    for (const SweepRow& r : channel.rows) combined.rows.push_back(r);
    for (const SweepRow& r : direct.rows) combined.rows.push_back(r);
    write_text_file(out_path, combined.csv());
    std::printf("wrote: %s (%zu rows)\n", out_path.c_str(), combined.rows.size());

    const std::string trends = trend_summary(channel, direct);
    const std::string trend_path = out_path + ".trends.txt";
    write_text_file(trend_path, trends);
    std::fputs(trends.c_str(), stdout);
    std::printf("wrote: %s\n", trend_path.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "privctl: co-design of privacy noise covariances and output-feedback\n"
        "controllers/estimators with certified covariance bounds.\n"
        "Set PRIVCTL_SOLVER=ipm|barrier to select the SDP backend."};
    app.require_subcommand(1);

    std::string config_path, out_path, result_path, mode = "both";
    long horizon = 200000;
    std::uint64_t seed = 2024;
    std::vector<double> levels;

    CLI::App* design = app.add_subcommand("design", "solve a co-design from a JSON config");
    design->add_option("--config", config_path, "JSON run configuration")->required();
    design->add_option("--out", out_path, "output design document")
        ->default_val("design-result.json");

    CLI::App* verify = app.add_subcommand("verify", "re-verify a stored design document");
    verify->add_option("result", result_path, "stored design document")->required();
    verify->add_option("--config", config_path, "optional config overriding plant/bounds");

    CLI::App* simulate = app.add_subcommand("simulate", "closed-loop Monte-Carlo rollout");
    simulate->add_option("result", result_path, "stored design document")->required();
    simulate->add_option("--horizon", horizon, "number of simulated steps");
    simulate->add_option("--seed", seed, "random seed");
    simulate->add_option("--out", out_path, "trajectory CSV path")->default_val("trajectory.csv");

    CLI::App* sweep = app.add_subcommand("lfc-sweep",
                                         "privacy-level sweep on the four-area "
                                         "load-frequency-control benchmark");
    sweep->add_option("--config", config_path, "optional JSON sweep configuration");
    sweep->add_option("--out", out_path, "sweep CSV path")->default_val("lfc-sweep.csv");
    sweep->add_option("--levels", levels, "privacy levels (comma separated)")->delimiter(',');
    sweep->add_option("--mode", mode, "adversary mode to sweep")
        ->check(CLI::IsMember({"channel", "direct", "both"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (design->parsed()) return run_design(config_path, out_path);
        if (verify->parsed()) return run_verify(result_path, config_path);
        if (simulate->parsed()) return run_simulate(result_path, horizon, seed, out_path);
        if (sweep->parsed()) return run_lfc_sweep(config_path, out_path, levels, mode);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const InfeasibleError& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return kExitInfeasible;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUnverified;
    }
    return kExitConfig;
}
