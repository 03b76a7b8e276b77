// Command-line surface: invariants | verify | flow | ma | stability | report.
// Exit codes: 0 converged/stable/ok, 2 step budget or unstable, 3 precondition
// or configuration error, 4 monitor violation / verification failure, 5 I/O.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <CLI11.hpp>

#include "dhym/config.hpp"
#include "dhym/invariants.hpp"
#include "dhym/report.hpp"
#include "dhym/surface_ma.hpp"
#include "dhym/verify.hpp"

namespace fs = std::filesystem;
using namespace dhym;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBudget = 2;
constexpr int kExitPrecondition = 3;
constexpr int kExitMonitor = 4;
constexpr int kExitIo = 5;

struct Common {
    std::string config_path;
    std::string out_dir;
    std::string resume_path;
    int threads = 0;
};

std::string resolve(const Common& c, const std::string& path) {
    if (path.empty() || c.out_dir.empty() || fs::path(path).is_absolute()) return path;
    fs::create_directories(c.out_dir);
    return (fs::path(c.out_dir) / path).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path);
}

RealField initial_potential(const SpectralEngine& eng, const RunConfig& cfg) {
    RealField psi = build_field(eng, cfg.problem.psi0);
    const RealField phi = build_field(eng, cfg.problem.phi0);
    for (std::int64_t i = 0; i < psi.size(); ++i) psi[i] += phi[i];
    return psi;
}

int cmd_invariants(const Common& c, const RunConfig& cfg) {
    const GridSpec grid = make_grid(cfg.problem.n, cfg.problem.N, cfg.problem.point_budget);
    SpectralEngine eng(grid);
    const BundleSpec bundle = BundleSpec::make(KahlerData::make(cfg.problem.g), cfg.problem.B);
    const InvariantReport rep = compute_invariants(eng, bundle, initial_potential(eng, cfg));
    const std::string text = rep.to_kv_text();
    std::fputs(text.c_str(), stdout);
    if (!cfg.output.report.empty()) write_text(resolve(c, cfg.output.report), text);
    return kExitOk;
}

int cmd_verify(const RunConfig& cfg, const std::string& fault) {
    const VerifyReport rep = run_verify_battery(cfg.verify.seed, cfg.verify.samples, fault);
    std::fputs(rep.text().c_str(), stdout);
    if (!rep.all_pass) {
        std::fprintf(stderr, "verification failed: oracle '%s'\n", rep.first_failure().c_str());
        return kExitMonitor;
    }
    return kExitOk;
}

int cmd_flow(const Common& c, const RunConfig& cfg) {
    const GridSpec grid = make_grid(cfg.problem.n, cfg.problem.N, cfg.problem.point_budget);
    SpectralEngine eng(grid);
    const BundleSpec bundle = BundleSpec::make(KahlerData::make(cfg.problem.g), cfg.problem.B);
    FlowConfig fc = cfg.flow;
    fc.csv_path = resolve(c, cfg.output.csv);
    fc.checkpoint_path = resolve(c, cfg.output.checkpoint);

    FlowResult res;
    if (!c.resume_path.empty()) {
        res = resume_flow(eng, bundle, checkpoint_read(c.resume_path), fc);
    } else {
        res = run_flow(eng, bundle, initial_potential(eng, cfg), fc);
    }
    std::printf("status=%s\n", to_string(res.status));
    std::printf("steps=%lld\n", static_cast<long long>(res.state.step));
    std::printf("t=%.16e\n", res.state.t);
    std::printf("V=%.16e\n", res.state.stats.volume());
    std::printf("theta_hat=%.16e\n", res.state.theta_hat);
    std::printf("sup_theta_dev=%.16e\n", res.state.sup_theta_dev());
    std::printf("max_theta_hat_drift=%.16e\n", res.max_theta_hat_drift);
    std::printf("wall_seconds=%.3f\n", res.wall_seconds);
    if (!res.message.empty()) std::fprintf(stderr, "%s\n", res.message.c_str());
    switch (res.status) {
    case FlowStatus::Converged: return kExitOk;
    case FlowStatus::MaxSteps: return kExitBudget;
    case FlowStatus::MonitorViolation:
    case FlowStatus::NonFinite: return kExitMonitor;
    }
    return kExitMonitor;
}

int cmd_ma(const Common& c, const RunConfig& cfg) {
    if (cfg.problem.n != 2) {
        std::fprintf(stderr, "MA route requires n=2 (configured n=%d)\n", cfg.problem.n);
        return kExitPrecondition;
    }
    const GridSpec grid = make_grid(cfg.problem.n, cfg.problem.N, cfg.problem.point_budget);
    SpectralEngine eng(grid);
    const KahlerData g = KahlerData::make(cfg.problem.g);
    const RealField psi0 = build_field(eng, cfg.problem.psi0);

    const double a1 = trace(Mat(g.ginv * cfg.problem.B)).real();
    if (std::abs(a1) < 1e-14) {
        const RealField phi = degree_zero_solve(eng, g, cfg.problem.B, psi0);
        std::printf("status=Converged\nroute=degree_zero\nsup_phi=%.16e\n", max_abs(phi));
        if (!cfg.output.checkpoint.empty()) {
            CheckpointData ck;
            ck.n = grid.n;
            ck.N = grid.N;
            ck.config_hash = cfg.hash;
            ck.phi = phi;
            checkpoint_write(ck, resolve(c, cfg.output.checkpoint));
        }
        return kExitOk;
    }

    MAOptions opts = cfg.ma;
    opts.csv_path = resolve(c, cfg.output.csv);
    const MASetup setup = make_ma_setup(eng, g, cfg.problem.B, psi0, cfg.ma.eps_pos);
    const RealField phi0 = build_field(eng, cfg.problem.phi0);
    const MAResult res = ma_solve(eng, setup, phi0, opts);
    std::printf("status=%s\n", to_string(res.status));
    std::printf("route=ma\n");
    std::printf("steps=%lld\n", static_cast<long long>(res.steps));
    std::printf("theta_hat=%.16e\n", setup.theta_hat);
    std::printf("cot_theta_hat=%.16e\n", setup.cot_hat);
    std::printf("stability_margin=%.16e\n", setup.stability_margin);
    std::printf("residual_sup=%.16e\n", res.residual_sup);
    if (res.status == MAStatus::Converged) {
        std::printf("dhym_residual=%.16e\n", verify_dhym_equivalence(eng, setup, res.phi));
        if (!cfg.output.checkpoint.empty()) {
            CheckpointData ck;
            ck.n = grid.n;
            ck.N = grid.N;
            ck.config_hash = cfg.hash;
            ck.phi = res.phi;
            checkpoint_write(ck, resolve(c, cfg.output.checkpoint));
        }
    }
    if (!res.message.empty()) std::fprintf(stderr, "%s\n", res.message.c_str());
    switch (res.status) {
    case MAStatus::Converged: return kExitOk;
    case MAStatus::MaxSteps: return kExitBudget;
    case MAStatus::PositivityLoss: return kExitMonitor;
    }
    return kExitMonitor;
}

int cmd_stability(const RunConfig& cfg) {
    const KahlerData g = KahlerData::make(cfg.problem.g);
    const Mat K0 = g.isqrt * cfg.problem.B * g.isqrt;
    const auto ev = herm_eigenvalues(K0);
    double theta_const = 0.0;
    for (int j = 0; j < cfg.problem.n; ++j) theta_const += std::atan(ev[static_cast<std::size_t>(j)]);
    const StabilityResult r = stability_check(g, cfg.problem.B, theta_const, cfg.problem.n);
    std::printf("theta_hat=%.16e\n", theta_const);
    std::printf("stable=%d\n", r.stable ? 1 : 0);
    std::printf("margin=%.16e\n", r.margin);
    std::printf("reflected=%d\n", r.reflected ? 1 : 0);
    std::printf("degree_zero=%d\n", r.degree_zero ? 1 : 0);
    if (!r.note.empty()) std::printf("note=%s\n", r.note.c_str());
    return r.stable ? kExitOk : kExitBudget;
}

int cmd_report(const Common& c, const RunConfig& cfg) {
    if (cfg.output.csv.empty()) {
        std::fprintf(stderr, "report: no csv path configured in [output]\n");
        return kExitPrecondition;
    }
    const DiagnosticsTable t = read_diagnostics_csv(resolve(c, cfg.output.csv));
    const std::string text = render_report(t);
    std::fputs(text.c_str(), stdout);
    if (!cfg.output.report.empty()) write_text(resolve(c, cfg.output.report), text);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"deformed Hermitian-Yang-Mills solver on flat complex tori"};
    app.require_subcommand(1);
    app.footer("configuration grammar:\n" + config_grammar());

    Common common;
    std::string fault;
    auto add_common = [&](CLI::App* sub, bool with_resume = false) {
        sub->add_option("--config", common.config_path, "configuration file")->required();
        sub->add_option("--threads", common.threads, "worker thread bound (output-invariant)");
        sub->add_option("--out", common.out_dir, "directory for relative output paths");
        if (with_resume) sub->add_option("--resume", common.resume_path, "checkpoint to resume from");
    };

    CLI::App* inv = app.add_subcommand("invariants", "compute the invariant report of the configured metric");
    add_common(inv);
    CLI::App* ver = app.add_subcommand("verify", "run the identity-oracle battery");
    add_common(ver);
    ver->add_option("--inject-fault", fault, "flip a sign inside the named oracle (harness self-test)");
    CLI::App* flo = app.add_subcommand("flow", "run the line bundle mean curvature flow");
    add_common(flo, true);
    CLI::App* ma = app.add_subcommand("ma", "solve the n=2 Monge-Ampere route");
    add_common(ma);
    CLI::App* sta = app.add_subcommand("stability", "decide stability of the configured bundle");
    add_common(sta);
    CLI::App* rep = app.add_subcommand("report", "render a diagnostics stream as a text summary");
    add_common(rep);

    CLI11_PARSE(app, argc, argv);

    try {
        if (common.threads > 0) set_worker_threads(common.threads);
        const RunConfig cfg = load_config_file(common.config_path);
        if (inv->parsed()) return cmd_invariants(common, cfg);
        if (ver->parsed()) return cmd_verify(cfg, fault);
        if (flo->parsed()) return cmd_flow(common, cfg);
        if (ma->parsed()) return cmd_ma(common, cfg);
        if (sta->parsed()) return cmd_stability(cfg);
        if (rep->parsed()) return cmd_report(common, cfg);
    } catch (const IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIo;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitPrecondition;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitPrecondition;
    }
    return kExitPrecondition;
}
