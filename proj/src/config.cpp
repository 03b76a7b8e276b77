#include "dhym/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dhym/checkpoint.hpp"

namespace dhym {

namespace {

struct Item {
    int line;
    std::string key;
    std::string value;
};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

class Collector {
public:
    void add(int line, const std::string& msg) {
        errors_ += "  line " + std::to_string(line) + ": " + msg + "\n";
        ++count_;
    }
    void require(bool ok, int line, const std::string& msg) {
        if (!ok) add(line, msg);
    }
    bool failed() const { return count_ > 0; }
    void raise_if_failed() const {
        if (count_ > 0) throw Error("configuration has " + std::to_string(count_) + " problem(s):\n" + errors_);
    }

private:
    std::string errors_;
    int count_ = 0;
};

bool parse_double(const std::string& s, double& out) {
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end && *end == '\0' && !s.empty();
}

bool parse_int(const std::string& s, long long& out) {
    const auto* b = s.data();
    const auto* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc{} && p == e;
}

// matrix grammar: "identity" | "diag v1 .. vn" | "full re00 im00 re01 im01 ..."
bool parse_matrix(const std::string& val, int n, Mat& out, Collector& errs, int line, const char* what) {
    auto toks = split_ws(val);
    if (toks.empty()) {
        errs.add(line, std::string(what) + ": empty matrix value");
        return false;
    }
    if (toks[0] == "identity") {
        if (toks.size() != 1) {
            errs.add(line, std::string(what) + ": 'identity' takes no arguments");
            return false;
        }
        out = Mat::identity(n);
        return true;
    }
    if (toks[0] == "diag") {
        if (static_cast<int>(toks.size()) != n + 1) {
            errs.add(line, std::string(what) + ": 'diag' needs exactly n = " + std::to_string(n) + " values");
            return false;
        }
        out = Mat(n);
        for (int i = 0; i < n; ++i) {
            double d;
            if (!parse_double(toks[static_cast<std::size_t>(i + 1)], d)) {
                errs.add(line, std::string(what) + ": bad number '" + toks[static_cast<std::size_t>(i + 1)] + "'");
                return false;
            }
            out.at(i, i) = d;
        }
        return true;
    }
    if (toks[0] == "full") {
        if (static_cast<int>(toks.size()) != 2 * n * n + 1) {
            errs.add(line, std::string(what) + ": 'full' needs 2*n^2 = " + std::to_string(2 * n * n) +
                               " numbers (re im pairs, row-major)");
            return false;
        }
        out = Mat(n);
        for (int i = 0; i < n * n; ++i) {
            double re, im;
            if (!parse_double(toks[static_cast<std::size_t>(2 * i + 1)], re) ||
                !parse_double(toks[static_cast<std::size_t>(2 * i + 2)], im)) {
                errs.add(line, std::string(what) + ": bad complex entry " + std::to_string(i));
                return false;
            }
            out.a[static_cast<std::size_t>(i)] = cplx(re, im);
        }
        for (int r = 0; r < n; ++r)
            for (int c = r; c < n; ++c) {
                const cplx d = out.at(r, c) - std::conj(out.at(c, r));
                if (std::abs(d) > 1e-12) {
                    errs.add(line, std::string(what) + ": entries (" + std::to_string(r) + "," +
                                       std::to_string(c) + ") and (" + std::to_string(c) + "," +
                                       std::to_string(r) + ") are not conjugate (matrix must be Hermitian)");
                    return false;
                }
            }
        return true;
    }
    errs.add(line, std::string(what) + ": unknown matrix form '" + toks[0] + "' (use identity|diag|full)");
    return false;
}

// field grammar: "zero" | "none" | "band_limited seed=S bandwidth=B amplitude=A" | "file PATH"
bool parse_field(const std::string& val, FieldInit& out, Collector& errs, int line, const char* what) {
    auto toks = split_ws(val);
    if (toks.empty()) {
        errs.add(line, std::string(what) + ": empty field value");
        return false;
    }
    if (toks[0] == "zero" || toks[0] == "none") {
        out.kind = FieldInit::Kind::Zero;
        return true;
    }
    if (toks[0] == "band_limited") {
        out.kind = FieldInit::Kind::BandLimited;
        bool have_seed = false, have_bw = false, have_amp = false;
        for (std::size_t i = 1; i < toks.size(); ++i) {
            const auto eq = toks[i].find('=');
            if (eq == std::string::npos) {
                errs.add(line, std::string(what) + ": expected key=value, got '" + toks[i] + "'");
                return false;
            }
            const std::string k = toks[i].substr(0, eq), v = toks[i].substr(eq + 1);
            long long ll;
            double d;
            if (k == "seed" && parse_int(v, ll)) {
                out.seed = static_cast<std::uint64_t>(ll);
                have_seed = true;
            } else if (k == "bandwidth" && parse_int(v, ll)) {
                out.bandwidth = static_cast<int>(ll);
                have_bw = true;
            } else if (k == "amplitude" && parse_double(v, d)) {
                out.amplitude = d;
                have_amp = true;
            } else {
                errs.add(line, std::string(what) + ": bad band_limited parameter '" + toks[i] + "'");
                return false;
            }
        }
        if (!have_seed || !have_bw || !have_amp) {
            errs.add(line, std::string(what) + ": band_limited needs seed=, bandwidth=, amplitude=");
            return false;
        }
        return true;
    }
    if (toks[0] == "file") {
        if (toks.size() != 2) {
            errs.add(line, std::string(what) + ": 'file' needs exactly one path");
            return false;
        }
        out.kind = FieldInit::Kind::File;
        out.path = toks[1];
        if (!std::filesystem::exists(out.path)) {
            errs.add(line, std::string(what) + ": referenced file does not exist: " + out.path);
            return false;
        }
        return true;
    }
    errs.add(line, std::string(what) + ": unknown field form '" + toks[0] + "' (use zero|band_limited|file)");
    return false;
}

} // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    cfg.hash = fnv1a64(text);
    Collector errs;

    std::vector<std::pair<std::string, Item>> items; // (section, item)
    {
        std::stringstream ss(text);
        std::string raw;
        std::string section;
        int line = 0;
        while (std::getline(ss, raw)) {
            ++line;
            std::string s = trim(raw);
            if (s.empty() || s[0] == '#') continue;
            if (s.front() == '[') {
                if (s.back() != ']') {
                    errs.add(line, "malformed section header '" + s + "'");
                    continue;
                }
                section = s.substr(1, s.size() - 2);
                if (section != "problem" && section != "flow" && section != "ma" && section != "verify" &&
                    section != "output")
                    errs.add(line, "unknown section [" + section + "]");
                continue;
            }
            const auto eq = s.find('=');
            if (eq == std::string::npos) {
                errs.add(line, "expected key = value, got '" + s + "'");
                continue;
            }
            if (section.empty()) {
                errs.add(line, "key outside of any section: '" + s + "'");
                continue;
            }
            items.push_back({section, {line, trim(s.substr(0, eq)), trim(s.substr(eq + 1))}});
        }
    }

    // first pass: grid dimensions drive matrix parsing
    std::string g_val, b_val;
    int g_line = 0, b_line = 0;
    for (const auto& [section, it] : items) {
        if (section != "problem") continue;
        long long ll;
        if (it.key == "n") {
            if (!parse_int(it.value, ll)) errs.add(it.line, "n: not an integer");
            else cfg.problem.n = static_cast<int>(ll);
        } else if (it.key == "N") {
            if (!parse_int(it.value, ll)) errs.add(it.line, "N: not an integer");
            else cfg.problem.N = static_cast<int>(ll);
        }
    }
    if (cfg.problem.n < 1 || cfg.problem.n > 3) errs.add(0, "n must be 1, 2 or 3");
    if (cfg.problem.N % 2 != 0) errs.add(0, "N must be even");
    if (cfg.problem.N < 8) errs.add(0, "N must be >= 8");

    cfg.problem.g = Mat::identity(std::clamp(cfg.problem.n, 1, 3));
    cfg.problem.B = Mat(std::clamp(cfg.problem.n, 1, 3));

    for (const auto& [section, it] : items) {
        long long ll;
        double d;
        auto want_pos_double = [&](double& slot) {
            if (!parse_double(it.value, d) || !(d > 0)) errs.add(it.line, it.key + ": must be a positive number");
            else slot = d;
        };
        auto want_int = [&](auto& slot) {
            if (!parse_int(it.value, ll)) errs.add(it.line, it.key + ": not an integer");
            else slot = static_cast<std::decay_t<decltype(slot)>>(ll);
        };
        auto want_bool = [&](bool& slot) {
            if (it.value == "0" || it.value == "false") slot = false;
            else if (it.value == "1" || it.value == "true") slot = true;
            else errs.add(it.line, it.key + ": expected 0/1/true/false");
        };

        if (section == "problem") {
            if (it.key == "n" || it.key == "N") continue; // handled above
            else if (it.key == "g") { g_val = it.value; g_line = it.line; }
            else if (it.key == "B") { b_val = it.value; b_line = it.line; }
            else if (it.key == "psi0") parse_field(it.value, cfg.problem.psi0, errs, it.line, "psi0");
            else if (it.key == "phi0") parse_field(it.value, cfg.problem.phi0, errs, it.line, "phi0");
            else if (it.key == "point_budget") want_int(cfg.problem.point_budget);
            else errs.add(it.line, "unknown key '" + it.key + "' in [problem]");
        } else if (section == "flow") {
            if (it.key == "integrator") {
                if (it.value == "euler") cfg.flow.integrator = Integrator::Euler;
                else if (it.value == "rk4") cfg.flow.integrator = Integrator::RK4;
                else errs.add(it.line, "integrator: expected euler|rk4");
            } else if (it.key == "dt_safety") {
                if (!parse_double(it.value, d) || !(d > 0.0 && d <= 1.0))
                    errs.add(it.line, "dt_safety: must lie in (0, 1]");
                else cfg.flow.dt_safety = d;
            } else if (it.key == "tol_theta") want_pos_double(cfg.flow.tol_theta);
            else if (it.key == "max_steps") want_int(cfg.flow.max_steps);
            else if (it.key == "monitor_cadence") want_int(cfg.flow.monitor_cadence);
            else if (it.key == "monotonicity_slack") want_pos_double(cfg.flow.monotonicity_slack);
            else if (it.key == "grad_blowup_factor") want_pos_double(cfg.flow.grad_blowup_factor);
            else if (it.key == "theta_hat_drift_limit") want_pos_double(cfg.flow.theta_hat_drift_limit);
            else if (it.key == "require_hypercritical") want_bool(cfg.flow.require_hypercritical);
            else errs.add(it.line, "unknown key '" + it.key + "' in [flow]");
        } else if (section == "ma") {
            if (it.key == "eps_pos") want_pos_double(cfg.ma.eps_pos);
            else if (it.key == "tol_residual") want_pos_double(cfg.ma.tol_residual);
            else if (it.key == "max_steps") want_int(cfg.ma.max_steps);
            else if (it.key == "dt_safety") {
                if (!parse_double(it.value, d) || !(d > 0.0 && d <= 1.0))
                    errs.add(it.line, "dt_safety: must lie in (0, 1]");
                else cfg.ma.dt_safety = d;
            } else if (it.key == "monitor_cadence") want_int(cfg.ma.monitor_cadence);
            else errs.add(it.line, "unknown key '" + it.key + "' in [ma]");
        } else if (section == "verify") {
            if (it.key == "seed") want_int(cfg.verify.seed);
            else if (it.key == "samples") {
                want_int(cfg.verify.samples);
                if (cfg.verify.samples < 1) errs.add(it.line, "samples: must be >= 1");
            } else errs.add(it.line, "unknown key '" + it.key + "' in [verify]");
        } else if (section == "output") {
            if (it.key == "csv") cfg.output.csv = it.value;
            else if (it.key == "checkpoint") cfg.output.checkpoint = it.value;
            else if (it.key == "report") cfg.output.report = it.value;
            else if (it.key == "mode") {
                static const char* modes[] = {"invariants", "verify", "flow", "ma", "stability", "report"};
                bool ok = false;
                for (const char* m : modes) ok = ok || it.value == m;
                if (!ok) errs.add(it.line, "mode: unknown mode '" + it.value + "'");
                else cfg.output.mode = it.value;
            } else errs.add(it.line, "unknown key '" + it.key + "' in [output]");
        }
    }

    if (!errs.failed()) {
        if (!g_val.empty()) parse_matrix(g_val, cfg.problem.n, cfg.problem.g, errs, g_line, "g");
        if (!b_val.empty()) parse_matrix(b_val, cfg.problem.n, cfg.problem.B, errs, b_line, "B");
    }
    if (!errs.failed()) {
        // structural checks that need the parsed values
        try {
            (void)KahlerData::make(cfg.problem.g);
        } catch (const Error& e) {
            errs.add(g_line, std::string("g: ") + e.what());
        }
        if (!is_hermitian(cfg.problem.B)) errs.add(b_line, "B: matrix must be Hermitian");
        for (const FieldInit* f : {&cfg.problem.psi0, &cfg.problem.phi0}) {
            if (f->kind == FieldInit::Kind::BandLimited) {
                if (f->bandwidth >= cfg.problem.N / 2) errs.add(0, "band_limited bandwidth must be < N/2");
                if (f->bandwidth < 0) errs.add(0, "band_limited bandwidth must be >= 0");
            }
        }
    }
    errs.raise_if_failed();

    cfg.flow.config_hash = cfg.hash;
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

RealField build_field(const SpectralEngine& eng, const FieldInit& init) {
    switch (init.kind) {
    case FieldInit::Kind::Zero: return RealField(eng.grid());
    case FieldInit::Kind::BandLimited:
        return eng.random_band_limited(init.seed, init.bandwidth, init.amplitude);
    case FieldInit::Kind::File: {
        const CheckpointData d = checkpoint_read(init.path);
        if (d.n != eng.grid().n || d.N != eng.grid().N)
            throw Error("field file " + init.path + " has grid (n=" + std::to_string(d.n) + ", N=" +
                        std::to_string(d.N) + ") but the problem grid is (n=" +
                        std::to_string(eng.grid().n) + ", N=" + std::to_string(eng.grid().N) + ")");
        return d.phi;
    }
    }
    throw Error("build_field: unreachable");
}

std::string config_grammar() {
    return R"(# dhym configuration: sectioned key = value lines; '#' starts a comment.
[problem]
n = 2                      # complex dimension (1..3)
N = 32                     # samples per real axis (even, >= 8)
g = identity               # identity | diag v1..vn | full re im ... (row-major, Hermitian)
B = diag 3 3               # background curvature matrix, same grammar as g
psi0 = zero                # zero | band_limited seed=S bandwidth=B amplitude=A | file PATH
phi0 = band_limited seed=7 bandwidth=4 amplitude=0.05
point_budget = 30000000    # optional grid-size guard

[flow]
integrator = rk4           # euler | rk4
dt_safety = 0.8            # sigma in (0,1]
tol_theta = 1e-8
max_steps = 500000
monitor_cadence = 10
monotonicity_slack = 1e-10
grad_blowup_factor = 1000
theta_hat_drift_limit = 1e-9
require_hypercritical = 0

[ma]
eps_pos = 1e-6
tol_residual = 1e-8
max_steps = 400000
dt_safety = 0.8
monitor_cadence = 10

[verify]
seed = 1
samples = 1000

[output]
csv = diagnostics.csv
checkpoint = state.ckpt
report = report.txt
mode = flow                # optional; the CLI subcommand takes precedence
)";
}

} // namespace dhym
