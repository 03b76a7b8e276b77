#include "dhym/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "dhym/flow.hpp"

namespace dhym {

DiagnosticsCsv::~DiagnosticsCsv() { close(); }

void DiagnosticsCsv::open(const std::string& path, const std::string& route) {
    close();
    f_ = std::fopen(path.c_str(), "wb");
    if (!f_) throw Error("DiagnosticsCsv: cannot open " + path);
    route_ = route;
    std::fprintf(f_, "# dhym-diag-1\n");
    std::fprintf(f_, "t,dt,V,abs_Z,theta_hat,min_theta,max_theta,sup_theta_dev,max_v,max_H_sq_eta,"
                     "max_grad_F_sq,min_lambda,max_lambda,min_eig_omega,max_kappa,route\n");
}

void DiagnosticsCsv::add(const DiagnosticsRecord& r) {
    if (!f_) return;
    std::fprintf(f_,
                 "%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,"
                 "%.16e,%.16e,%s\n",
                 r.t, r.dt, r.V, r.abs_Z, r.theta_hat, r.theta_min, r.theta_max, r.sup_theta_dev,
                 r.v_max, r.h_sq_max, r.grad_F_sq_max, r.lam_min, r.lam_max, r.omega_min_eig,
                 r.kappa_max, route_.c_str());
}

void DiagnosticsCsv::close() {
    if (f_) {
        std::fclose(f_);
        f_ = nullptr;
    }
}

DiagnosticsTable read_diagnostics_csv(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw Error("read_diagnostics_csv: cannot open " + path);
    DiagnosticsTable t;
    char line[4096];
    if (!std::fgets(line, sizeof(line), f) || std::strncmp(line, "# dhym-diag-1", 13) != 0) {
        std::fclose(f);
        throw Error("read_diagnostics_csv: missing dhym-diag-1 stamp in " + path);
    }
    if (!std::fgets(line, sizeof(line), f)) {
        std::fclose(f);
        throw Error("read_diagnostics_csv: missing header row");
    }
    {
        std::string h(line);
        while (!h.empty() && (h.back() == '\n' || h.back() == '\r')) h.pop_back();
        std::stringstream ss(h);
        std::string col;
        while (std::getline(ss, col, ',')) t.columns.push_back(col);
    }
    while (std::fgets(line, sizeof(line), f)) {
        std::string h(line);
        while (!h.empty() && (h.back() == '\n' || h.back() == '\r')) h.pop_back();
        if (h.empty()) continue;
        std::stringstream ss(h);
        std::string cell;
        std::vector<double> row;
        std::string route;
        std::size_t ci = 0;
        while (std::getline(ss, cell, ',')) {
            if (ci + 1 == t.columns.size()) route = cell;
            else row.push_back(std::strtod(cell.c_str(), nullptr));
            ++ci;
        }
        if (ci != t.columns.size()) {
            std::fclose(f);
            throw Error("read_diagnostics_csv: ragged row in " + path);
        }
        t.rows.push_back(std::move(row));
        t.route = route;
    }
    std::fclose(f);
    return t;
}

std::string render_report(const DiagnosticsTable& t) {
    std::ostringstream os;
    os << "diagnostics summary (" << t.rows.size() << " records, route=" << t.route << ")\n";
    if (t.rows.empty()) return os.str();
    const std::size_t ncols = t.columns.size() - 1; // trailing route column
    os << "  column                 first            last             min              max\n";
    for (std::size_t c = 0; c < ncols; ++c) {
        double mn = t.rows[0][c], mx = t.rows[0][c];
        for (const auto& r : t.rows) {
            mn = std::min(mn, r[c]);
            mx = std::max(mx, r[c]);
        }
        char buf[256];
        std::snprintf(buf, sizeof(buf), "  %-20s %16.8e %16.8e %16.8e %16.8e\n", t.columns[c].c_str(),
                      t.rows.front()[c], t.rows.back()[c], mn, mx);
        os << buf;
    }
    return os.str();
}

} // namespace dhym
