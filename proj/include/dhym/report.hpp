#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "dhym/core.hpp"

namespace dhym {

struct DiagnosticsRecord;

/// Diagnostics stream writer.  The column order is a public contract:
/// t,dt,V,abs_Z,theta_hat,min_theta,max_theta,sup_theta_dev,max_v,
/// max_H_sq_eta,max_grad_F_sq,min_lambda,max_lambda,min_eig_omega,
/// max_kappa,route  (format version dhym-diag-1).
class DiagnosticsCsv {
public:
    DiagnosticsCsv() = default;
    ~DiagnosticsCsv();
    DiagnosticsCsv(const DiagnosticsCsv&) = delete;
    DiagnosticsCsv& operator=(const DiagnosticsCsv&) = delete;

    void open(const std::string& path, const std::string& route);
    bool is_open() const { return f_ != nullptr; }
    void add(const DiagnosticsRecord& r);
    void close();

private:
    std::FILE* f_ = nullptr;
    std::string route_;
};

/// Parsed diagnostics stream (numeric columns only).
struct DiagnosticsTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::string route;
};

DiagnosticsTable read_diagnostics_csv(const std::string& path);

/// Plain-text summary of a diagnostics stream (per-column first/last/min/max).
std::string render_report(const DiagnosticsTable& t);

} // namespace dhym
