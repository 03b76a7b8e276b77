#pragma once

#include <string>

#include "dhym/flow.hpp"
#include "dhym/surface_ma.hpp"

namespace dhym {

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Initial/background scalar field recipe.
struct FieldInit {
    enum class Kind { Zero, BandLimited, File } kind = Kind::Zero;
    std::uint64_t seed = 0;
    int bandwidth = 0;
    double amplitude = 0.0;
    std::string path;
};

struct ProblemConfig {
    int n = 2;
    int N = 32;
    Mat g;
    Mat B;
    FieldInit psi0;
    FieldInit phi0;
    std::int64_t point_budget = kDefaultPointBudget;
};

struct VerifyOptions {
    std::uint64_t seed = 1;
    int samples = 1000;
};

struct OutputConfig {
    std::string csv;
    std::string checkpoint;
    std::string report;
    std::string mode; // optional; the CLI subcommand takes precedence
};

struct RunConfig {
    ProblemConfig problem;
    FlowConfig flow;
    MAOptions ma;
    VerifyOptions verify;
    OutputConfig output;
    std::uint64_t hash = 0; // FNV-1a of the raw text
};

/// Parse a sectioned key=value configuration.  All violations are collected
/// and reported together, each with its line number.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

/// The documented configuration grammar (shown by the CLI help).
std::string config_grammar();

RealField build_field(const SpectralEngine& eng, const FieldInit& init);

} // namespace dhym
