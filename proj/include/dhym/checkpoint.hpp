#pragma once

#include <string>
#include <string_view>

#include "dhym/core.hpp"

namespace dhym {

/// On-disk state snapshot.  Layout: the magic line "DHYM-CKPT v1", a UTF-8
/// key=value header (n, N, t, step, dt, config_hash, fields) closed by an
/// "end" line, then row-major little-endian f64 payloads in field-list order.
/// Times are stored as hexfloats so the round-trip is exact.
struct CheckpointData {
    int n = 0;
    int N = 0;
    double t = 0.0;
    std::int64_t step = 0;
    double dt = 0.0;
    std::uint64_t config_hash = 0;
    RealField phi;
};

void checkpoint_write(const CheckpointData& data, const std::string& path);
CheckpointData checkpoint_read(const std::string& path);

std::uint64_t fnv1a64(std::string_view s);

} // namespace dhym
