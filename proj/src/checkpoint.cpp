#include "dhym/checkpoint.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <filesystem>

namespace dhym {

static_assert(std::endian::native == std::endian::little, "payloads are little-endian");

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

void checkpoint_write(const CheckpointData& data, const std::string& path) {
    const std::string tmp = path + ".tmp";
    FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw Error("checkpoint_write: cannot open " + tmp);
    bool ok = true;
    ok = ok && std::fprintf(f, "DHYM-CKPT v1\n") > 0;
    ok = ok && std::fprintf(f, "n=%d\n", data.n) > 0;
    ok = ok && std::fprintf(f, "N=%d\n", data.N) > 0;
    ok = ok && std::fprintf(f, "t=%a\n", data.t) > 0;
    ok = ok && std::fprintf(f, "step=%" PRId64 "\n", data.step) > 0;
    ok = ok && std::fprintf(f, "dt=%a\n", data.dt) > 0;
    ok = ok && std::fprintf(f, "config_hash=%016" PRIx64 "\n", data.config_hash) > 0;
    ok = ok && std::fprintf(f, "fields=phi\n") > 0;
    ok = ok && std::fprintf(f, "end\n") > 0;
    const std::size_t npts = data.phi.v.size();
    ok = ok && std::fwrite(data.phi.v.data(), sizeof(double), npts, f) == npts;
    ok = (std::fclose(f) == 0) && ok;
    if (!ok) {
        std::filesystem::remove(tmp);
        throw Error("checkpoint_write: write failed for " + path);
    }
    std::filesystem::rename(tmp, path);
}

namespace {
std::string read_line(FILE* f) {
    std::string s;
    int c;
    while ((c = std::fgetc(f)) != EOF && c != '\n') s.push_back(static_cast<char>(c));
    if (c == EOF && s.empty()) throw Error("checkpoint_read: truncated header");
    return s;
}

std::string expect_key(const std::string& line, const char* key) {
    const std::string k = std::string(key) + "=";
    if (line.rfind(k, 0) != 0) throw Error("checkpoint_read: expected '" + k + "...', got '" + line + "'");
    return line.substr(k.size());
}
} // namespace

CheckpointData checkpoint_read(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw Error("checkpoint_read: cannot open " + path);
    struct Closer {
        FILE* f;
        ~Closer() { if (f) std::fclose(f); }
    } closer{f};

    const std::string magic = read_line(f);
    if (magic != "DHYM-CKPT v1")
        throw Error("checkpoint_read: version mismatch (magic line '" + magic + "')");
    CheckpointData d;
    d.n = std::stoi(expect_key(read_line(f), "n"));
    d.N = std::stoi(expect_key(read_line(f), "N"));
    d.t = std::strtod(expect_key(read_line(f), "t").c_str(), nullptr);
    d.step = std::stoll(expect_key(read_line(f), "step"));
    d.dt = std::strtod(expect_key(read_line(f), "dt").c_str(), nullptr);
    d.config_hash = std::stoull(expect_key(read_line(f), "config_hash"), nullptr, 16);
    const std::string fields = expect_key(read_line(f), "fields");
    if (fields != "phi") throw Error("checkpoint_read: unsupported field list '" + fields + "'");
    if (read_line(f) != "end") throw Error("checkpoint_read: missing end-of-header marker");

    GridSpec grid = make_grid(d.n, d.N); // also validates dimensions
    d.phi = RealField(grid);
    const std::size_t npts = d.phi.v.size();
    if (std::fread(d.phi.v.data(), sizeof(double), npts, f) != npts)
        throw Error("checkpoint_read: truncated payload in " + path);
    unsigned char extra;
    if (std::fread(&extra, 1, 1, f) == 1) throw Error("checkpoint_read: trailing bytes in " + path);
    return d;
}

} // namespace dhym
