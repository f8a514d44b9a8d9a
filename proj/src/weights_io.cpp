#include "renn/weights_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "renn/errors.hpp"

namespace renn {

static constexpr char kMagic[8] = {'R', 'E', 'N', 'N', 'W', '0', '0', '1'};
static constexpr std::uint32_t kFormatVersion = 1;

static constexpr auto kCrcTable = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}();

std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) c = kCrcTable[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

static void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

static void put_f64(std::vector<std::uint8_t>& b, double d) {
    const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

static std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

static double get_f64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

// Grids in file order for one layer.
static std::vector<const std::vector<double>*> stored_grids(const LayerParams& p, LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv:
        case LayerKind::Deconv: return {&p.kernel, &p.bias};
        case LayerKind::BatchNorm: return {&p.gamma, &p.beta, &p.run_mean, &p.run_var};
        default: return {};
    }
}

static std::vector<std::vector<double>*> stored_grids(LayerParams& p, LayerKind kind) {
    auto cg = stored_grids(static_cast<const LayerParams&>(p), kind);
    std::vector<std::vector<double>*> out;
    for (auto* g : cg) out.push_back(const_cast<std::vector<double>*>(g));
    return out;
}

void save_weights(const Model& m, const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes;
    bytes.insert(bytes.end(), kMagic, kMagic + 8);
    put_u32(bytes, kFormatVersion);
    put_u32(bytes, static_cast<std::uint32_t>(m.config.in_channels));
    put_u32(bytes, static_cast<std::uint32_t>(m.config.hidden_channels));
    for (std::size_t i = 0; i < m.layers.size(); ++i)
        for (const auto* grid : stored_grids(m.params[i], m.layers[i].kind))
            for (double d : *grid) put_f64(bytes, d);
    put_u32(bytes, crc32(bytes.data(), bytes.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + path.string());
}

static std::vector<std::uint8_t> read_verified(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 24) throw ChecksumError(path.string() + ": file too short");
    const std::uint32_t stored = get_u32(bytes.data() + bytes.size() - 4);
    if (stored != crc32(bytes.data(), bytes.size() - 4))
        throw ChecksumError(path.string() + ": checksum mismatch");
    if (std::memcmp(bytes.data(), kMagic, 8) != 0) throw VersionError(path.string() + ": not a weights file");
    if (get_u32(bytes.data() + 8) != kFormatVersion)
        throw VersionError(path.string() + ": unsupported format version " +
                           std::to_string(get_u32(bytes.data() + 8)));
    return bytes;
}

FcnConfig peek_weights_config(const std::filesystem::path& path) {
    const auto bytes = read_verified(path);
    FcnConfig cfg;
    cfg.in_channels = static_cast<int>(get_u32(bytes.data() + 12));
    cfg.hidden_channels = static_cast<int>(get_u32(bytes.data() + 16));
    return cfg;
}

Model load_weights(const std::filesystem::path& path, const FcnConfig& expected) {
    const auto bytes = read_verified(path);
    const int in_ch = static_cast<int>(get_u32(bytes.data() + 12));
    const int hidden = static_cast<int>(get_u32(bytes.data() + 16));
    if (in_ch != expected.in_channels || hidden != expected.hidden_channels)
        throw ConfigMismatchError(path.string() + ": stored shape (" + std::to_string(in_ch) + ", " +
                                  std::to_string(hidden) + ") differs from expected (" +
                                  std::to_string(expected.in_channels) + ", " +
                                  std::to_string(expected.hidden_channels) + ")");

    Model m = build_fcn(expected);
    std::size_t off = 20;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        for (auto* grid : stored_grids(m.params[i], m.layers[i].kind)) {
            const std::size_t need = grid->size() * 8;
            if (off + need > bytes.size() - 4) throw ChecksumError(path.string() + ": payload shorter than shape");
            for (double& d : *grid) {
                d = get_f64(bytes.data() + off);
                off += 8;
            }
        }
    }
    if (off != bytes.size() - 4) throw ChecksumError(path.string() + ": payload longer than shape");
    m.training = false;
    return m;
}

}  // namespace renn
