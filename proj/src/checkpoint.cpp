#include "hud/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hud/encoder.hpp"

namespace hud {

namespace {

constexpr char kMagic[8] = {'H', 'U', 'D', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<uint64_t>(v)); }

class Reader {
  public:
    explicit Reader(const std::string& buf) : buf_(buf) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::string bytes(size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    size_t remaining() const { return buf_.size() - pos_; }

  private:
    void need(size_t n) {
        if (buf_.size() - pos_ < n)
            throw std::runtime_error("checkpoint: unexpected end of file");
    }

    const std::string& buf_;
    size_t pos_ = 0;
};

uint64_t config_hash_u64(const RunConfig& cfg) {
    std::string canon = serialize_config(cfg);
    return fnv1a64(canon.data(), canon.size());
}

std::string shape_str(int rows, int cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg,
                     const ParameterStore& store) {
    std::string buf;
    buf.append(kMagic, sizeof(kMagic));
    put_u32(buf, kVersion);
    put_u64(buf, config_hash_u64(cfg));
    put_u64(buf, store.step);
    put_u64(buf, store.rng.seed);
    put_u64(buf, store.rng.counter);
    put_u32(buf, static_cast<uint32_t>(store.size()));
    for (const auto& [name, e] : store.entries()) {
        put_u32(buf, static_cast<uint32_t>(name.size()));
        buf.append(name);
        put_u32(buf, static_cast<uint32_t>(e.value.rows));
        put_u32(buf, static_cast<uint32_t>(e.value.cols));
        for (double v : e.value.data) put_f64(buf, v);
        for (double v : e.m.data) put_f64(buf, v);
        for (double v : e.v.data) put_f64(buf, v);
    }
    put_u64(buf, fnv1a64(buf.data(), buf.size()));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot write '" + path + "'");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

ParameterStore load_checkpoint(const std::string& path, const RunConfig& cfg) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(kMagic) + 8)
        throw std::runtime_error("checkpoint: file too short: '" + path + "'");
    uint64_t stored_sum = 0;
    for (int i = 0; i < 8; ++i)
        stored_sum |= static_cast<uint64_t>(
                          static_cast<unsigned char>(buf[buf.size() - 8 + i]))
                      << (8 * i);
    if (fnv1a64(buf.data(), buf.size() - 8) != stored_sum)
        throw std::runtime_error("checkpoint: checksum mismatch (truncated or corrupted): '" +
                                 path + "'");

    Reader r(buf);
    if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
        throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
    uint32_t version = r.u32();
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(version));
    uint64_t hash = r.u64();
    if (hash != config_hash_u64(cfg))
        throw std::runtime_error(
            "checkpoint: config hash mismatch (saved under a different configuration)");

    ParameterStore store;
    store.step = r.u64();
    store.rng.seed = r.u64();
    store.rng.counter = r.u64();
    uint32_t count = r.u32();

    // The layout this config would initialize, used purely for shape checks.
    ParameterStore expected = init_params(cfg, 0);
    if (count != expected.size())
        throw std::runtime_error("checkpoint: parameter count " + std::to_string(count) +
                                 " does not match the " + std::to_string(expected.size()) +
                                 " this config defines");

    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = r.u32();
        std::string name = r.bytes(name_len);
        int rows = static_cast<int>(r.u32());
        int cols = static_cast<int>(r.u32());
        if (!expected.has(name))
            throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
        const Tensor2D& want = expected.entry(name).value;
        if (rows != want.rows || cols != want.cols)
            throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': file has " +
                                     shape_str(rows, cols) + ", config expects " +
                                     shape_str(want.rows, want.cols));
        store.create(name, rows, cols);
        ParameterStore::Entry& e = store.entry(name);
        for (double& v : e.value.data) v = r.f64();
        for (double& v : e.m.data) v = r.f64();
        for (double& v : e.v.data) v = r.f64();
    }
    if (store.size() != expected.size())
        throw std::runtime_error("checkpoint: duplicate or missing parameters");
    if (r.remaining() != 8)
        throw std::runtime_error("checkpoint: trailing bytes after parameter block");
    return store;
}

}  // namespace hud
