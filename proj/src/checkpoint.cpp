#include "dkmo/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "dkmo/error.hpp"

namespace dkmo::nn {

namespace {

constexpr std::array<char, 8> kMagic{'D', 'K', 'M', 'O', 'C', 'K', 'P', 'T'};

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw Error(path.string() + ": cannot open for writing");
    }
    void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
    void u32(std::uint32_t v) {
        std::array<unsigned char, 4> b{};
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        out_.write(reinterpret_cast<const char*>(b.data()), 4);
    }
    void f64(double d) {
        const auto bits = std::bit_cast<std::uint64_t>(d);
        std::array<unsigned char, 8> b{};
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        out_.write(reinterpret_cast<const char*>(b.data()), 8);
    }
    void table(const Matrix& m) {
        u32(static_cast<std::uint32_t>(m.rows()));
        u32(static_cast<std::uint32_t>(m.cols()));
        for (Index i = 0; i < m.rows(); ++i)
            for (Index j = 0; j < m.cols(); ++j) f64(m(i, j));
    }
    void finish() {
        out_.flush();
        if (!out_) throw Error(path_.string() + ": write failed");
    }

private:
    std::ofstream out_;
    std::filesystem::path path_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw IngestError(path.string() + ": cannot open checkpoint");
    }
    void bytes(char* data, std::size_t n) {
        if (!in_.read(data, static_cast<std::streamsize>(n))) fail();
    }
    std::uint32_t u32() {
        std::array<unsigned char, 4> b{};
        bytes(reinterpret_cast<char*>(b.data()), 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    double f64() {
        std::array<unsigned char, 8> b{};
        bytes(reinterpret_cast<char*>(b.data()), 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return std::bit_cast<double>(v);
    }
    Matrix table(Index rows, Index cols) {
        const auto r = static_cast<Index>(u32());
        const auto c = static_cast<Index>(u32());
        if (r != rows || c != cols) {
            throw IngestError(path_.string() + ": table is " + std::to_string(r) + "x" + std::to_string(c) +
                              ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
        }
        Matrix m(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j) m(i, j) = f64();
        return m;
    }
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
    [[noreturn]] void fail() { throw IngestError(path_.string() + ": truncated checkpoint"); }

private:
    std::ifstream in_;
    std::filesystem::path path_;
};

}  // namespace

void write_checkpoint(const std::filesystem::path& path, std::span<const Network> networks) {
    Writer w(path);
    w.bytes(kMagic.data(), kMagic.size());
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(networks.size()));
    for (const Network& net : networks) {
        w.u32(static_cast<std::uint32_t>(net.input_width()));
        w.u32(static_cast<std::uint32_t>(net.layers().size()));
        w.f64(net.bn_momentum());
        w.f64(net.bn_epsilon());
        for (const Layer& l : net.layers()) {
            w.u32(static_cast<std::uint32_t>(l.spec.kind));
            w.u32(static_cast<std::uint32_t>(l.spec.width));
            w.f64(l.spec.rate);
        }
        for (const Layer& l : net.layers()) {
            if (l.spec.kind == LayerKind::dense) {
                w.table(l.weight);
                w.table(l.bias);
            } else if (l.spec.kind == LayerKind::batch_norm) {
                w.table(l.gamma);
                w.table(l.beta);
                w.table(l.running_mean);
                w.table(l.running_var);
            }
        }
    }
    w.finish();
}

std::vector<Network> read_checkpoint(const std::filesystem::path& path) {
    Reader r(path);
    std::array<char, 8> magic{};
    r.bytes(magic.data(), magic.size());
    if (magic != kMagic) throw IngestError(path.string() + ": not a checkpoint file");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw IngestError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32();
    std::vector<Network> out;
    for (std::uint32_t n = 0; n < count; ++n) {
        const auto input_width = static_cast<Index>(r.u32());
        const std::uint32_t layer_count = r.u32();
        const double momentum = r.f64();
        const double epsilon = r.f64();
        std::vector<Layer> layers(layer_count);
        Index width = input_width;
        for (auto& l : layers) {
            const std::uint32_t kind = r.u32();
            if (kind > static_cast<std::uint32_t>(LayerKind::softmax)) {
                throw IngestError(path.string() + ": unknown layer kind " + std::to_string(kind));
            }
            l.spec.kind = static_cast<LayerKind>(kind);
            l.spec.width = static_cast<Index>(r.u32());
            l.spec.rate = r.f64();
            l.in = width;
            l.out = l.spec.kind == LayerKind::dense ? l.spec.width : width;
            width = l.out;
        }
        for (auto& l : layers) {
            if (l.spec.kind == LayerKind::dense) {
                l.weight = r.table(l.in, l.out);
                l.bias = r.table(1, l.out);
            } else if (l.spec.kind == LayerKind::batch_norm) {
                l.gamma = r.table(1, l.out);
                l.beta = r.table(1, l.out);
                l.running_mean = r.table(1, l.out);
                l.running_var = r.table(1, l.out);
            }
        }
        out.push_back(Network::from_layers(input_width, std::move(layers), momentum, epsilon));
    }
    if (!r.at_end()) throw IngestError(path.string() + ": trailing bytes after checkpoint");
    return out;
}

namespace {

bool same_bits(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a.size() == 0 || std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
}

}  // namespace

bool identical(const Network& a, const Network& b) {
    if (a.input_width() != b.input_width() || a.layers().size() != b.layers().size()) return false;
    if (std::bit_cast<std::uint64_t>(a.bn_momentum()) != std::bit_cast<std::uint64_t>(b.bn_momentum())) return false;
    for (std::size_t i = 0; i < a.layers().size(); ++i) {
        const Layer& x = a.layers()[i];
        const Layer& y = b.layers()[i];
        if (!(x.spec == y.spec) || x.in != y.in || x.out != y.out) return false;
        if (!same_bits(x.weight, y.weight) || !same_bits(x.bias, y.bias) || !same_bits(x.gamma, y.gamma) ||
            !same_bits(x.beta, y.beta) || !same_bits(x.running_mean, y.running_mean) ||
            !same_bits(x.running_var, y.running_var)) {
            return false;
        }
    }
    return true;
}

}  // namespace dkmo::nn
