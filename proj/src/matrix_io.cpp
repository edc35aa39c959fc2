#include "dkmo/matrix_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "dkmo/error.hpp"

namespace dkmo::io {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

namespace {

constexpr std::array<char, 4> kSquareMagic{'D', 'K', 'M', 'K'};
constexpr std::array<char, 4> kRectMagic{'D', 'K', 'M', 'R'};

std::string where(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_real(std::string_view field, const std::filesystem::path& path, std::size_t line) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw IngestError(where(path, line) + ": cannot parse '" + std::string(field) + "' as a real number");
    }
    if (!std::isfinite(value)) throw IngestError(where(path, line) + ": non-finite value");
    return value;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw IngestError(path.string() + ": cannot open file");
    return in;
}

void put_u32(std::ostream& out, std::uint32_t v) {
    std::array<unsigned char, 4> b{};
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

void put_f64(std::ostream& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
    out.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw IngestError(path.string() + ": truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

Matrix read_matrix_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = trim(line);
        if (view.empty()) continue;
        std::vector<double> row;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = view.find(',', start);
            row.push_back(parse_real(view.substr(start, comma == std::string_view::npos ? view.npos : comma - start),
                                     path, lineno));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw IngestError(where(path, lineno) + ": row has " + std::to_string(row.size()) +
                              " columns, expected " + std::to_string(rows.front().size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IngestError(path.string() + ": no data rows");
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw Error(path.string() + ": cannot open for writing");
    std::array<char, 64> buf{};
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), m(i, j));
            out.write(buf.data(), ptr - buf.data());
        }
        out << '\n';
    }
    if (!out) throw Error(path.string() + ": write failed");
}

Matrix read_matrix_binary(const std::filesystem::path& path) {
    auto in = open_in(path, std::ios::in | std::ios::binary);
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), 4)) throw IngestError(path.string() + ": truncated header");
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    if (magic == kSquareMagic) {
        rows = cols = get_u32(in, path);
    } else if (magic == kRectMagic) {
        rows = get_u32(in, path);
        cols = get_u32(in, path);
    } else {
        throw IngestError(path.string() + ": unknown magic bytes");
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::array<unsigned char, 8> b{};
    for (std::uint64_t i = 0; i < rows; ++i) {
        for (std::uint64_t j = 0; j < cols; ++j) {
            if (!in.read(reinterpret_cast<char*>(b.data()), 8)) {
                throw IngestError(path.string() + ": truncated data at row " + std::to_string(i));
            }
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
            const double v = std::bit_cast<double>(bits);
            if (!std::isfinite(v)) {
                throw IngestError(path.string() + ": non-finite value at row " + std::to_string(i));
            }
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw IngestError(path.string() + ": trailing bytes");
    return m;
}

void write_matrix_binary(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(path.string() + ": cannot open for writing");
    if (m.rows() == m.cols()) {
        out.write(kSquareMagic.data(), 4);
        put_u32(out, static_cast<std::uint32_t>(m.rows()));
    } else {
        out.write(kRectMagic.data(), 4);
        put_u32(out, static_cast<std::uint32_t>(m.rows()));
        put_u32(out, static_cast<std::uint32_t>(m.cols()));
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
    if (!out) throw Error(path.string() + ": write failed");
}

Matrix read_matrix(const std::filesystem::path& path) {
    auto in = open_in(path, std::ios::in | std::ios::binary);
    std::array<char, 4> magic{};
    in.read(magic.data(), 4);
    if (in.gcount() == 4 && (magic == kSquareMagic || magic == kRectMagic)) return read_matrix_binary(path);
    return read_matrix_csv(path);
}

Matrix read_matrix(const std::filesystem::path& path, MatrixFormat format) {
    return format == MatrixFormat::binary ? read_matrix_binary(path) : read_matrix_csv(path);
}

std::vector<int> read_labels(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<int> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view = trim(line);
        if (view.empty()) continue;
        int v = 0;
        auto [ptr, ec] = std::from_chars(view.data(), view.data() + view.size(), v);
        if (ec != std::errc() || ptr != view.data() + view.size()) {
            throw IngestError(where(path, lineno) + ": cannot parse label '" + std::string(view) + "'");
        }
        if (v < 0) throw IngestError(where(path, lineno) + ": negative label");
        labels.push_back(v);
    }
    if (labels.empty()) throw IngestError(path.string() + ": no labels");
    return labels;
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw Error(path.string() + ": cannot open for writing");
    for (int l : labels) out << l << '\n';
}

}  // namespace dkmo::io
