#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "lasso.hpp"

namespace deconf::io {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Shortest text that parses back to the same double.
inline std::string format_double(double v)
{
    if (std::isnan(v)) return "NA";
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers; // 1-based source line of each row

    Index column(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<Index>(i);
        return -1;
    }

    std::string available_columns() const
    {
        std::string out;
        for (std::size_t i = 0; i < header.size(); ++i) out += (i ? ", " : "") + header[i];
        return out;
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw InputError("line " + std::to_string(line_no) + ": unterminated quoted field");
    out.push_back(std::move(cur));
    return out;
}

inline CsvTable read_csv(std::istream& in)
{
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_line(line, line_no);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                             " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    if (t.header.empty()) throw InputError("empty CSV input");
    return t;
}

inline CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_csv(in);
}

inline double parse_number(const std::string& s, std::size_t line_no, const std::string& column)
{
    const char* b = s.c_str();
    char* e = nullptr;
    errno = 0;
    const double v = std::strtod(b, &e);
    if (s.empty() || s == "NA" || s == "NaN" || e == b || *e != '\0' || errno == ERANGE || !std::isfinite(v))
        throw InputError("line " + std::to_string(line_no) + ", column '" + column + "': '" + s +
                         "' is not a finite number (missing values are not supported)");
    return v;
}

inline MatrixXd numeric_columns(const CsvTable& t, const std::vector<Index>& cols)
{
    MatrixXd M(static_cast<Index>(t.rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t c = 0; c < cols.size(); ++c)
            M(static_cast<Index>(i), static_cast<Index>(c)) =
                parse_number(t.rows[i][static_cast<std::size_t>(cols[c])], t.line_numbers[i],
                             t.header[static_cast<std::size_t>(cols[c])]);
    return M;
}

inline std::vector<std::string> string_column(const CsvTable& t, Index col)
{
    std::vector<std::string> out;
    for (const auto& r : t.rows) out.push_back(r[static_cast<std::size_t>(col)]);
    return out;
}

struct NamedMatrix {
    std::vector<std::string> names;
    MatrixXd data;
};

// ---------------------------------------------------------------------------
// Binary matrix cache: "DCNF1", uint64 rows, uint64 cols (little endian),
// then rows*cols little-endian doubles in column-major order.

inline constexpr char kCacheMagic[5] = {'D', 'C', 'N', 'F', '1'};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v)
{
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& in)
{
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw InputError("truncated matrix cache header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace detail

inline void write_matrix_cache(const std::string& path, const MatrixXd& M)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    out.write(kCacheMagic, 5);
    detail::put_u64(out, static_cast<std::uint64_t>(M.rows()));
    detail::put_u64(out, static_cast<std::uint64_t>(M.cols()));
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i) {
            std::uint64_t bits;
            const double v = M(i, j);
            std::memcpy(&bits, &v, 8);
            detail::put_u64(out, bits);
        }
}

inline bool is_matrix_cache(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    char magic[5] = {};
    return in.read(magic, 5) && std::memcmp(magic, kCacheMagic, 5) == 0;
}

inline MatrixXd read_matrix_cache(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    char magic[5] = {};
    if (!in.read(magic, 5) || std::memcmp(magic, kCacheMagic, 5) != 0) throw InputError(path + ": bad magic");
    const auto rows = static_cast<Index>(detail::get_u64(in));
    const auto cols = static_cast<Index>(detail::get_u64(in));
    MatrixXd M(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) {
            const std::uint64_t bits = detail::get_u64(in);
            double v;
            std::memcpy(&v, &bits, 8);
            M(i, j) = v;
        }
    return M;
}

// CSV with header, or a binary cache (columns named x1..xp).
inline NamedMatrix load_matrix(const std::string& path)
{
    NamedMatrix nm;
    if (is_matrix_cache(path)) {
        nm.data = read_matrix_cache(path);
        for (Index j = 0; j < nm.data.cols(); ++j) nm.names.push_back("x" + std::to_string(j + 1));
        return nm;
    }
    const CsvTable t = read_csv(path);
    std::vector<Index> cols;
    for (Index j = 0; j < static_cast<Index>(t.header.size()); ++j) cols.push_back(j);
    nm.names = t.header;
    nm.data = numeric_columns(t, cols);
    return nm;
}

// ---------------------------------------------------------------------------
// Writers

inline void write_dataset_csv(std::ostream& out, const MatrixXd& X, const VectorXd& y,
                              const std::vector<std::string>& names)
{
    out << "y";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (Index i = 0; i < X.rows(); ++i) {
        out << format_double(y[i]);
        for (Index j = 0; j < X.cols(); ++j) out << ',' << format_double(X(i, j));
        out << '\n';
    }
}

// Long format: field,index,value with 1-based indices.
inline void write_truth_csv(std::ostream& out, const VectorXd& beta, const VectorXd& gamma, const VectorXd& tau,
                            const std::vector<Index>& support)
{
    out << "field,index,value\n";
    auto vec = [&](const char* name, const VectorXd& v) {
        for (Index i = 0; i < v.size(); ++i) out << name << ',' << (i + 1) << ',' << format_double(v[i]) << '\n';
    };
    vec("beta", beta);
    vec("gamma", gamma);
    vec("tau", tau);
    for (std::size_t i = 0; i < support.size(); ++i) out << "support," << (i + 1) << ',' << (support[i] + 1) << '\n';
}

// One row per nonzero coefficient, plus a per-lambda summary.
inline void write_path_coefficients(std::ostream& out, const LassoPath& path, const std::vector<std::string>& names)
{
    out << "lambda_index,coefficient,feature,value\n";
    for (Index l = 0; l < path.size(); ++l)
        for (Index j = 0; j < path.coefs.rows(); ++j)
            if (path.coefs(j, l) != 0.0)
                out << (l + 1) << ',' << (j + 1) << ',' << names[static_cast<std::size_t>(j)] << ','
                    << format_double(path.coefs(j, l)) << '\n';
}

inline void write_path_summary(std::ostream& out, const LassoPath& path, const VectorXd* cve = nullptr)
{
    out << "lambda_index,lambda,model_size,intercept,cve\n";
    for (Index l = 0; l < path.size(); ++l)
        out << (l + 1) << ',' << format_double(path.lambdas[l]) << ',' << path.model_size(l) << ','
            << format_double(path.intercepts[l]) << ',' << (cve ? format_double((*cve)[l]) : std::string("NA"))
            << '\n';
}

} // namespace deconf::io
