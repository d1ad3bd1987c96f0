#include "ampsim/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ampsim/errors.hpp"

namespace ampsim::csv {
namespace {

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::string ctx(std::string_view file, std::size_t line, std::string_view col) {
    std::ostringstream os;
    os << file << ":" << line << " column '" << col << "'";
    return os.str();
}

}  // namespace

std::vector<Row> read_rows(const std::filesystem::path& path,
                           const std::vector<std::string>& expected_header) {
    std::string content = read_file(path);
    std::vector<Row> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool saw_header = false;
    while (pos <= content.size()) {
        if (pos == content.size()) break;
        std::size_t nl = content.find('\n', pos);
        std::string_view line;
        if (nl == std::string::npos) {
            line = std::string_view(content).substr(pos);
            pos = content.size();
        } else {
            line = std::string_view(content).substr(pos, nl - pos);
            pos = nl + 1;
        }
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (!saw_header) {
            if (fields.size() != expected_header.size()) {
                fail(Errc::MalformedRow, path.string() + ":1 header has " +
                                             std::to_string(fields.size()) + " columns, expected " +
                                             std::to_string(expected_header.size()));
            }
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (fields[i] != expected_header[i]) {
                    fail(Errc::MalformedRow, path.string() + ":1 header column " +
                                                 std::to_string(i + 1) + " is '" + fields[i] +
                                                 "', expected '" + expected_header[i] + "'");
                }
            }
            saw_header = true;
            continue;
        }
        if (fields.size() != expected_header.size()) {
            fail(Errc::MalformedRow, path.string() + ":" + std::to_string(line_no) + " has " +
                                         std::to_string(fields.size()) + " fields, expected " +
                                         std::to_string(expected_header.size()));
        }
        rows.push_back(Row{line_no, std::move(fields)});
    }
    if (!saw_header) fail(Errc::MalformedRow, path.string() + " is empty (missing header)");
    return rows;
}

double parse_double(const Row& row, std::size_t field, std::string_view col,
                    std::string_view file) {
    const std::string& s = row.fields.at(field);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        fail(Errc::MalformedRow, ctx(file, row.line_no, col) + ": bad number '" + s + "'");
    }
    return v;
}

std::optional<double> parse_opt_double(const Row& row, std::size_t field, std::string_view col,
                                       std::string_view file) {
    if (row.fields.at(field).empty()) return std::nullopt;
    return parse_double(row, field, col, file);
}

long long parse_long(const Row& row, std::size_t field, std::string_view col,
                     std::string_view file) {
    const std::string& s = row.fields.at(field);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        fail(Errc::MalformedRow, ctx(file, row.line_no, col) + ": bad integer '" + s + "'");
    }
    return v;
}

bool parse_bool(const Row& row, std::size_t field, std::string_view col, std::string_view file) {
    const std::string& s = row.fields.at(field);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    fail(Errc::MalformedRow, ctx(file, row.line_no, col) + ": bad boolean '" + s + "'");
}

std::string format_double(double value) {
    if (value == 0.0) return "0";  // normalize -0
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    (void)ec;
    return std::string(buf, ptr);
}

Writer::Writer(std::vector<std::string> header) : n_cols_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) buf_ += ',';
        buf_ += header[i];
    }
    buf_ += '\n';
}

void Writer::add_row(const std::vector<std::string>& fields) {
    if (fields.size() != n_cols_) {
        fail(Errc::MalformedRow, "writer row has " + std::to_string(fields.size()) +
                                     " fields, expected " + std::to_string(n_cols_));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) buf_ += ',';
        buf_ += fields[i];
    }
    buf_ += '\n';
}

void Writer::save(const std::filesystem::path& path) const { write_file(path, buf_); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IoError, "cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) fail(Errc::IoError, "read failed on " + path.string());
    return std::move(os).str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot open " + path.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(Errc::IoError, "write failed on " + path.string());
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a 64-bit offset basis
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;  // FNV 64-bit prime
    }
    return h;
}

std::string digest_hex(std::string_view bytes) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

}  // namespace ampsim::csv
