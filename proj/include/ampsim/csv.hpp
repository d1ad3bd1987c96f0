#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ampsim::csv {

// Minimal comma-separated format: no quoting or escaping (none of the file
// schemas carry commas in values), '\n' line ends, header row required.

struct Row {
    std::size_t line_no = 0;  // 1-based line in the file, for error messages
    std::vector<std::string> fields;
};

// Reads all rows, validating the header matches `expected_header` exactly and
// every row has the same field count. Blank lines are ignored.
std::vector<Row> read_rows(const std::filesystem::path& path,
                           const std::vector<std::string>& expected_header);

// Parsers carry (file, line, column-name) context into error messages.
double parse_double(const Row& row, std::size_t field, std::string_view col,
                    std::string_view file);
long long parse_long(const Row& row, std::size_t field, std::string_view col,
                     std::string_view file);
// Empty field -> nullopt (used for optional numeric columns).
std::optional<double> parse_opt_double(const Row& row, std::size_t field, std::string_view col,
                                       std::string_view file);
bool parse_bool(const Row& row, std::size_t field, std::string_view col, std::string_view file);

// Shortest decimal text that round-trips the exact double (to_chars). Integral
// values print without a trailing ".0" ("25", not "25.0"); this is the
// canonical form used by every writer, so write(read(f)) is byte-stable.
std::string format_double(double value);

class Writer {
  public:
    explicit Writer(std::vector<std::string> header);
    void add_row(const std::vector<std::string>& fields);
    const std::string& str() const { return buf_; }
    void save(const std::filesystem::path& path) const;

  private:
    std::size_t n_cols_;
    std::string buf_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// FNV-1a 64-bit, used for content digests in run manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string digest_hex(std::string_view bytes);  // "fnv64:xxxxxxxxxxxxxxxx"

}  // namespace ampsim::csv
