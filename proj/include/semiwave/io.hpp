#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace semiwave {

/// Shortest lossless text for a double: 17 significant digits.
std::string format_double(double x);

/// Comma-separated table with a header row; cells are written as given.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    void add_row(std::vector<std::string> cells);
    void add_row(const std::vector<double>& values);
    std::size_t row_count() const { return rows_.size(); }
    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string sha256_hex(std::string_view bytes);

/// Writes bytes to path, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace semiwave
