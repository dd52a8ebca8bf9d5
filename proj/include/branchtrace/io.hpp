#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace branchtrace {

/// Shortest-round-trip decimal text with 17 significant digits.
std::string format_double(double v);
std::string format_optional(const std::optional<double>& v);

/// Writes a CSV file; cells are written verbatim.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws if absent.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace branchtrace
