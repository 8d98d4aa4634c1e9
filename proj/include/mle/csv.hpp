#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace mle {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws ValidationError when absent.
  std::size_t column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// Shortest round-trippable decimal representation.
std::string format_number(double v);

}  // namespace mle
