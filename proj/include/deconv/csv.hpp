#pragma once

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

namespace deconv {

// CSV writer with '#'-prefixed metadata comment rows.  Content is staged in
// memory and written atomically (temp file + rename) on commit.
class CsvWriter {
public:
  CsvWriter(std::filesystem::path path, std::vector<std::string> meta,
            std::vector<std::string> columns);

  void row(const std::vector<std::string>& cells);
  void commit();

  static std::string num(double v);
  static std::string num(std::uint64_t v);
  static std::string num(int v);

private:
  std::filesystem::path path_;
  std::ostringstream body_;
  bool committed_ = false;
  std::size_t ncols_;
};

// Standard metadata block: tool version, config hash, master seed, config echo.
std::vector<std::string> csv_meta(std::uint64_t config_hash, std::uint64_t master_seed,
                                  const std::string& config_echo);

// Reads the column named `column` (or the single column when unnamed) from a
// CSV written by this tool; '#' rows are skipped.
std::vector<double> read_csv_column(const std::filesystem::path& path,
                                    const std::string& column = "");

std::uint64_t fnv1a64(const std::string& s);

} // namespace deconv
