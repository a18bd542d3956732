#include "deconv/csv.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace deconv {

CsvWriter::CsvWriter(std::filesystem::path path, std::vector<std::string> meta,
                     std::vector<std::string> columns)
    : path_(std::move(path)), ncols_(columns.size()) {
  for (const auto& m : meta) body_ << "# " << m << "\n";
  for (std::size_t i = 0; i < columns.size(); ++i)
    body_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != ncols_) throw std::invalid_argument("csv row arity mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i)
    body_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
}

void CsvWriter::commit() {
  if (committed_) return;
  std::filesystem::path tmp = path_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << body_.str();
  }
  std::filesystem::rename(tmp, path_);
  committed_ = true;
}

std::string CsvWriter::num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string CsvWriter::num(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%" PRIu64, v);
  return buf;
}

std::string CsvWriter::num(int v) { return std::to_string(v); }

std::vector<std::string> csv_meta(std::uint64_t config_hash, std::uint64_t master_seed,
                                  const std::string& config_echo) {
  std::vector<std::string> meta;
  meta.push_back("deconv 0.1.0");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, config_hash);
  meta.push_back(std::string("config_hash: ") + buf);
  meta.push_back("master_seed: " + std::to_string(master_seed));
  if (!config_echo.empty()) meta.push_back("config: " + config_echo);
  return meta;
}

std::vector<double> read_csv_column(const std::filesystem::path& path,
                                    const std::string& column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::vector<std::string> header;
  std::vector<double> out;
  long col = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t pos = line.find(',', start);
      cells.push_back(line.substr(start, pos == std::string::npos ? pos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (col < 0) {
      if (column.empty()) {
        col = 0;
      } else {
        for (std::size_t i = 0; i < cells.size(); ++i)
          if (cells[i] == column) col = static_cast<long>(i);
        if (col < 0) throw std::runtime_error("column not found: " + column);
      }
      header = cells;
      continue;
    }
    if (static_cast<std::size_t>(col) >= cells.size())
      throw std::runtime_error("short row in " + path.string());
    out.push_back(std::stod(cells[static_cast<std::size_t>(col)]));
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace deconv
