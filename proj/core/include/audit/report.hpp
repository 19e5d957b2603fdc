#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace audit {

/// One table-shaped section of a report.
struct ReportBlock {
  std::string key;    ///< e.g. T2, TC1, FD1
  std::string title;
  std::vector<std::pair<std::string, std::string>> values;
  std::string text;   ///< human rendering
  std::string error;  ///< set when the analysis failed

  void put(std::string name, std::string value) { values.emplace_back(std::move(name), std::move(value)); }
  void put(std::string name, double value);
  void put(std::string name, long long value);
  void put(std::string name, int value) { put(std::move(name), static_cast<long long>(value)); }
  void put(std::string name, bool value) { put(std::move(name), std::string(value ? "true" : "false")); }
};

struct AuditReport {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<ReportBlock> blocks;

  /// Machine-readable form: "[block]" headers and "key = value" lines.
  std::string machine_text() const;
  std::string human_text() const;
  void write(const std::filesystem::path& dir) const;
};

/// Shortest round-trip decimal form; "nan"/"inf" for non-finite values.
std::string format_number(double v);

/// Fixed-width text table; the first column is left-aligned.
class TextTable {
public:
  explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }
  void rule() { rows_.emplace_back(); }
  std::string render() const;

private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// "%.3f" style cell and "(se)" cell; blank for NaN.
std::string cell(double v, int digits = 3);
std::string se_cell(double v, int digits = 3);

}  // namespace audit
