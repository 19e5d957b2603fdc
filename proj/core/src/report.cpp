#include "audit/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "audit/errors.hpp"

namespace audit {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

void ReportBlock::put(std::string name, double value) { put(std::move(name), format_number(value)); }
void ReportBlock::put(std::string name, long long value) { put(std::move(name), fmt::format("{}", value)); }

std::string AuditReport::machine_text() const {
  std::string out = "[meta]\n";
  for (const auto& [k, v] : metadata) out += k + " = " + v + "\n";
  for (const auto& b : blocks) {
    out += "\n[" + b.key + "]\n";
    out += "title = " + b.title + "\n";
    out += "status = " + std::string(b.error.empty() ? "ok" : "error") + "\n";
    if (!b.error.empty()) out += "error = " + b.error + "\n";
    for (const auto& [k, v] : b.values) out += k + " = " + v + "\n";
  }
  return out;
}

std::string AuditReport::human_text() const {
  std::string out;
  for (const auto& [k, v] : metadata)
    if (k.rfind("ledger.", 0) != 0 && k.rfind("config.", 0) != 0) out += fmt::format("{:<22} {}\n", k, v);
  for (const auto& b : blocks) {
    out += fmt::format("\n== {}: {} ==\n", b.key, b.title);
    if (!b.error.empty()) out += "ERROR: " + b.error + "\n";
    out += b.text;
  }
  return out;
}

void AuditReport::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : {std::pair{"report.kv", machine_text()}, std::pair{"report.txt", human_text()}}) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw AuditError(fmt::format("cannot write {}", (dir / name).string()));
    out << body;
  }
}

std::string TextTable::render() const {
  std::vector<std::size_t> width(header_.size(), 0);
  for (std::size_t j = 0; j < header_.size(); ++j) width[j] = header_[j].size();
  for (const auto& r : rows_)
    for (std::size_t j = 0; j < r.size() && j < width.size(); ++j) width[j] = std::max(width[j], r[j].size());
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t j = 0; j < width.size(); ++j) {
      const std::string c = j < r.size() ? r[j] : "";
      s += j == 0 ? fmt::format("{:<{}}", c, width[j]) : fmt::format("  {:>{}}", c, width[j]);
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  const std::string bar(total, '-');
  std::string out = bar + "\n" + line(header_) + bar + "\n";
  for (const auto& r : rows_) out += r.empty() ? bar + "\n" : line(r);
  return out + bar + "\n";
}

std::string cell(double v, int digits) { return std::isfinite(v) ? fmt::format("{:.{}f}", v, digits) : ""; }
std::string se_cell(double v, int digits) { return std::isfinite(v) ? fmt::format("({:.{}f})", v, digits) : ""; }

}  // namespace audit
