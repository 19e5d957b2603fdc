#pragma once

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace audit {

/// Calendar date stored as days since 1970-01-01.
struct Date {
  int days = 0;

  static Date from_ymd(int year, unsigned month, unsigned day);
  /// Strict YYYY-MM-DD; throws DataError otherwise.
  static Date parse(std::string_view text);
  std::string iso() const;
  int year() const;
  auto operator<=>(const Date&) const = default;
};

inline constexpr int kCrimeCategories = 9;
/// Display name of crime category k in 1..9.
std::string_view crime_category_name(int k);

/// One prosecution event (one crime line of a case).
struct CaseRecord {
  std::string case_id;
  std::string defendant_id;
  std::optional<std::string> judge_id;
  std::optional<std::string> attorney_id;
  std::string court_id;
  Date hearing_date;
  Date case_end_date;
  std::string crime_type_code;
  int crime_category = 9;
  std::optional<int> group_flag;
  bool summons = false;
  bool juvenile = false;
  bool private_attorney = false;
  int released = 0;
  int pretrial_detention_days = 0;
  std::optional<int> nonappearance;
  std::optional<int> pretrial_recidivism;
  // Optional columns; empty when the source does not carry them.
  std::optional<int> convicted;
  std::optional<int> male;
  std::optional<double> income_proxy;
  std::optional<int> origin_new;
};

/// Reads comma-separated records with a header row.  Column order is free;
/// the optional columns (convicted, male, income_proxy, origin_new) may be
/// absent.  An empty field is a missing value.  Throws DataError with the
/// line number on any malformed field or violated record invariant.
std::vector<CaseRecord> read_case_records(std::istream& in);
std::vector<CaseRecord> read_case_records(const std::filesystem::path& path);

void write_case_records(std::ostream& out, std::span<const CaseRecord> records);
void write_case_records(const std::filesystem::path& path, std::span<const CaseRecord> records);

}  // namespace audit
