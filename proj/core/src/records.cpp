#include "audit/records.hpp"

#include <array>
#include <charconv>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "audit/errors.hpp"

namespace audit {

namespace chr = std::chrono;

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) throw DataError(fmt::format("invalid date {}-{}-{}", year, month, day));
  return Date{static_cast<int>(chr::sys_days{ymd}.time_since_epoch().count())};
}

Date Date::parse(std::string_view text) {
  auto digits = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (text[i] < '0' || text[i] > '9') throw DataError(fmt::format("malformed date '{}'", text));
      v = v * 10 + (text[i] - '0');
    }
    return v;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-')
    throw DataError(fmt::format("malformed date '{}'", text));
  return from_ymd(digits(0, 4), static_cast<unsigned>(digits(5, 2)), static_cast<unsigned>(digits(8, 2)));
}

std::string Date::iso() const {
  const chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

int Date::year() const {
  const chr::year_month_day ymd{chr::sys_days{chr::days{days}}};
  return static_cast<int>(ymd.year());
}

std::string_view crime_category_name(int k) {
  static constexpr std::array<std::string_view, kCrimeCategories> names{
      "Homicides",
      "Sexual offenses",
      "Thefts and robberies",
      "Other property crimes",
      "Drug offenses",
      "White collar and tax crimes",
      "Crimes against public trust",
      "Crimes against freedom and privacy",
      "Other crimes",
  };
  if (k < 1 || k > kCrimeCategories) throw DataError(fmt::format("crime category {} outside 1..9", k));
  return names[static_cast<std::size_t>(k - 1)];
}

namespace {

constexpr std::array<std::string_view, 17> kRequired{
    "case_id",       "defendant_id",     "judge_id",      "attorney_id",          "court_id",
    "hearing_date",  "case_end_date",    "crime_type_code", "crime_category",     "group_flag",
    "summons_flag",  "juvenile_flag",    "private_attorney_flag", "released",     "pretrial_detention_days",
    "nonappearance", "pretrial_recidivism"};
constexpr std::array<std::string_view, 4> kOptional{"convicted", "male", "income_proxy", "origin_new"};

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

struct FieldReader {
  std::size_t line;
  const std::vector<std::string_view>& fields;
  const std::map<std::string, std::size_t, std::less<>>& cols;

  std::string_view raw(std::string_view name) const {
    const auto it = cols.find(name);
    if (it == cols.end()) return {};
    return fields[it->second];
  }
  [[noreturn]] void fail(std::string_view name, std::string_view why) const {
    throw DataError(fmt::format("line {}: column '{}': {}", line, name, why));
  }
  std::string text(std::string_view name) const {
    const auto v = raw(name);
    if (v.empty()) fail(name, "missing value");
    return std::string(v);
  }
  std::optional<std::string> opt_text(std::string_view name) const {
    const auto v = raw(name);
    if (v.empty()) return std::nullopt;
    return std::string(v);
  }
  std::optional<long> opt_int(std::string_view name) const {
    const auto v = raw(name);
    if (v.empty()) return std::nullopt;
    long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) fail(name, fmt::format("not an integer: '{}'", v));
    return out;
  }
  long integer(std::string_view name) const {
    const auto v = opt_int(name);
    if (!v) fail(name, "missing value");
    return *v;
  }
  std::optional<int> opt_flag(std::string_view name) const {
    const auto v = opt_int(name);
    if (v && *v != 0 && *v != 1) fail(name, "flag must be 0 or 1");
    return v ? std::optional<int>(static_cast<int>(*v)) : std::nullopt;
  }
  int flag(std::string_view name) const {
    const auto v = opt_flag(name);
    if (!v) fail(name, "missing value");
    return *v;
  }
  std::optional<double> opt_real(std::string_view name) const {
    const auto v = raw(name);
    if (v.empty()) return std::nullopt;
    std::size_t used = 0;
    double out = 0;
    try {
      out = std::stod(std::string(v), &used);
    } catch (const std::exception&) {
      fail(name, fmt::format("not a number: '{}'", v));
    }
    if (used != v.size()) fail(name, fmt::format("not a number: '{}'", v));
    return out;
  }
  Date date(std::string_view name) const {
    try {
      return Date::parse(text(name));
    } catch (const DataError& e) {
      fail(name, e.what());
    }
  }
};

template <class T>
std::string opt_str(const std::optional<T>& v) {
  return v ? fmt::format("{}", *v) : std::string{};
}

}  // namespace

std::vector<CaseRecord> read_case_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("case file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::map<std::string, std::size_t, std::less<>> cols;
  const auto header = split(line);
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name(header[i]);
    bool known = false;
    for (auto k : kRequired) known = known || k == name;
    for (auto k : kOptional) known = known || k == name;
    if (!known) throw DataError(fmt::format("unknown column '{}' in header", name));
    if (!cols.emplace(name, i).second) throw DataError(fmt::format("duplicate column '{}' in header", name));
  }
  for (auto k : kRequired)
    if (!cols.contains(k)) throw DataError(fmt::format("required column '{}' missing from header", k));

  std::vector<CaseRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size())
      throw DataError(fmt::format("line {}: expected {} fields, found {}", lineno, header.size(), fields.size()));
    const FieldReader f{lineno, fields, cols};
    CaseRecord r;
    r.case_id = f.text("case_id");
    r.defendant_id = f.text("defendant_id");
    r.judge_id = f.opt_text("judge_id");
    r.attorney_id = f.opt_text("attorney_id");
    r.court_id = f.text("court_id");
    r.hearing_date = f.date("hearing_date");
    r.case_end_date = f.date("case_end_date");
    r.crime_type_code = f.text("crime_type_code");
    r.crime_category = static_cast<int>(f.integer("crime_category"));
    if (r.crime_category < 1 || r.crime_category > kCrimeCategories)
      f.fail("crime_category", "must lie in 1..9");
    r.group_flag = f.opt_flag("group_flag");
    r.summons = f.flag("summons_flag");
    r.juvenile = f.flag("juvenile_flag");
    r.private_attorney = f.flag("private_attorney_flag");
    r.released = f.flag("released");
    const long days = f.integer("pretrial_detention_days");
    if (days < 0) f.fail("pretrial_detention_days", "negative");
    r.pretrial_detention_days = static_cast<int>(days);
    r.nonappearance = f.opt_flag("nonappearance");
    r.pretrial_recidivism = f.opt_flag("pretrial_recidivism");
    const bool observed = r.nonappearance.has_value() && r.pretrial_recidivism.has_value();
    const bool unobserved = !r.nonappearance.has_value() && !r.pretrial_recidivism.has_value();
    if (r.released == 1 && !observed)
      throw DataError(fmt::format("line {}: released case without recorded misconduct outcomes", lineno));
    if (r.released == 0 && !unobserved)
      throw DataError(fmt::format("line {}: detained case carries misconduct outcomes", lineno));
    r.convicted = f.opt_flag("convicted");
    r.male = f.opt_flag("male");
    r.income_proxy = f.opt_real("income_proxy");
    r.origin_new = f.opt_flag("origin_new");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<CaseRecord> read_case_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open case file '{}'", path.string()));
  return read_case_records(in);
}

void write_case_records(std::ostream& out, std::span<const CaseRecord> records) {
  for (std::size_t i = 0; i < kRequired.size(); ++i) out << (i ? "," : "") << kRequired[i];
  for (auto k : kOptional) out << ',' << k;
  out << '\n';
  for (const auto& r : records) {
    out << r.case_id << ',' << r.defendant_id << ',' << r.judge_id.value_or("") << ','
        << r.attorney_id.value_or("") << ',' << r.court_id << ',' << r.hearing_date.iso() << ','
        << r.case_end_date.iso() << ',' << r.crime_type_code << ',' << r.crime_category << ','
        << opt_str(r.group_flag) << ',' << int(r.summons) << ',' << int(r.juvenile) << ','
        << int(r.private_attorney) << ',' << r.released << ',' << r.pretrial_detention_days << ','
        << opt_str(r.nonappearance) << ',' << opt_str(r.pretrial_recidivism) << ',' << opt_str(r.convicted)
        << ',' << opt_str(r.male) << ',' << (r.income_proxy ? fmt::format("{:.6f}", *r.income_proxy) : "")
        << ',' << opt_str(r.origin_new) << '\n';
  }
}

void write_case_records(const std::filesystem::path& path, std::span<const CaseRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write case file '{}'", path.string()));
  write_case_records(out, records);
}

}  // namespace audit
