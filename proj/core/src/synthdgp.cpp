#include "audit/synthdgp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "audit/errors.hpp"
#include "audit/normal.hpp"
#include "audit/parallel.hpp"
#include "audit/rng.hpp"

namespace audit::dgp {

namespace {

constexpr int kTypesPerCategory = 2;
constexpr int kCrimeTypes = kTypesPerCategory * kCrimeCategories;

double link_cdf(Link link, double x) { return link == Link::Probit ? normal_cdf(x) : logistic_cdf(x); }

struct PastCase {
  Date start;
  Date end;
  bool released;
  bool misconduct_recorded;
  bool convicted;
};

// Same prior-misconduct rule as the ingest history features.
std::array<double, 4> history_features(const std::vector<PastCase>& past, Date now) {
  int n = 0, misconduct = 0, conviction = 0;
  for (std::size_t k = 0; k < past.size(); ++k) {
    const auto& c = past[k];
    if (!(c.start < now)) break;
    ++n;
    conviction |= c.convicted;
    if (!c.released || misconduct) continue;
    bool flagged = c.end < now && c.misconduct_recorded;
    const Date window_end = std::min(c.end, now);
    for (std::size_t m = k + 1; m < past.size() && !flagged; ++m) {
      if (window_end < past[m].start) break;
      flagged = c.start < past[m].start;
    }
    if (!flagged && !(c.end < now)) flagged = true;
    misconduct |= flagged;
  }
  return {n > 0 ? 1.0 : 0.0, static_cast<double>(n), static_cast<double>(misconduct),
          static_cast<double>(conviction)};
}

struct DefendantPlan {
  std::size_t first_case = 0;
  int n_cases = 0;
  int group = 0;
  int male = 1;
  double income = 0.0;
  int origin_new = 0;
};

struct DefendantOutput {
  std::vector<CaseRecord> records;
  std::vector<LatentCase> latent;
  std::vector<long> local_latent;  // per record, index into `latent` or -1
};

struct Context {
  const DGPSpec& spec;
  std::vector<double> thresholds;
  std::vector<double> type_risk;
  std::vector<int> strict_courts;
  std::vector<std::vector<int>> court_judges;
  int total_days = 0;
  Date origin;
};

double effective_offset(const DGPSpec& s, int category, bool no_priors) {
  return s.threshold_gap_group1 + s.category_gap[static_cast<std::size_t>(category - 1)] +
         (no_priors ? s.no_priors_gap : 0.0) - s.belief_bias_group1;
}

DefendantOutput simulate_defendant(const Context& ctx, std::size_t d, const DefendantPlan& plan) {
  const DGPSpec& s = ctx.spec;
  struct Draft {
    std::size_t global;
    Date date;
  };
  std::vector<Draft> drafts;
  for (int c = 0; c < plan.n_cases; ++c) {
    const std::size_t g = plan.first_case + static_cast<std::size_t>(c);
    CounterRng rng(s.seed, make_stream(StreamTag::Case, g));
    drafts.push_back({g, Date{ctx.origin.days + static_cast<int>(rng.below(static_cast<std::uint64_t>(ctx.total_days)))}});
  }
  std::sort(drafts.begin(), drafts.end(),
            [](const Draft& a, const Draft& b) { return std::tie(a.date, a.global) < std::tie(b.date, b.global); });
  for (std::size_t i = 1; i < drafts.size(); ++i)
    if (!(drafts[i - 1].date < drafts[i].date)) drafts[i].date = Date{drafts[i - 1].date.days + 1};

  DefendantOutput out;
  std::vector<PastCase> past;
  const double sg = std::sqrt(s.share_group1 * (1.0 - s.share_group1));
  const double std_group = sg > 0 ? (plan.group - s.share_group1) / sg : 0.0;
  const double rho = s.corr_group_unobs;

  for (const auto& draft : drafts) {
    CounterRng rng(s.seed, make_stream(StreamTag::Case, draft.global));
    rng.below(static_cast<std::uint64_t>(ctx.total_days));  // the date draw
    const int duration = 15 + static_cast<int>(rng.below(600));
    int court;
    const bool skewed = rng.bernoulli(s.court_assignment_skew);
    if (plan.group == 1 && skewed) court = ctx.strict_courts[rng.below(ctx.strict_courts.size())];
    else court = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.n_courts)));
    const auto& judges = ctx.court_judges[static_cast<std::size_t>(court)];
    const int judge = judges[rng.below(judges.size())];
    const int attorney =
        court * s.n_attorneys_per_court + static_cast<int>(rng.below(static_cast<std::uint64_t>(s.n_attorneys_per_court)));
    const int type = static_cast<int>(rng.below(kCrimeTypes));
    const int category = type / kTypesPerCategory + 1;

    double unobs_index = 0.0, first_unobs = 0.0;
    for (std::size_t u = 0; u < s.coef_unobs.size(); ++u) {
      const double e = rng.normal();
      double x = rho * std_group + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * e;
      if (s.binary_unobs) x = x > 0 ? 1.0 : 0.0;
      if (u == 0) first_unobs = x;
      unobs_index += s.coef_unobs[u] * x;
    }
    const double nu = rng.normal() * s.release_noise_sd;
    const double u_star = rng.uniform();
    const double u_split = rng.uniform();
    const double u_convict = rng.uniform();
    const std::uint64_t detention_draw = rng.below(static_cast<std::uint64_t>(duration) + 1);
    const bool extra_line = rng.bernoulli(s.multi_crime_rate);
    const int extra_type = static_cast<int>(rng.below(kCrimeTypes));

    const auto x = history_features(past, draft.date);
    double eta = s.intercept + ctx.type_risk[static_cast<std::size_t>(type)] + unobs_index;
    for (std::size_t k = 0; k < 4; ++k) eta += s.coef_obs[k] * x[k];
    const double p = link_cdf(s.link, eta);
    const double predicted = link_cdf(s.link, eta + nu);
    const double t = ctx.thresholds[static_cast<std::size_t>(judge)];
    const double offset = effective_offset(s, category, x[0] == 0.0);
    const int r0 = predicted <= t;
    const int r1 = predicted <= t + offset;
    const int released = plan.group == 1 ? r1 : r0;
    const int y_star = u_star < p;

    CaseRecord rec;
    rec.case_id = fmt::format("C{:08d}", draft.global);
    rec.defendant_id = fmt::format("D{:07d}", d);
    rec.judge_id = fmt::format("J{:04d}", judge);
    rec.attorney_id = fmt::format("A{:05d}", attorney);
    rec.court_id = fmt::format("CT{:03d}", court);
    rec.hearing_date = draft.date;
    rec.case_end_date = Date{draft.date.days + duration};
    rec.crime_type_code = fmt::format("T{:02d}", type + 1);
    rec.crime_category = category;
    rec.group_flag = plan.group;
    rec.released = released;
    rec.pretrial_detention_days = released ? 0 : static_cast<int>(detention_draw);
    if (released) {
      const bool na = y_star && u_split < 0.55;
      const bool rc = y_star && u_split >= 0.4;
      rec.nonappearance = na;
      rec.pretrial_recidivism = rc;
    }
    rec.convicted = u_convict < std::clamp(s.conviction_base + s.conviction_misconduct * y_star, 0.0, 1.0);
    rec.male = plan.male;
    rec.income_proxy = plan.income;
    rec.origin_new = plan.group == 1 ? plan.origin_new : 0;

    LatentCase lat;
    lat.y_star = y_star;
    lat.p = p;
    lat.eta = eta;
    lat.d = r1 - r0;
    lat.threshold = t;
    lat.judge = judge;
    lat.group = plan.group;
    lat.x_obs = x;
    lat.x_unobs = first_unobs;

    past.push_back({rec.hearing_date, rec.case_end_date, released == 1,
                    rec.nonappearance.value_or(0) == 1 || rec.pretrial_recidivism.value_or(0) == 1,
                    rec.convicted.value_or(0) == 1});
    out.local_latent.push_back(static_cast<long>(out.latent.size()));
    out.latent.push_back(lat);
    if (extra_line) {
      CaseRecord extra = rec;
      const int t2 = extra_type == type ? (type + 1) % kCrimeTypes : extra_type;
      extra.crime_type_code = fmt::format("T{:02d}", t2 + 1);
      extra.crime_category = t2 / kTypesPerCategory + 1;
      out.records.push_back(std::move(rec));
      out.records.push_back(std::move(extra));
      out.local_latent.push_back(-1);
    } else {
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

CaseRecord contamination_record(const Context& ctx, std::size_t index, int kind) {
  const DGPSpec& s = ctx.spec;
  CounterRng rng(s.seed, make_stream(StreamTag::Case, (std::uint64_t{1} << 40) + index));
  CaseRecord r;
  const int court = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.n_courts)));
  const auto& judges = ctx.court_judges[static_cast<std::size_t>(court)];
  const int judge = judges[rng.below(judges.size())];
  const int type = static_cast<int>(rng.below(kCrimeTypes));
  const int duration = 15 + static_cast<int>(rng.below(600));
  r.case_id = fmt::format("X{:08d}", index);
  r.defendant_id = fmt::format("X{:07d}", index);
  r.judge_id = fmt::format("J{:04d}", judge);
  r.attorney_id = fmt::format("A{:05d}", court * s.n_attorneys_per_court);
  r.court_id = fmt::format("CT{:03d}", court);
  r.hearing_date = Date{ctx.origin.days + static_cast<int>(rng.below(static_cast<std::uint64_t>(ctx.total_days)))};
  r.case_end_date = Date{r.hearing_date.days + duration};
  r.crime_type_code = fmt::format("T{:02d}", type + 1);
  r.crime_category = type / kTypesPerCategory + 1;
  r.group_flag = rng.bernoulli(s.share_group1);
  r.summons = kind == 0;
  r.juvenile = kind == 1;
  r.private_attorney = kind == 2;
  r.released = rng.bernoulli(0.8);
  r.pretrial_detention_days = r.released ? 0 : 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(duration)));
  if (r.released) {
    r.nonappearance = rng.bernoulli(0.15);
    r.pretrial_recidivism = rng.bernoulli(0.15);
  }
  r.convicted = rng.bernoulli(0.4);
  r.male = 1;
  r.income_proxy = 0.0;
  r.origin_new = 0;
  return r;
}

Context make_context(const DGPSpec& spec) {
  Context ctx{spec, judge_thresholds(spec), crime_type_risk(spec), {}, {}, 0, Date::from_ymd(spec.start_year, 1, 1)};
  ctx.total_days = Date::from_ymd(spec.start_year + spec.n_years, 1, 1).days - ctx.origin.days;
  ctx.court_judges.resize(static_cast<std::size_t>(spec.n_courts));
  for (int j = 0; j < spec.n_judges; ++j) ctx.court_judges[static_cast<std::size_t>(judge_court(spec, j))].push_back(j);
  std::vector<double> offsets(static_cast<std::size_t>(spec.n_courts));
  for (int c = 0; c < spec.n_courts; ++c) {
    CounterRng rng(spec.seed, make_stream(StreamTag::Court, static_cast<std::uint64_t>(c)));
    offsets[static_cast<std::size_t>(c)] = rng.uniform(-spec.court_threshold_spread, spec.court_threshold_spread);
  }
  std::vector<int> order(static_cast<std::size_t>(spec.n_courts));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return offsets[static_cast<std::size_t>(a)] < offsets[static_cast<std::size_t>(b)]; });
  const std::size_t half = std::max<std::size_t>(1, order.size() / 2);
  ctx.strict_courts.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  return ctx;
}

}  // namespace

int judge_court(const DGPSpec& spec, int judge) { return judge % spec.n_courts; }

std::vector<double> judge_thresholds(const DGPSpec& spec) {
  std::vector<double> court_offset(static_cast<std::size_t>(spec.n_courts));
  for (int c = 0; c < spec.n_courts; ++c) {
    CounterRng rng(spec.seed, make_stream(StreamTag::Court, static_cast<std::uint64_t>(c)));
    court_offset[static_cast<std::size_t>(c)] = rng.uniform(-spec.court_threshold_spread, spec.court_threshold_spread);
  }
  std::vector<double> t(static_cast<std::size_t>(spec.n_judges));
  for (int j = 0; j < spec.n_judges; ++j) {
    CounterRng rng(spec.seed, make_stream(StreamTag::Judge, static_cast<std::uint64_t>(j)));
    t[static_cast<std::size_t>(j)] = spec.threshold_base + court_offset[static_cast<std::size_t>(judge_court(spec, j))] +
                                     rng.uniform(-spec.judge_threshold_spread, spec.judge_threshold_spread);
  }
  return t;
}

std::vector<double> crime_type_risk(const DGPSpec& spec) {
  std::vector<double> risk(kCrimeTypes);
  for (int k = 0; k < kCrimeTypes; ++k) {
    CounterRng rng(spec.seed, make_stream(StreamTag::CrimeType, static_cast<std::uint64_t>(k)));
    risk[static_cast<std::size_t>(k)] = spec.crime_risk_sd * rng.normal();
  }
  return risk;
}

void DGPSpec::validate() const {
  auto prob = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(fmt::format("dgp.{} = {} outside [0, 1]", name, v));
  };
  if (n_cases < 1) throw ConfigError("dgp.n_cases must be at least 1");
  if (n_courts < 1 || n_judges < n_courts)
    throw ConfigError("dgp.n_judges must be at least dgp.n_courts (one judge per court)");
  if (n_years < 1) throw ConfigError("dgp.n_years must be at least 1");
  if (n_attorneys_per_court < 1) throw ConfigError("dgp.n_attorneys_per_court must be at least 1");
  prob(share_group1, "share_group1");
  prob(threshold_base, "threshold_base");
  prob(court_assignment_skew, "court_assignment_skew");
  prob(summons_rate, "summons_rate");
  prob(juvenile_rate, "juvenile_rate");
  prob(private_attorney_rate, "private_attorney_rate");
  prob(multi_crime_rate, "multi_crime_rate");
  if (!(corr_group_unobs >= -1.0 && corr_group_unobs <= 1.0))
    throw ConfigError("dgp.corr_group_unobs outside [-1, 1]");
  if (binary_unobs && corr_group_unobs != 0.0 && coef_unobs.empty())
    throw ConfigError("dgp.corr_group_unobs needs at least one unobserved column");
  if (mean_extra_cases < 0 || history_scale_group1 < 0) throw ConfigError("dgp case-count parameters must be >= 0");
  if (release_noise_sd < 0 || crime_risk_sd < 0) throw ConfigError("dgp standard deviations must be >= 0");

  const auto t = judge_thresholds(*this);
  for (int j = 0; j < n_judges; ++j) {
    const double base = t[static_cast<std::size_t>(j)];
    if (base < 0.0 || base > 1.0)
      throw ConfigError(fmt::format("dgp: judge J{:04d} group 0 threshold {:.4f} outside [0, 1]", j, base));
    for (int k = 1; k <= kCrimeCategories; ++k)
      for (bool no_priors : {false, true}) {
        const double eff = base + effective_offset(*this, k, no_priors);
        if (eff < 0.0 || eff > 1.0)
          throw ConfigError(fmt::format(
              "dgp: judge J{:04d} group 1 threshold {:.4f} outside [0, 1] (category {}, no priors {})", j, eff, k,
              no_priors ? 1 : 0));
      }
  }
}

CaseDataset generate(const DGPSpec& spec, unsigned threads) {
  spec.validate();
  const Context ctx = make_context(spec);

  std::vector<DefendantPlan> plans;
  std::size_t total = 0;
  for (std::size_t d = 0; total < spec.n_cases; ++d) {
    CounterRng rng(spec.seed, make_stream(StreamTag::Defendant, d));
    DefendantPlan p;
    p.group = rng.bernoulli(spec.share_group1);
    const double mean = spec.mean_extra_cases * (p.group ? spec.history_scale_group1 : 1.0);
    p.n_cases = 1 + static_cast<int>(rng.poisson(mean));
    p.male = rng.bernoulli(0.88);
    p.income = rng.normal();
    p.origin_new = rng.bernoulli(0.5);
    p.n_cases = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(p.n_cases), spec.n_cases - total));
    p.first_case = total;
    total += static_cast<std::size_t>(p.n_cases);
    plans.push_back(p);
  }

  std::vector<DefendantOutput> outputs(plans.size());
  parallel_for(plans.size(), threads, [&](std::size_t d) { outputs[d] = simulate_defendant(ctx, d, plans[d]); });

  CaseDataset data;
  data.latent.reserve(spec.n_cases);
  for (auto& o : outputs) {
    const long base = static_cast<long>(data.latent.size());
    for (std::size_t i = 0; i < o.records.size(); ++i) {
      data.records.push_back(std::move(o.records[i]));
      data.latent_index.push_back(o.local_latent[i] < 0 ? -1 : base + o.local_latent[i]);
    }
    data.latent.insert(data.latent.end(), o.latent.begin(), o.latent.end());
  }
  const double rates[3] = {spec.summons_rate, spec.juvenile_rate, spec.private_attorney_rate};
  std::size_t extra = 0;
  for (int kind = 0; kind < 3; ++kind) {
    const auto count = static_cast<std::size_t>(std::llround(rates[kind] * static_cast<double>(spec.n_cases)));
    for (std::size_t i = 0; i < count; ++i) {
      data.records.push_back(contamination_record(ctx, extra++, kind));
      data.latent_index.push_back(-1);
    }
  }
  return data;
}

DiscriminationEstimate dataset_discrimination(const CaseDataset& data) {
  DiscriminationEstimate e;
  const auto n = static_cast<double>(data.latent.size());
  if (data.latent.empty()) return e;
  double sum = 0, sum_sq = 0, s0 = 0, n0 = 0, s1 = 0, n1 = 0;
  for (const auto& l : data.latent) {
    sum += l.d;
    sum_sq += l.d * l.d;
    if (l.y_star) {
      s1 += l.d;
      n1 += 1;
    } else {
      s0 += l.d;
      n0 += 1;
    }
  }
  e.share_y1 = n1 / n;
  e.d_given_y0 = n0 > 0 ? s0 / n0 : 0.0;
  e.d_given_y1 = n1 > 0 ? s1 / n1 : 0.0;
  // Outer expectation over Y* of the Y*-conditional means.
  e.d = (1.0 - e.share_y1) * e.d_given_y0 + e.share_y1 * e.d_given_y1;
  const double var = std::max(0.0, sum_sq / n - (sum / n) * (sum / n));
  e.se = std::sqrt(var / n);
  return e;
}

DiscriminationEstimate true_discrimination(const DGPSpec& spec, std::size_t n_draws, unsigned threads) {
  if (n_draws < 10'000) throw ConfigError("true_discrimination: at least 10^4 draws are required");
  DGPSpec s = spec;
  s.n_cases = n_draws;
  s.summons_rate = s.juvenile_rate = s.private_attorney_rate = s.multi_crime_rate = 0.0;
  return dataset_discrimination(generate(s, threads));
}

double calibrate_threshold_gap(DGPSpec spec, double target, std::size_t n_draws, unsigned threads) {
  // D moves opposite to a shrinking gap; search the side matching the target.
  double lo = target < 0 ? -0.45 : 0.0;
  double hi = target < 0 ? 0.0 : 0.45;
  auto d_at = [&](double gap) {
    spec.threshold_gap_group1 = gap;
    return true_discrimination(spec, n_draws, threads).d;
  };
  for (int it = 0; it < 40 && hi - lo > 1e-6; ++it) {
    const double mid = 0.5 * (lo + hi);
    double d;
    try {
      d = d_at(mid);
    } catch (const ConfigError&) {
      // Thresholds left [0, 1]: shrink toward zero gap.
      (target < 0 ? lo : hi) = mid;
      continue;
    }
    if (d < target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

std::string join_values(const double* v, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? "," : "") + fmt::format("{}", v[i]);
  return out;
}

double parse_double(const std::string& key, std::string_view text) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError(fmt::format("dgp.{}: '{}' is not a number", key, text));
  return out;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find(',', start);
    if (pos == std::string::npos) pos = text.size();
    std::string item = text.substr(start, pos - start);
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(parse_double(key, item));
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> to_kv(const DGPSpec& s) {
  std::map<std::string, std::string> kv;
  kv["n_cases"] = fmt::format("{}", s.n_cases);
  kv["n_judges"] = fmt::format("{}", s.n_judges);
  kv["n_courts"] = fmt::format("{}", s.n_courts);
  kv["n_years"] = fmt::format("{}", s.n_years);
  kv["start_year"] = fmt::format("{}", s.start_year);
  kv["n_attorneys_per_court"] = fmt::format("{}", s.n_attorneys_per_court);
  kv["share_group1"] = fmt::format("{}", s.share_group1);
  kv["mean_extra_cases"] = fmt::format("{}", s.mean_extra_cases);
  kv["history_scale_group1"] = fmt::format("{}", s.history_scale_group1);
  kv["coef_obs"] = join_values(s.coef_obs.data(), s.coef_obs.size());
  kv["coef_unobs"] = join_values(s.coef_unobs.data(), s.coef_unobs.size());
  kv["corr_group_unobs"] = fmt::format("{}", s.corr_group_unobs);
  kv["binary_unobs"] = s.binary_unobs ? "true" : "false";
  kv["intercept"] = fmt::format("{}", s.intercept);
  kv["crime_risk_sd"] = fmt::format("{}", s.crime_risk_sd);
  kv["link"] = s.link == Link::Probit ? "probit" : "logistic";
  kv["release_noise_sd"] = fmt::format("{}", s.release_noise_sd);
  kv["threshold_base"] = fmt::format("{}", s.threshold_base);
  kv["court_threshold_spread"] = fmt::format("{}", s.court_threshold_spread);
  kv["judge_threshold_spread"] = fmt::format("{}", s.judge_threshold_spread);
  kv["threshold_gap_group1"] = fmt::format("{}", s.threshold_gap_group1);
  kv["belief_bias_group1"] = fmt::format("{}", s.belief_bias_group1);
  kv["category_gap"] = join_values(s.category_gap.data(), s.category_gap.size());
  kv["no_priors_gap"] = fmt::format("{}", s.no_priors_gap);
  kv["court_assignment_skew"] = fmt::format("{}", s.court_assignment_skew);
  kv["conviction_base"] = fmt::format("{}", s.conviction_base);
  kv["conviction_misconduct"] = fmt::format("{}", s.conviction_misconduct);
  kv["summons_rate"] = fmt::format("{}", s.summons_rate);
  kv["juvenile_rate"] = fmt::format("{}", s.juvenile_rate);
  kv["private_attorney_rate"] = fmt::format("{}", s.private_attorney_rate);
  kv["multi_crime_rate"] = fmt::format("{}", s.multi_crime_rate);
  kv["seed"] = fmt::format("{}", s.seed);
  return kv;
}

void apply_kv(DGPSpec& s, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    auto num = [&] { return parse_double(key, value); };
    auto count = [&] {
      const double v = num();
      if (v < 0 || v != std::floor(v)) throw ConfigError(fmt::format("dgp.{} must be a non-negative integer", key));
      return v;
    };
    if (key == "n_cases") s.n_cases = static_cast<std::size_t>(count());
    else if (key == "n_judges") s.n_judges = static_cast<int>(count());
    else if (key == "n_courts") s.n_courts = static_cast<int>(count());
    else if (key == "n_years") s.n_years = static_cast<int>(count());
    else if (key == "start_year") s.start_year = static_cast<int>(count());
    else if (key == "n_attorneys_per_court") s.n_attorneys_per_court = static_cast<int>(count());
    else if (key == "share_group1") s.share_group1 = num();
    else if (key == "mean_extra_cases") s.mean_extra_cases = num();
    else if (key == "history_scale_group1") s.history_scale_group1 = num();
    else if (key == "coef_obs") {
      const auto v = parse_list(key, value);
      if (v.size() != 4) throw ConfigError("dgp.coef_obs needs 4 values");
      std::copy(v.begin(), v.end(), s.coef_obs.begin());
    } else if (key == "coef_unobs") s.coef_unobs = parse_list(key, value);
    else if (key == "corr_group_unobs") s.corr_group_unobs = num();
    else if (key == "binary_unobs") {
      if (value != "true" && value != "false") throw ConfigError("dgp.binary_unobs must be true or false");
      s.binary_unobs = value == "true";
    } else if (key == "intercept") s.intercept = num();
    else if (key == "crime_risk_sd") s.crime_risk_sd = num();
    else if (key == "link") {
      if (value == "probit") s.link = Link::Probit;
      else if (value == "logistic") s.link = Link::Logistic;
      else throw ConfigError("dgp.link must be probit or logistic");
    } else if (key == "release_noise_sd") s.release_noise_sd = num();
    else if (key == "threshold_base") s.threshold_base = num();
    else if (key == "court_threshold_spread") s.court_threshold_spread = num();
    else if (key == "judge_threshold_spread") s.judge_threshold_spread = num();
    else if (key == "threshold_gap_group1") s.threshold_gap_group1 = num();
    else if (key == "belief_bias_group1") s.belief_bias_group1 = num();
    else if (key == "category_gap") {
      const auto v = parse_list(key, value);
      if (v.size() != 9) throw ConfigError("dgp.category_gap needs 9 values");
      std::copy(v.begin(), v.end(), s.category_gap.begin());
    } else if (key == "no_priors_gap") s.no_priors_gap = num();
    else if (key == "court_assignment_skew") s.court_assignment_skew = num();
    else if (key == "conviction_base") s.conviction_base = num();
    else if (key == "conviction_misconduct") s.conviction_misconduct = num();
    else if (key == "summons_rate") s.summons_rate = num();
    else if (key == "juvenile_rate") s.juvenile_rate = num();
    else if (key == "private_attorney_rate") s.private_attorney_rate = num();
    else if (key == "multi_crime_rate") s.multi_crime_rate = num();
    else if (key == "seed") {
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError("dgp.seed must be an unsigned 64-bit integer");
      s.seed = v;
    } else throw ConfigError(fmt::format("unknown key 'dgp.{}'", key));
  }
}

}  // namespace audit::dgp
