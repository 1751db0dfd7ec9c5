#include "hntt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "hntt/error.hpp"

namespace hntt::stats {
namespace {

using nlohmann::json;

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Median of buf (reordered in place).
double median_inplace(std::vector<double>& buf) {
  const std::size_t n = buf.size();
  const std::size_t mid = n / 2;
  std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid), buf.end());
  const double upper = buf[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw ArgumentError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("quantile level must be in [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

SummaryStats summary_stats(const std::vector<double>& values) {
  if (values.empty()) throw ArgumentError("summary_stats: empty input");
  std::vector<double> s = values;
  std::sort(s.begin(), s.end());
  return {quantile_sorted(s, 0.5), quantile_sorted(s, 0.25), quantile_sorted(s, 0.75), s.size()};
}

BootstrapResult bootstrap_median_ci(const std::vector<double>& accuracies, int iterations, double level,
                                    Rng& rng) {
  if (accuracies.empty()) throw ArgumentError("bootstrap_median_ci: no accuracies");
  if (accuracies.size() < 2) throw ArgumentError("bootstrap_median_ci: at least 2 judges required");
  if (iterations <= 0) throw ArgumentError("bootstrap_median_ci: iterations must be > 0");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("bootstrap_median_ci: level must be in (0, 1)");
  for (double a : accuracies) {
    if (!(a >= 0.0 && a <= 1.0)) throw ArgumentError("bootstrap_median_ci: accuracies must lie in [0, 1]");
  }
  std::vector<double> sorted = accuracies;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  std::vector<double> medians(static_cast<std::size_t>(iterations));
  std::vector<double> buf(n);
  for (double& m : medians) {
    for (double& x : buf) x = sorted[uniform_index(rng, n)];
    m = median_inplace(buf);
  }
  std::sort(medians.begin(), medians.end());
  const double alpha = 1.0 - level;

  BootstrapResult r;
  r.median = quantile_sorted(sorted, 0.5);
  r.q1 = quantile_sorted(sorted, 0.25);
  r.q3 = quantile_sorted(sorted, 0.75);
  r.ci_lower = quantile_sorted(medians, alpha / 2.0);
  r.ci_upper = quantile_sorted(medians, 1.0 - alpha / 2.0);
  r.level = level;
  r.iterations = iterations;
  r.passed = ci_contains_chance(r.ci_lower, r.ci_upper);
  return r;
}

SubsampleSummary subsample_validation(const std::vector<double>& accuracies, int subsample_n, int repeats,
                                      int iterations, double level, Rng& rng) {
  if (subsample_n <= 1) throw ArgumentError("subsample_validation: subsample_n must be > 1");
  if (static_cast<std::size_t>(subsample_n) > accuracies.size()) {
    throw ArgumentError("subsample_validation: subsample_n (" + std::to_string(subsample_n) +
                        ") exceeds the number of judges (" + std::to_string(accuracies.size()) + ")");
  }
  if (repeats <= 0) throw ArgumentError("subsample_validation: repeats must be > 0");
  std::vector<double> pool = accuracies;
  std::sort(pool.begin(), pool.end());
  std::vector<double> medians, lowers, uppers;
  int passed = 0;
  for (int r = 0; r < repeats; ++r) {
    std::vector<double> work = pool;
    // Partial Fisher-Yates: the first subsample_n entries become the draw.
    for (std::size_t i = 0; i < static_cast<std::size_t>(subsample_n); ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, work.size() - i));
      std::swap(work[i], work[j]);
    }
    work.resize(static_cast<std::size_t>(subsample_n));
    const BootstrapResult b = bootstrap_median_ci(work, iterations, level, rng);
    medians.push_back(b.median);
    lowers.push_back(b.ci_lower);
    uppers.push_back(b.ci_upper);
    passed += b.passed ? 1 : 0;
  }
  SubsampleSummary s;
  s.subsample_n = subsample_n;
  s.repeats = repeats;
  s.mean_median = mean(medians);
  s.var_median = sample_variance(medians);
  s.mean_lower = mean(lowers);
  s.var_lower = sample_variance(lowers);
  s.mean_upper = mean(uppers);
  s.var_upper = sample_variance(uppers);
  s.pass_rate = static_cast<double>(passed) / repeats;
  return s;
}

RegressionResult ols_regression(const std::vector<double>& y,
                                const std::vector<std::vector<double>>& covariates) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto k = static_cast<Eigen::Index>(covariates.size());
  if (k == 0) throw ArgumentError("ols_regression: at least one covariate required");
  if (n <= k + 1) {
    throw ArgumentError("ols_regression: need more observations (" + std::to_string(n) +
                        ") than coefficients (" + std::to_string(k + 1) + ")");
  }
  Eigen::MatrixXd X(n, k + 1);
  X.col(0).setOnes();
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& c = covariates[static_cast<std::size_t>(j)];
    if (static_cast<Eigen::Index>(c.size()) != n) throw ArgumentError("ols_regression: covariate length mismatch");
    for (Eigen::Index i = 0; i < n; ++i) X(i, j + 1) = c[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd Y = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k + 1) {
    throw ArgumentError("ols_regression: design matrix is rank deficient (rank " + std::to_string(qr.rank()) +
                        " < " + std::to_string(k + 1) + "); a covariate is constant or collinear");
  }
  const Eigen::VectorXd beta = qr.solve(Y);
  const Eigen::VectorXd resid = Y - X * beta;
  const double ybar = Y.mean();
  const double sst = (Y.array() - ybar).square().sum();
  if (sst == 0.0) throw ArgumentError("ols_regression: response is constant");
  const double sse = resid.squaredNorm();

  RegressionResult r;
  r.intercept = beta(0);
  for (Eigen::Index j = 1; j <= k; ++j) r.betas.push_back(beta(j));
  r.sse = sse;
  r.ssr = sst - sse;
  r.r_squared = std::clamp(1.0 - sse / sst, 0.0, 1.0);
  r.df1 = static_cast<int>(k);
  r.df2 = static_cast<int>(n - k - 1);
  r.residuals.assign(resid.data(), resid.data() + n);

  const double sigma2 = sse / r.df2;
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
  boost::math::students_t tdist(r.df2);
  for (Eigen::Index j = 0; j <= k; ++j) {
    const double se = std::sqrt(sigma2 * xtx_inv(j, j));
    r.std_errors.push_back(se);
    if (se == 0.0) {
      r.t_values.push_back(beta(j) == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), beta(j)));
      r.p_values.push_back(beta(j) == 0.0 ? 1.0 : 0.0);
    } else {
      const double t = beta(j) / se;
      r.t_values.push_back(t);
      r.p_values.push_back(2.0 * boost::math::cdf(boost::math::complement(tdist, std::abs(t))));
    }
  }
  r.f_statistic = (r.ssr / r.df1) / (sse / r.df2);
  // Rounding residue on an exact fit.
  if (sse <= 1e-14 * sst || !std::isfinite(r.f_statistic)) {
    r.f_statistic = std::numeric_limits<double>::infinity();
    r.f_p_value = 0.0;
  } else {
    boost::math::fisher_f fdist(r.df1, r.df2);
    r.f_p_value = boost::math::cdf(boost::math::complement(fdist, r.f_statistic));
  }
  return r;
}

KappaResult cohens_kappa(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw ArgumentError("cohens_kappa: label vectors differ in length");
  if (a.empty()) throw ArgumentError("cohens_kappa: empty label vectors");
  double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] != 0 && a[i] != 1) || (b[i] != 0 && b[i] != 1)) throw ArgumentError("cohens_kappa: labels must be 0 or 1");
    if (a[i] && b[i]) ++n11;
    else if (a[i]) ++n10;
    else if (b[i]) ++n01;
    else ++n00;
  }
  const double n = static_cast<double>(a.size());
  KappaResult r;
  r.n = a.size();
  r.p_o = (n11 + n00) / n;
  const double pa = (n11 + n10) / n;
  const double pb = (n11 + n01) / n;
  r.p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
  if (r.p_e >= 1.0) {
    r.kappa = 1.0;  // p_e = 1 forces p_o = 1: both raters used one class only
  } else {
    r.kappa = (r.p_o - r.p_e) / (1.0 - r.p_e);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Codes

std::string to_string(Category c) {
  switch (c) {
    case Category::kSmooth: return "smooth";
    case Category::kGoal: return "goal";
    case Category::kAvoidance: return "avoidance";
    case Category::kReceptivity: return "receptivity";
    case Category::kIntuition: return "intuition";
    case Category::kSelfReference: return "self-reference";
  }
  return "unknown";
}

std::string to_string(Humanlike h) { return h == Humanlike::kMore ? "more" : "less"; }

std::string to_string(Direction d) {
  switch (d) {
    case Direction::kPlus: return "+";
    case Direction::kMinus: return "-";
    case Direction::kNone: return "n/a";
  }
  return "?";
}

Category category_from_string(const std::string& s) {
  for (Category c : {Category::kSmooth, Category::kGoal, Category::kAvoidance, Category::kReceptivity,
                     Category::kIntuition, Category::kSelfReference}) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("invalid_label", "unknown code category: " + s);
}

Humanlike humanlike_from_string(const std::string& s) {
  if (s == "more") return Humanlike::kMore;
  if (s == "less") return Humanlike::kLess;
  throw ValidationError("invalid_label", "humanlike must be more|less, got " + s);
}

Direction direction_from_string(const std::string& s) {
  if (s == "+") return Direction::kPlus;
  if (s == "-") return Direction::kMinus;
  if (s == "n/a" || s.empty()) return Direction::kNone;
  throw ValidationError("invalid_label", "direction must be +, - or n/a, got " + s);
}

void CodeLabel::validate() const {
  if (item_id.empty()) throw ValidationError("invalid_label", "label without item id");
  const bool directionless = category == Category::kIntuition || category == Category::kSelfReference;
  if (direction == Direction::kNone && !directionless) {
    throw ValidationError("invalid_label", "item " + item_id + ": " + to_string(category) + " needs a direction");
  }
  if (direction != Direction::kNone && directionless) {
    throw ValidationError("invalid_label", "item " + item_id + ": " + to_string(category) + " takes no direction");
  }
}

std::string CodeLabel::key() const {
  return direction == Direction::kNone ? to_string(category) : to_string(category) + to_string(direction);
}

namespace {

std::map<std::string, std::vector<CodeLabel>> by_item(const std::vector<CodeLabel>& labels) {
  std::map<std::string, std::vector<CodeLabel>> out;
  for (const CodeLabel& l : labels) {
    l.validate();
    out[l.item_id].push_back(l);
  }
  return out;
}

std::multiset<std::string> signature(const std::vector<CodeLabel>& labels) {
  std::multiset<std::string> s;
  for (const CodeLabel& l : labels) s.insert(l.key() + "|" + to_string(l.humanlike));
  return s;
}

}  // namespace

std::vector<KappaResult> kappa_by_code(const std::vector<CodeLabel>& a, const std::vector<CodeLabel>& b) {
  const auto ia = by_item(a);
  const auto ib = by_item(b);
  std::set<std::string> items, keys;
  for (const auto& [id, ls] : ia) {
    items.insert(id);
    for (const CodeLabel& l : ls) keys.insert(l.key());
  }
  for (const auto& [id, ls] : ib) {
    items.insert(id);
    for (const CodeLabel& l : ls) keys.insert(l.key());
  }
  if (items.empty()) throw ArgumentError("kappa_by_code: no labels");
  auto has = [](const std::map<std::string, std::vector<CodeLabel>>& m, const std::string& item, const std::string& key) {
    const auto it = m.find(item);
    if (it == m.end()) return 0;
    return std::any_of(it->second.begin(), it->second.end(), [&](const CodeLabel& l) { return l.key() == key; }) ? 1 : 0;
  };
  std::vector<KappaResult> out;
  for (const std::string& key : keys) {
    std::vector<int> va, vb;
    for (const std::string& item : items) {
      va.push_back(has(ia, item, key));
      vb.push_back(has(ib, item, key));
    }
    KappaResult r = cohens_kappa(va, vb);
    r.key = key;
    out.push_back(r);
  }
  return out;
}

ProportionTable code_proportions(const std::vector<CodeLabel>& labels, GroupBy group_by,
                                 const std::map<std::string, double>& judge_accuracy, double split) {
  if (labels.empty()) throw ArgumentError("code_proportions: no labels");
  ProportionTable t;
  for (const CodeLabel& l : labels) {
    l.validate();
    std::string group = to_string(l.humanlike);
    if (group_by == GroupBy::kAccuracyGroup) {
      const auto it = judge_accuracy.find(l.judge_id);
      if (it == judge_accuracy.end()) {
        throw ArgumentError("code_proportions: no accuracy for judge '" + l.judge_id + "' (item " + l.item_id + ")");
      }
      group = std::string(high_accuracy(it->second, split) ? "high" : "low") + "/" + group;
    }
    t.proportions[group][l.key()] += 1.0;
    ++t.counts[group];
  }
  for (auto& [group, row] : t.proportions) {
    const double total = static_cast<double>(t.counts[group]);
    for (auto& [key, v] : row) v /= total;
  }
  return t;
}

std::vector<CodeLabel> resolve_disagreements(const std::vector<CodeLabel>& a, const std::vector<CodeLabel>& b,
                                             Rng& rng, std::map<std::string, char>* chosen) {
  const auto ia = by_item(a);
  const auto ib = by_item(b);
  std::vector<std::string> only;
  for (const auto& [id, _] : ia) {
    if (!ib.count(id)) only.push_back(id);
  }
  for (const auto& [id, _] : ib) {
    if (!ia.count(id)) only.push_back(id);
  }
  if (!only.empty()) {
    std::string list;
    for (const auto& id : only) list += " " + id;
    throw ArgumentError("resolve_disagreements: annotators cover different items:" + list);
  }
  std::vector<CodeLabel> out;
  for (const auto& [id, la] : ia) {
    const auto& lb = ib.at(id);
    const std::vector<CodeLabel>* pick = &la;
    if (signature(la) != signature(lb)) {
      const bool take_a = uniform_index(rng, 2) == 0;
      pick = take_a ? &la : &lb;
      if (chosen) (*chosen)[id] = take_a ? 'a' : 'b';
    }
    out.insert(out.end(), pick->begin(), pick->end());
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<CodeLabel> read_labels_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("labels CSV is empty");
  const auto header = split_csv_line(line);
  auto col = [&](const std::string& name) -> int {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_item = col("item_id"), c_judge = col("judge_id"), c_cat = col("category"),
            c_h = col("humanlike"), c_dir = col("direction");
  if (c_item < 0 || c_cat < 0 || c_h < 0 || c_dir < 0) {
    throw ArgumentError("labels CSV needs columns item_id, category, humanlike, direction");
  }
  std::vector<CodeLabel> out;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    auto at = [&](int i) { return i >= 0 && static_cast<std::size_t>(i) < f.size() ? f[static_cast<std::size_t>(i)] : std::string(); };
    CodeLabel l;
    l.item_id = at(c_item);
    l.judge_id = at(c_judge);
    l.category = category_from_string(at(c_cat));
    l.humanlike = humanlike_from_string(at(c_h));
    l.direction = direction_from_string(at(c_dir));
    l.validate();
    out.push_back(std::move(l));
  }
  return out;
}

std::string write_labels_csv(const std::vector<CodeLabel>& labels) {
  std::string out = "item_id,judge_id,category,humanlike,direction\n";
  for (const CodeLabel& l : labels) {
    out += l.item_id + "," + l.judge_id + "," + to_string(l.category) + "," + to_string(l.humanlike) + "," +
           to_string(l.direction) + "\n";
  }
  return out;
}

json to_json(const BootstrapResult& r) {
  return {{"median", r.median},     {"iqr", {r.q1, r.q3}}, {"ci", {r.ci_lower, r.ci_upper}},
          {"level", r.level},       {"iterations", r.iterations}, {"passed", r.passed}};
}

json to_json(const SummaryStats& s) { return {{"median", s.median}, {"iqr", {s.q1, s.q3}}, {"n", s.n}}; }

json to_json(const SubsampleSummary& s) {
  return {{"subsample_n", s.subsample_n}, {"repeats", s.repeats},     {"mean_median", s.mean_median},
          {"var_median", s.var_median},   {"mean_lower", s.mean_lower}, {"var_lower", s.var_lower},
          {"mean_upper", s.mean_upper},   {"var_upper", s.var_upper},  {"pass_rate", s.pass_rate}};
}

namespace {
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
json finite_or_null(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(finite_or_null(x));
  return a;
}
}  // namespace

json to_json(const RegressionResult& r) {
  return {{"intercept", r.intercept},        {"betas", r.betas},
          {"std_errors", r.std_errors},      {"t_values", finite_or_null(r.t_values)},
          {"p_values", r.p_values},          {"r_squared", r.r_squared},
          {"f_statistic", finite_or_null(r.f_statistic)}, {"df", {r.df1, r.df2}},
          {"f_p_value", r.f_p_value}};
}

json to_json(const KappaResult& k) {
  return {{"key", k.key}, {"p_o", k.p_o}, {"p_e", k.p_e}, {"kappa", k.kappa}, {"n", k.n}};
}

json to_json(const ProportionTable& t) {
  json out = json::object();
  for (const auto& [group, row] : t.proportions) {
    out[group] = {{"count", t.counts.at(group)}, {"proportions", row}};
  }
  return out;
}

}  // namespace hntt::stats
