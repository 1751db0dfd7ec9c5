#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hntt/rng.hpp"

namespace hntt::stats {

// Linear interpolation between closest ranks (Hyndman-Fan type 7).
double quantile(std::vector<double> values, double p);
double quantile_sorted(const std::vector<double>& sorted, double p);

struct SummaryStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  std::size_t n = 0;
};
SummaryStats summary_stats(const std::vector<double>& values);

struct BootstrapResult {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double level = 0.95;
  int iterations = 0;
  bool passed = false;  // chance level 0.5 inside [ci_lower, ci_upper]
};

// Percentile bootstrap of the median. The input is sorted before
// resampling, so the result does not depend on input order.
BootstrapResult bootstrap_median_ci(const std::vector<double>& accuracies, int iterations, double level,
                                    Rng& rng);
inline bool ci_contains_chance(double lower, double upper) { return lower <= 0.5 && 0.5 <= upper; }

struct SubsampleSummary {
  int subsample_n = 0;
  int repeats = 0;
  double mean_median = 0.0;
  double var_median = 0.0;  // sample variance (n - 1)
  double mean_lower = 0.0;
  double var_lower = 0.0;
  double mean_upper = 0.0;
  double var_upper = 0.0;
  double pass_rate = 0.0;
};

SubsampleSummary subsample_validation(const std::vector<double>& accuracies, int subsample_n, int repeats,
                                      int iterations, double level, Rng& rng);

struct RegressionResult {
  double intercept = 0.0;
  std::vector<double> betas;
  std::vector<double> std_errors;  // [intercept, betas...]
  std::vector<double> t_values;
  std::vector<double> p_values;
  double r_squared = 0.0;
  double f_statistic = 0.0;
  int df1 = 0;
  int df2 = 0;
  double f_p_value = 0.0;
  double sse = 0.0;
  double ssr = 0.0;
  std::vector<double> residuals;
};

// Least squares with an intercept. `covariates` holds one column per
// covariate, each of length y.size().
RegressionResult ols_regression(const std::vector<double>& y,
                                const std::vector<std::vector<double>>& covariates);

struct KappaResult {
  std::string key;
  double p_o = 0.0;
  double p_e = 0.0;
  double kappa = 0.0;
  std::size_t n = 0;
};

// Binary Cohen's kappa. When p_e = 1 the raters used one class only and
// agreed everywhere; kappa is then defined as 1.
KappaResult cohens_kappa(const std::vector<int>& a, const std::vector<int>& b);

// ---------------------------------------------------------------------------
// Qualitative codes

enum class Category { kSmooth, kGoal, kAvoidance, kReceptivity, kIntuition, kSelfReference };
enum class Humanlike { kMore, kLess };
enum class Direction { kPlus, kMinus, kNone };

std::string to_string(Category c);
std::string to_string(Humanlike h);
std::string to_string(Direction d);
Category category_from_string(const std::string& s);
Humanlike humanlike_from_string(const std::string& s);
Direction direction_from_string(const std::string& s);

struct CodeLabel {
  std::string item_id;
  Category category = Category::kSmooth;
  Humanlike humanlike = Humanlike::kMore;
  Direction direction = Direction::kPlus;
  std::string judge_id;  // optional; needed for accuracy grouping

  void validate() const;
  std::string key() const;  // category + direction, e.g. "smooth+"
  bool operator==(const CodeLabel&) const = default;
};

// Per category+direction kappa over the union of items; an item counts
// as positive for a key when any of its labels carries that key.
std::vector<KappaResult> kappa_by_code(const std::vector<CodeLabel>& a, const std::vector<CodeLabel>& b);

enum class GroupBy { kHumanlike, kAccuracyGroup };

struct ProportionTable {
  // group -> key -> proportion; each group sums to 1.
  std::map<std::string, std::map<std::string, double>> proportions;
  std::map<std::string, std::size_t> counts;
};

// kAccuracyGroup needs every label's judge in `judge_accuracy`; a judge
// is "high" when accuracy > split, else "low", and groups are further
// split by humanlike ("high/more", "low/less", ...).
ProportionTable code_proportions(const std::vector<CodeLabel>& labels, GroupBy group_by,
                                 const std::map<std::string, double>& judge_accuracy = {},
                                 double split = 0.8);
inline bool high_accuracy(double accuracy, double split = 0.8) { return accuracy > split; }

// Items where the annotators' label sets differ take the whole set of a
// coin-flip-chosen annotator. Both inputs must cover the same items.
std::vector<CodeLabel> resolve_disagreements(const std::vector<CodeLabel>& a, const std::vector<CodeLabel>& b,
                                             Rng& rng, std::map<std::string, char>* chosen = nullptr);

// item_id,judge_id,category,humanlike,direction
std::vector<CodeLabel> read_labels_csv(const std::string& text);
std::string write_labels_csv(const std::vector<CodeLabel>& labels);

nlohmann::json to_json(const BootstrapResult& r);
nlohmann::json to_json(const SummaryStats& s);
nlohmann::json to_json(const SubsampleSummary& s);
nlohmann::json to_json(const RegressionResult& r);
nlohmann::json to_json(const KappaResult& k);
nlohmann::json to_json(const ProportionTable& t);

}  // namespace hntt::stats
