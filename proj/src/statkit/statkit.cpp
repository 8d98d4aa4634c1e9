#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "mle/error.hpp"
#include "mle/rng.hpp"
#include "mle/statkit.hpp"

namespace mle::statkit {

namespace {

double mean_of(std::span<const double> d) {
  double s = 0.0;
  for (double v : d) s += v;
  return s / static_cast<double>(d.size());
}

double sd_of(std::span<const double> d, double mean) {
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(d.size() - 1));
}

}  // namespace

PairedSample PairedSample::mutual(std::vector<std::string> labels, std::span<const double> a,
                                  std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("paired sample: a and b differ in length");
  if (!labels.empty() && labels.size() != a.size()) throw ValidationError("paired sample: label count mismatch");
  PairedSample s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) continue;
    s.labels.push_back(labels.empty() ? std::to_string(i) : labels[i]);
    s.a.push_back(a[i]);
    s.b.push_back(b[i]);
  }
  return s;
}

std::vector<double> PairedSample::differences() const {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
  return d;
}

std::string test_name(TestUsed t) { return t == TestUsed::paired_t ? "Paired t-test" : "Wilcoxon"; }

TTest paired_t(std::span<const double> d, double alpha) {
  require(d.size() >= 2, "paired_t: need at least 2 differences");
  const double n = static_cast<double>(d.size());
  const double mean = mean_of(d);
  const double sd = sd_of(d, mean);
  TTest r;
  r.df = n - 1.0;
  const boost::math::students_t_distribution<double> dist(r.df);
  const double se = sd / std::sqrt(n);
  const double tcrit = boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
  r.ci_low = mean - tcrit * se;
  r.ci_high = mean + tcrit * se;
  if (se == 0.0) {
    r.t = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p = mean == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = mean / se;
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

double wilcoxon_signed_rank(std::span<const double> diffs) {
  std::vector<double> d;
  for (double v : diffs)
    if (v != 0.0) d.push_back(v);
  const std::size_t n = d.size();
  if (n == 0) return 1.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  std::vector<long> rank2(n);  // doubled average ranks
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const long r2 = static_cast<long>(i + 1 + j + 1);  // 2 * average of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  long w2 = 0;
  long total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (d[i] > 0.0) w2 += rank2[i];
  }
  if (n <= 25) {
    std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
    count[0] = 1.0;
    long reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (long s = reach; s >= 0; --s)
        if (count[static_cast<std::size_t>(s)] != 0.0) count[static_cast<std::size_t>(s + rank2[i])] += count[static_cast<std::size_t>(s)];
      reach += rank2[i];
    }
    const double total = std::ldexp(1.0, static_cast<int>(n));
    double lo = 0.0;
    double hi = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (s <= w2) lo += count[static_cast<std::size_t>(s)];
      if (s >= w2) hi += count[static_cast<std::size_t>(s)];
    }
    return std::min(1.0, 2.0 * std::min(lo, hi) / total);
  }
  const double nn = static_cast<double>(n);
  const double w = 0.5 * static_cast<double>(w2);
  const double mu = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0) return 1.0;
  const double z = (std::abs(w - mu) - 0.5) / std::sqrt(var);
  const boost::math::normal_distribution<double> norm;
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(norm, z)));
}

double quantile_sorted(std::span<const double> sorted, double q) {
  require(!sorted.empty(), "quantile: empty data");
  require(q >= 0.0 && q <= 1.0, "quantile: q must be in [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double f = pos - static_cast<double>(lo);
  return sorted[lo] + f * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_mean_ci(std::span<const double> d, int resamples, std::uint64_t seed, double alpha) {
  require(!d.empty(), "bootstrap: empty data");
  require(resamples > 0, "bootstrap: resamples must be positive");
  Rng rng(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s += d[rng.below(d.size())];
    m = s / static_cast<double>(d.size());
  }
  std::sort(means.begin(), means.end());
  return {quantile_sorted(means, alpha / 2.0), quantile_sorted(means, 1.0 - alpha / 2.0)};
}

PairedResult paired_compare(const PairedSample& s, const PairedOptions& opts) {
  if (s.a.size() != s.b.size()) throw ValidationError("paired_compare: a and b differ in length");
  if (s.a.size() < 3) throw ValidationError("paired_compare: need at least 3 pairs");
  const auto d = s.differences();
  for (double v : d)
    if (!std::isfinite(v)) throw ValidationError("paired_compare: non-finite values (use PairedSample::mutual)");
  PairedResult r;
  r.n = d.size();
  r.mean_diff = mean_of(d);
  const double sd = sd_of(d, r.mean_diff);
  if (sd > 0.0) {
    r.d_z = r.mean_diff / sd;
    r.p_sw = shapiro_wilk(d).p;
  } else {
    r.d_z = r.mean_diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
    r.p_sw = 1.0;
  }
  if (r.p_sw > opts.alpha) {
    const TTest t = paired_t(d, opts.alpha);
    r.test = TestUsed::paired_t;
    r.p = t.p;
    r.ci_low = t.ci_low;
    r.ci_high = t.ci_high;
  } else {
    r.test = TestUsed::wilcoxon;
    r.p = wilcoxon_signed_rank(d);
    const Interval ci = bootstrap_mean_ci(d, opts.resamples, opts.seed, opts.alpha);
    r.ci_low = ci.low;
    r.ci_high = ci.high;
  }
  return r;
}

std::vector<double> holm_bonferroni(std::span<const double> p) {
  const std::size_t m = p.size();
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("holm_bonferroni: p-values must lie in [0, 1]");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
  std::vector<double> adj(m);
  double running = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - k) * p[order[k]]));
    adj[order[k]] = running;
  }
  return adj;
}

AncovaResult ancova_interaction(std::span<const double> y, std::span<const double> velocity,
                                std::span<const std::string> group) {
  const std::size_t n = y.size();
  if (velocity.size() != n || group.size() != n) throw ValidationError("ancova: input lengths differ");
  std::vector<std::string> levels;
  for (const auto& g : group)
    if (std::find(levels.begin(), levels.end(), g) == levels.end()) levels.push_back(g);
  const auto g = static_cast<Eigen::Index>(levels.size());
  if (g < 2) throw ValidationError("ancova: need at least 2 groups");
  const auto full_cols = 2 * g;
  if (static_cast<Eigen::Index>(n) <= full_cols) throw ValidationError("ancova: not enough observations");
  Eigen::MatrixXd xf = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), full_cols);
  Eigen::VectorXd yy(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const auto lvl = static_cast<Eigen::Index>(std::find(levels.begin(), levels.end(), group[i]) - levels.begin());
    yy[r] = y[i];
    xf(r, 0) = 1.0;
    xf(r, 1) = velocity[i];
    if (lvl > 0) {
      xf(r, 1 + lvl) = 1.0;
      xf(r, g + lvl) = velocity[i];
    }
  }
  const auto rss = [&](const Eigen::MatrixXd& x) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) throw ValidationError("ancova: design matrix is rank deficient");
    const Eigen::VectorXd beta = qr.solve(yy);
    return (yy - x * beta).squaredNorm();
  };
  const double rss_full = rss(xf);
  const double rss_red = rss(xf.leftCols(g + 1));
  AncovaResult res;
  res.df_num = static_cast<int>(g - 1);
  res.df_den = static_cast<int>(static_cast<Eigen::Index>(n) - full_cols);
  const double tss = (yy.array() - yy.mean()).square().sum();
  res.r2 = tss > 0.0 ? 1.0 - rss_full / tss : 1.0;
  if (rss_full <= 0.0) {
    res.f = rss_red > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    res.p = rss_red > 0.0 ? 0.0 : 1.0;
    return res;
  }
  res.f = ((rss_red - rss_full) / res.df_num) / (rss_full / res.df_den);
  const boost::math::fisher_f_distribution<double> dist(res.df_num, res.df_den);
  res.p = boost::math::cdf(boost::math::complement(dist, std::max(res.f, 0.0)));
  return res;
}

std::vector<std::string> groups_in_order(const CsvTable& table) {
  const std::size_t gcol = table.column("group");
  std::vector<std::string> out;
  for (const auto& row : table.rows)
    if (std::find(out.begin(), out.end(), row[gcol]) == out.end()) out.push_back(row[gcol]);
  return out;
}

std::vector<ComparisonRow> compare_family(const CsvTable& table, const std::string& baseline,
                                          const std::vector<std::string>& comparisons, const PairedOptions& opts) {
  const std::size_t scol = table.column("sample_id");
  const std::size_t gcol = table.column("group");
  const std::size_t vcol = table.column("value");
  std::vector<std::string> samples;
  std::map<std::string, std::map<std::string, double>> values;  // group -> sample -> value
  for (const auto& row : table.rows) {
    const std::string& sid = row[scol];
    if (std::find(samples.begin(), samples.end(), sid) == samples.end()) samples.push_back(sid);
    double v = std::numeric_limits<double>::quiet_NaN();
    const std::string& cell = row[vcol];
    if (!cell.empty() && cell != "NA" && cell != "nan" && cell != "NaN") {
      try {
        std::size_t used = 0;
        v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ValidationError("stats: non-numeric value '" + cell + "'");
      }
    }
    if (values[row[gcol]].count(sid)) throw ValidationError("stats: duplicate sample '" + sid + "' in group '" + row[gcol] + "'");
    values[row[gcol]][sid] = v;
  }
  if (!values.count(baseline)) throw ValidationError("stats: baseline group '" + baseline + "' not found");
  std::vector<ComparisonRow> rows;
  std::vector<double> raw;
  for (const auto& comp : comparisons) {
    if (!values.count(comp)) throw ValidationError("stats: comparison group '" + comp + "' not found");
    std::vector<std::string> labels;
    std::vector<double> a;
    std::vector<double> b;
    for (const auto& sid : samples) {
      const auto ia = values[baseline].find(sid);
      const auto ib = values[comp].find(sid);
      if (ia == values[baseline].end() || ib == values[comp].end()) continue;
      labels.push_back(sid);
      a.push_back(ia->second);
      b.push_back(ib->second);
    }
    ComparisonRow row{baseline, comp, paired_compare(PairedSample::mutual(labels, a, b), opts), 1.0};
    raw.push_back(row.result.p);
    rows.push_back(row);
  }
  const auto adj = holm_bonferroni(raw);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].p_adj = adj[i];
  return rows;
}

CsvTable comparison_table(const std::vector<ComparisonRow>& rows) {
  CsvTable t;
  t.header = {"baseline", "comparison", "n", "delta_mu", "ci_low", "ci_high", "p_sw", "test", "p_raw", "p_adj", "d_z"};
  for (const auto& r : rows) {
    const auto& x = r.result;
    t.rows.push_back({r.baseline, r.comparison, std::to_string(x.n), format_number(x.mean_diff),
                      format_number(x.ci_low), format_number(x.ci_high), format_number(x.p_sw), test_name(x.test),
                      format_number(x.p), format_number(r.p_adj), format_number(x.d_z)});
  }
  return t;
}

}  // namespace mle::statkit
