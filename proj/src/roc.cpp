#include "raw/roc.hpp"

#include "raw/error.hpp"
#include "raw/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace raw {

RocCurve roc_auc(std::span<const double> positive, std::span<const double> negative) {
  if (positive.empty() || negative.empty())
    throw InputError("ROC needs at least one positive and one negative score");
  struct Scored {
    double score;
    bool positive;
  };
  std::vector<Scored> all;
  for (double s : positive) all.push_back({s, true});
  for (double s : negative) all.push_back({s, false});
  for (const auto& s : all)
    if (std::isnan(s.score)) throw InputError("ROC scores must not be NaN");
  std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });

  const double p = static_cast<double>(positive.size());
  const double n = static_cast<double>(negative.size());
  RocCurve roc;
  roc.points.push_back({0.0, 0.0});
  // Area accumulated in integer units of one (positive, negative) pair, halved.
  long long tp = 0, fp = 0;
  long long twice_area = 0;
  for (std::size_t i = 0; i < all.size();) {
    const double t = all[i].score;
    long long dtp = 0, dfp = 0;
    for (; i < all.size() && all[i].score == t; ++i) (all[i].positive ? dtp : dfp) += 1;
    twice_area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    roc.points.push_back({static_cast<double>(fp) / n, static_cast<double>(tp) / p, t});
  }
  roc.auc = static_cast<double>(twice_area) / (2.0 * p * n);
  roc.tpr_at_fpr0 = 0.0;
  roc.fpr_at_tpr1 = 1.0;
  for (const auto& pt : roc.points) {
    if (pt.fpr == 0.0) roc.tpr_at_fpr0 = std::max(roc.tpr_at_fpr0, pt.tpr);
    if (pt.tpr == 1.0) roc.fpr_at_tpr1 = std::min(roc.fpr_at_tpr1, pt.fpr);
  }
  return roc;
}

double trapezoid_auc(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  return area;
}

double sign_test_p(int successes, int trials) {
  if (trials <= 0 || successes < 0 || successes > trials) throw InputError("bad sign-test counts");
  double p = 0.0;
  for (int k = successes; k <= trials; ++k)
    p += std::exp(std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0) -
                  trials * std::log(2.0));
  return std::min(p, 1.0);
}

std::string roc_points_csv(const RocCurve& roc) {
  std::ostringstream out;
  out << "fpr,tpr,threshold\n";
  for (const auto& pt : roc.points)
    out << io::decimal(pt.fpr) << ',' << io::decimal(pt.tpr) << ',' << io::decimal(pt.threshold)
        << '\n';
  return out.str();
}

std::vector<RocPoint> parse_roc_points_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("fpr,tpr", 0) != 0)
    throw FormatError("ROC CSV lacks its header");
  std::vector<RocPoint> pts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c, ','))
      throw FormatError("malformed ROC row '" + line + "'");
    char* end = nullptr;
    RocPoint pt;
    pt.fpr = std::strtod(a.c_str(), &end);
    if (*end) throw FormatError("bad fpr '" + a + "'");
    pt.tpr = std::strtod(b.c_str(), &end);
    if (*end) throw FormatError("bad tpr '" + b + "'");
    pt.threshold = std::strtod(c.c_str(), &end);
    if (*end) throw FormatError("bad threshold '" + c + "'");
    pts.push_back(pt);
  }
  return pts;
}

}  // namespace raw
