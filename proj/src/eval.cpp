#include "fraudkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "fraudkit/error.hpp"

namespace fraudkit::eval {

ConfusionMatrix confusion(const std::vector<Label>& y_true, const std::vector<Label>& y_pred) {
  if (y_true.size() != y_pred.size()) throw Error("confusion: label vectors differ in length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] > 1 || y_pred[i] > 1) throw Error("confusion: label outside {0, 1}");
    if (y_true[i] == kFraud) {
      (y_pred[i] == kFraud ? cm.tp : cm.fn)++;
    } else {
      (y_pred[i] == kFraud ? cm.fp : cm.tn)++;
    }
  }
  return cm;
}

namespace {
double ratio_or_zero(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

MetricsSummary summarize(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error("summarize: empty confusion matrix");
  MetricsSummary s;
  s.accuracy = ratio_or_zero(cm.tp + cm.tn, cm.total());
  s.precision = ratio_or_zero(cm.tp, cm.tp + cm.fp);
  s.recall = ratio_or_zero(cm.tp, cm.tp + cm.fn);
  s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

RocCurve roc_curve(const std::vector<Label>& y_true, const std::vector<double>& scores) {
  if (y_true.size() != scores.size()) throw Error("roc_curve: labels and scores differ in length");
  std::size_t pos = 0;
  for (Label y : y_true) {
    if (y > 1) throw Error("roc_curve: label outside {0, 1}");
    pos += y;
  }
  const std::size_t neg = y_true.size() - pos;
  if (pos == 0 || neg == 0) throw Error("roc_curve: both classes must be present");
  for (double s : scores) {
    if (std::isnan(s)) throw Error("roc_curve: NaN score");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve c;
  c.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == t; ++i) (y_true[order[i]] == kFraud ? tp : fp)++;
    c.points.push_back({t, ratio_or_zero(fp, neg), ratio_or_zero(tp, pos)});
  }
  return c;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return area;
}

void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Error("cannot write " + path.string());
  std::fprintf(f, "threshold,fpr,tpr\n");
  for (const auto& p : curve.points) {
    if (std::isinf(p.threshold)) {
      std::fprintf(f, "inf,%.17g,%.17g\n", p.fpr, p.tpr);
    } else {
      std::fprintf(f, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
    }
  }
  if (std::fclose(f) != 0) throw Error("error writing " + path.string());
}

RocCurve read_roc_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "threshold,fpr,tpr") throw ParseError(path.string() + ": bad ROC header", 1);
  RocCurve c;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    RocPoint p{};
    std::stringstream ss(line);
    std::string cell[3];
    for (auto& s : cell) std::getline(ss, s, ',');
    try {
      p.threshold = cell[0] == "inf" ? std::numeric_limits<double>::infinity() : std::stod(cell[0]);
      p.fpr = std::stod(cell[1]);
      p.tpr = std::stod(cell[2]);
    } catch (const std::exception&) {
      throw ParseError(path.string() + ": malformed ROC row", line_no);
    }
    c.points.push_back(p);
  }
  return c;
}

}  // namespace fraudkit::eval
