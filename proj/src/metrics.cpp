#include "octseg/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "octseg/error.hpp"

namespace octseg {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

void require_same_dims(const BinaryMask& a, const BinaryMask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::DimMismatch, "masks are " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                            " and " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

PairScore score_pair(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_dims(pred, gt);
  PairScore s;
  const auto p = pred.bits(), g = gt.bits();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] && g[i]) ++s.counts.tp;
    else if (p[i]) ++s.counts.fp;
    else if (g[i]) ++s.counts.fn;
    else ++s.counts.tn;
  }
  const auto& c = s.counts;
  s.recall = ratio(c.tp, c.tp + c.fn);
  s.precision = ratio(c.tp, c.tp + c.fp);
  s.dice = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return s;
}

MeanStd aggregate_stats(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorKind::EmptyList, "no values to aggregate");
  const double n = static_cast<double>(values.size());
  // Deviations are taken from the first value so equal inputs give an exact
  // mean and a zero spread.
  const double pivot = values.front();
  double shift = 0.0;
  for (const double v : values) shift += v - pivot;
  shift /= n;
  MeanStd out{pivot + shift, 0.0};
  if (values.size() > 1) {
    double ss = 0.0;
    for (const double v : values) ss += (v - pivot - shift) * (v - pivot - shift);
    out.std = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

double grader_iov(const BinaryMask& gt1, const BinaryMask& gt2) { return score_pair(gt1, gt2).dice; }

BinaryMask intersect_masks(const std::vector<BinaryMask>& masks) {
  if (masks.size() < 2) throw Error(ErrorKind::TooFew, "intersection needs at least two masks");
  std::vector<std::uint8_t> bits(masks[0].bits().begin(), masks[0].bits().end());
  for (std::size_t k = 1; k < masks.size(); ++k) {
    require_same_dims(masks[0], masks[k]);
    const auto other = masks[k].bits();
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = bits[i] & other[i];
  }
  return BinaryMask(masks[0].rows(), masks[0].cols(), std::move(bits));
}

EvalReport make_report(std::vector<ImageScore> images) {
  EvalReport report;
  std::vector<double> recall, precision, dice;
  for (const auto& img : images) {
    recall.push_back(img.score.recall);
    precision.push_back(img.score.precision);
    dice.push_back(img.score.dice);
  }
  report.recall = aggregate_stats(recall);
  report.precision = aggregate_stats(precision);
  report.dice = aggregate_stats(dice);
  report.images = std::move(images);
  return report;
}

std::string format_report(const EvalReport& report) {
  std::string out;
  for (const auto& img : report.images) {
    out += "image=" + img.name + " recall=" + fmt(img.score.recall) + " precision=" + fmt(img.score.precision) +
           " dice=" + fmt(img.score.dice) + "\n";
  }
  out += "mean recall=" + fmt(report.recall.mean) + " std=" + fmt(report.recall.std) + "\n";
  out += "mean precision=" + fmt(report.precision.mean) + " std=" + fmt(report.precision.std) + "\n";
  out += "mean dice=" + fmt(report.dice.mean) + " std=" + fmt(report.dice.std) + "\n";
  return out;
}

std::string format_report_tsv(const EvalReport& report) {
  std::string out = "image\trecall\tprecision\tdice\ttp\tfp\tfn\n";
  for (const auto& img : report.images) {
    const auto& c = img.score.counts;
    out += img.name + "\t" + fmt(img.score.recall) + "\t" + fmt(img.score.precision) + "\t" + fmt(img.score.dice) +
           "\t" + std::to_string(c.tp) + "\t" + std::to_string(c.fp) + "\t" + std::to_string(c.fn) + "\n";
  }
  out += "mean\t" + fmt(report.recall.mean) + "\t" + fmt(report.precision.mean) + "\t" + fmt(report.dice.mean) + "\n";
  out += "std\t" + fmt(report.recall.std) + "\t" + fmt(report.precision.std) + "\t" + fmt(report.dice.std) + "\n";
  return out;
}

}  // namespace octseg
