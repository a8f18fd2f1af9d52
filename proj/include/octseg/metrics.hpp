#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "octseg/image.hpp"

namespace octseg {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct PairScore {
  ConfusionCounts counts;
  double recall = 0.0;
  double precision = 0.0;
  double dice = 0.0;
};

/// Pixel-level recall, precision and Dice of pred against gt. A 0/0 ratio
/// scores 1 (both masks empty on that axis means agreement).
PairScore score_pair(const BinaryMask& pred, const BinaryMask& gt);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1) estimator; 0 for a single value
};

MeanStd aggregate_stats(const std::vector<double>& values);

/// Inter-observer Dice between two graders.
double grader_iov(const BinaryMask& gt1, const BinaryMask& gt2);

/// Pixelwise AND of at least two equally sized masks.
BinaryMask intersect_masks(const std::vector<BinaryMask>& masks);

struct ImageScore {
  std::string name;
  PairScore score;
};

struct EvalReport {
  std::vector<ImageScore> images;
  MeanStd recall, precision, dice;
};

EvalReport make_report(std::vector<ImageScore> images);

/// "image=<name> recall=<f> precision=<f> dice=<f>" lines followed by the
/// mean/std block.
std::string format_report(const EvalReport& report);
/// Tab-separated variant with a header row and a trailing "mean"/"std" pair.
std::string format_report_tsv(const EvalReport& report);

}  // namespace octseg
