#pragma once

#include "fruitnerf/geometry.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fruitnerf {

struct MatchedPair {
  std::size_t pred = 0;
  std::size_t gt = 0;
  double distance = 0.0;
};

struct EvalReport {
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::vector<MatchedPair> pairs;
};

enum class Assignment { greedy, optimal };

// Precision, recall and F1 from detection counts; each is 0 when its
// denominator is 0.
double precision_score(int tp, int fp);
double recall_score(int tp, int fn);
double f1_score(double precision, double recall);
EvalReport score_counts(int tp, int fp, int fn);

// Pairs predictions with ground truth at distance <= tau. Greedy repeatedly
// takes the globally closest unmatched pair; optimal maximizes the number of
// matches, then minimizes their summed distance.
EvalReport match(std::span<const Vec3> pred, std::span<const Vec3> gt, double tau,
                 Assignment assignment = Assignment::greedy);

void write_eval_report(const std::filesystem::path& path, const EvalReport& report, double tau);

}  // namespace fruitnerf
