#include "fruitnerf/eval.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace fruitnerf {

double precision_score(int tp, int fp) { return tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0; }
double recall_score(int tp, int fn) { return tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0; }
double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

EvalReport score_counts(int tp, int fp, int fn) {
  EvalReport r;
  r.true_positives = tp;
  r.false_positives = fp;
  r.false_negatives = fn;
  r.precision = precision_score(tp, fp);
  r.recall = recall_score(tp, fn);
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

namespace {

// Min-cost square assignment (Hungarian method, potentials form). Returns
// the column assigned to each row.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

EvalReport match(std::span<const Vec3> pred, std::span<const Vec3> gt, double tau, Assignment assignment) {
  if (!(tau > 0.0)) throw std::invalid_argument("match radius must be > 0");
  std::vector<MatchedPair> pairs;
  if (assignment == Assignment::greedy) {
    std::vector<MatchedPair> candidates;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      for (std::size_t j = 0; j < gt.size(); ++j) {
        const double d = (pred[i] - gt[j]).norm();
        if (d <= tau) candidates.push_back({i, j, d});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const MatchedPair& a, const MatchedPair& b) {
      return std::tie(a.distance, a.pred, a.gt) < std::tie(b.distance, b.pred, b.gt);
    });
    std::vector<char> pred_used(pred.size(), 0), gt_used(gt.size(), 0);
    for (const auto& c : candidates) {
      if (pred_used[c.pred] || gt_used[c.gt]) continue;
      pred_used[c.pred] = gt_used[c.gt] = 1;
      pairs.push_back(c);
    }
  } else if (!pred.empty() && !gt.empty()) {
    const std::size_t n = std::max(pred.size(), gt.size());
    // Any unmatched slot costs more than all admissible matches combined, so
    // the optimum first maximizes the match count.
    const double miss = tau * static_cast<double>(n + 1);
    std::vector<std::vector<double>> cost(n, std::vector<double>(n, miss));
    for (std::size_t i = 0; i < pred.size(); ++i) {
      for (std::size_t j = 0; j < gt.size(); ++j) {
        const double d = (pred[i] - gt[j]).norm();
        if (d <= tau) cost[i][j] = d;
      }
    }
    const auto assign = hungarian(cost);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const int j = assign[i];
      if (j >= 0 && static_cast<std::size_t>(j) < gt.size() && cost[i][j] < miss) {
        pairs.push_back({i, static_cast<std::size_t>(j), cost[i][j]});
      }
    }
  }
  const int tp = static_cast<int>(pairs.size());
  EvalReport rep = score_counts(tp, static_cast<int>(pred.size()) - tp, static_cast<int>(gt.size()) - tp);
  rep.pairs = std::move(pairs);
  return rep;
}

void write_eval_report(const std::filesystem::path& path, const EvalReport& r, double tau) {
  using json = nlohmann::json;
  json doc;
  doc["match_radius"] = tau;
  doc["true_positives"] = r.true_positives;
  doc["false_positives"] = r.false_positives;
  doc["false_negatives"] = r.false_negatives;
  doc["precision"] = r.precision;
  doc["recall"] = r.recall;
  doc["f1"] = r.f1;
  doc["pairs"] = json::array();
  for (const auto& p : r.pairs) doc["pairs"].push_back({{"pred", p.pred}, {"gt", p.gt}, {"distance", p.distance}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace fruitnerf
