#include "wukong/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "wukong/errors.hpp"

namespace wukong {

namespace {

void check_labels(std::span<const double> values, std::span<const double> labels, const char* what) {
  if (values.size() != labels.size()) {
    throw DataError(std::string(what) + ": " + std::to_string(values.size()) + " scores vs " +
                    std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw DataError(std::string(what) + ": label " + std::to_string(labels[i]) + " at index " +
                      std::to_string(i) + " is not 0/1");
    }
  }
}

}  // namespace

double logloss(std::span<const double> logits, std::span<const double> labels) {
  check_labels(logits, labels, "logloss");
  if (logits.empty()) throw UndefinedMetricError("logloss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    acc += std::max(z, 0.0) - z * labels[i] + std::log1p(std::exp(-std::abs(z)));
  }
  return acc / static_cast<double>(logits.size());
}

double auc(std::span<const double> scores, std::span<const double> labels) {
  check_labels(scores, labels, "auc");
  const std::size_t n = scores.size();
  std::uint64_t positives = 0;
  for (double y : labels) positives += y == 1.0;
  const std::uint64_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("auc: needs at least one positive and one negative example");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum of positives, with ties at their average rank.
  std::uint64_t twice_rank_sum = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    std::uint64_t pos_in_group = 0;
    for (std::size_t t = i; t < j; ++t) pos_in_group += labels[order[t]] == 1.0;
    // ranks i+1..j average to (i+1+j)/2
    twice_rank_sum += pos_in_group * static_cast<std::uint64_t>(i + 1 + j);
    i = j;
  }
  const std::uint64_t twice_u = twice_rank_sum - positives * (positives + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log(p) + (1.0 - p) * std::log1p(-p));
}

}  // namespace wukong
