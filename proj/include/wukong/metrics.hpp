#pragma once

#include <span>

namespace wukong {

// Mean of -[y log s(z) + (1-y) log(1-s(z))], evaluated as
// max(z,0) - z*y + log1p(exp(-|z|)) so any finite logit gives a finite loss.
double logloss(std::span<const double> logits, std::span<const double> labels);

// Mann-Whitney rank statistic; tied scores contribute one half. Throws
// UndefinedMetricError unless both classes are present.
double auc(std::span<const double> scores, std::span<const double> labels);

// Binary entropy in nats, H(p) = -[p log p + (1-p) log(1-p)], H(0) = 0.
double binary_entropy(double p);

}  // namespace wukong
