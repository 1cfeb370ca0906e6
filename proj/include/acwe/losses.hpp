#pragma once

#include <string>

#include "acwe/types.hpp"

namespace acwe::losses {

/// Scalar loss value plus its exact gradient with respect to the score field.
struct LossValue {
  double value = 0.0;
  Grid<double> grad;
};

/// Per-step loss breakdown for the training log.
///   acwe_term = area_term + lambda1*inside_residual + lambda2*outside_residual
///   total     = acwe_term + alpha*label_term
/// area_term is nu-weighted (nu * sum s); the residuals are raw sums.
struct LossReport {
  double total = 0.0;
  double acwe_term = 0.0;
  double label_term = 0.0;
  double area_term = 0.0;
  double inside_residual = 0.0;
  double outside_residual = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

struct CombinedLoss {
  LossReport report;
  Grid<double> grad;
};

/// Region-energy loss with the hard indicator relaxed to s = sigmoid(beta*score):
///   value = nu*sum s + lambda1*sum s*(g-c1)^2 + lambda2*sum (1-s)*(g-c2)^2
/// where (c1, c2) are the s-weighted region means, held constant for
/// differentiation. Gradient wrt score:
///   beta*s*(1-s)*[nu + lambda1*(g-c1)^2 - lambda2*(g-c2)^2]
/// Because c1, c2 exactly minimize the residuals given s, the blocked gradient
/// equals the true total derivative.
LossValue acwe_loss(const ScoreField& score, const Image& image, const HyperParams& hp);

/// Supervised loss on the raw score field f against a binary label u:
///   value = sum sqrt((dx f)^2 + (dy f)^2 + eps_tv) + sum ((1-u)^2 - (0-u)^2)*f
/// with forward differences, zero at the far edge. The region factor equals
/// (1-2u) pixelwise.
LossValue label_loss(const ScoreField& score, const BinaryMask& label, const HyperParams& hp);

/// total = acwe + alpha*label when a label is given, else acwe alone.
/// Gradients add linearly. Pass label = nullptr for the unsupervised path.
CombinedLoss combined_loss(const ScoreField& score, const Image& image,
                           const BinaryMask* label, const HyperParams& hp);

/// One-line JSON serialization for the training log.
std::string loss_report_json_line(const LossReport& report);

}  // namespace acwe::losses
