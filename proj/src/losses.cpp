#include "acwe/losses.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "acwe/core.hpp"

namespace acwe::losses {

namespace {

void check_finite(const Grid<double>& g, const char* who) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i]))
      throw std::invalid_argument(std::string(who) + ": non-finite input values");
  }
}

struct AcweBreakdown {
  double area_term = 0.0;        // nu * sum s
  double inside_residual = 0.0;  // sum s (g-c1)^2
  double outside_residual = 0.0; // sum (1-s) (g-c2)^2
  RegionStats stats;
  double value = 0.0;
  Grid<double> grad;
};

AcweBreakdown acwe_eval(const ScoreField& score, const Image& image, const HyperParams& hp) {
  if (score.height() != image.height() || score.width() != image.width())
    throw std::invalid_argument("acwe_loss: score and image shapes differ");
  check_finite(score.data, "acwe_loss");
  check_finite(image.data, "acwe_loss");

  SoftMask s(score.height(), score.width());
  for (std::size_t i = 0; i < score.size(); ++i)
    s[i] = 1.0 / (1.0 + std::exp(-hp.beta * score[i]));

  AcweBreakdown out;
  out.stats = region_means(image, s);
  out.grad = Grid<double>(score.height(), score.width());
  double soft_area = 0.0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    const double rin = image[i] - out.stats.c1;
    const double rout = image[i] - out.stats.c2;
    const double rin2 = rin * rin;
    const double rout2 = rout * rout;
    soft_area += s[i];
    out.inside_residual += s[i] * rin2;
    out.outside_residual += (1.0 - s[i]) * rout2;
    out.grad[i] = hp.beta * s[i] * (1.0 - s[i]) *
                  (hp.nu + hp.lambda1 * rin2 - hp.lambda2 * rout2);
  }
  out.area_term = hp.nu * soft_area;
  out.value = out.area_term + hp.lambda1 * out.inside_residual +
              hp.lambda2 * out.outside_residual;
  return out;
}

}  // namespace

LossValue acwe_loss(const ScoreField& score, const Image& image, const HyperParams& hp) {
  AcweBreakdown b = acwe_eval(score, image, hp);
  return {b.value, std::move(b.grad)};
}

LossValue label_loss(const ScoreField& score, const BinaryMask& label, const HyperParams& hp) {
  if (score.height() != label.height() || score.width() != label.width())
    throw std::invalid_argument("label_loss: score and label shapes differ");
  check_finite(score.data, "label_loss");

  const int h = score.height(), w = score.width();
  LossValue out;
  out.grad = Grid<double>(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x + 1 < w ? score(y, x + 1) - score(y, x) : 0.0;
      const double dy = y + 1 < h ? score(y + 1, x) - score(y, x) : 0.0;
      const double t = std::sqrt(dx * dx + dy * dy + hp.eps_tv);
      out.value += t;
      if (x + 1 < w) {
        out.grad(y, x) -= dx / t;
        out.grad(y, x + 1) += dx / t;
      }
      if (y + 1 < h) {
        out.grad(y, x) -= dy / t;
        out.grad(y + 1, x) += dy / t;
      }

      const double u = label(y, x) ? 1.0 : 0.0;
      const double region_factor = (1.0 - u) * (1.0 - u) - (0.0 - u) * (0.0 - u);
      out.value += region_factor * score(y, x);
      out.grad(y, x) += region_factor;
    }
  }
  return out;
}

CombinedLoss combined_loss(const ScoreField& score, const Image& image,
                           const BinaryMask* label, const HyperParams& hp) {
  AcweBreakdown acwe = acwe_eval(score, image, hp);

  CombinedLoss out;
  out.report.acwe_term = acwe.value;
  out.report.area_term = acwe.area_term;
  out.report.inside_residual = acwe.inside_residual;
  out.report.outside_residual = acwe.outside_residual;
  out.report.c1 = acwe.stats.c1;
  out.report.c2 = acwe.stats.c2;
  out.grad = std::move(acwe.grad);

  if (label != nullptr) {
    if (label->height() != score.height() || label->width() != score.width())
      throw std::invalid_argument("combined_loss: label shape differs from score");
    LossValue lab = label_loss(score, *label, hp);
    out.report.label_term = lab.value;
    for (std::size_t i = 0; i < out.grad.size(); ++i)
      out.grad[i] += hp.alpha * lab.grad[i];
  }
  out.report.total = out.report.acwe_term + hp.alpha * out.report.label_term;
  return out;
}

std::string loss_report_json_line(const LossReport& report) {
  nlohmann::ordered_json j;
  j["total"] = report.total;
  j["acwe_term"] = report.acwe_term;
  j["label_term"] = report.label_term;
  j["area_term"] = report.area_term;
  j["inside_residual"] = report.inside_residual;
  j["outside_residual"] = report.outside_residual;
  j["c1"] = report.c1;
  j["c2"] = report.c2;
  return j.dump();
}

}  // namespace acwe::losses
