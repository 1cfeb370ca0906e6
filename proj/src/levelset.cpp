#include "acwe/levelset.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "acwe/core.hpp"

namespace acwe::levelset {

namespace {

constexpr double kCurvatureEta = 1e-8;

// Accept a step only if it does not raise the energy beyond accumulation
// noise; anything above this slack triggers dt halving in run().
double energy_slack(double prev) { return 1e-9 + 1e-12 * std::abs(prev); }

double curvature_at(const Grid<double>& phi, int y, int x) {
  const double px = 0.5 * (phi.at_clamped(y, x + 1) - phi.at_clamped(y, x - 1));
  const double py = 0.5 * (phi.at_clamped(y + 1, x) - phi.at_clamped(y - 1, x));
  const double pxx = phi.at_clamped(y, x + 1) - 2.0 * phi(y, x) + phi.at_clamped(y, x - 1);
  const double pyy = phi.at_clamped(y + 1, x) - 2.0 * phi(y, x) + phi.at_clamped(y - 1, x);
  const double pxy = 0.25 * (phi.at_clamped(y + 1, x + 1) - phi.at_clamped(y + 1, x - 1) -
                             phi.at_clamped(y - 1, x + 1) + phi.at_clamped(y - 1, x - 1));
  const double grad_sq = px * px + py * py;
  const double denom = grad_sq * std::sqrt(grad_sq) + kCurvatureEta;
  return (pxx * py * py - 2.0 * px * py * pxy + pyy * px * px) / denom;
}

double gradient_magnitude_at(const Grid<double>& phi, int y, int x) {
  const double px = 0.5 * (phi.at_clamped(y, x + 1) - phi.at_clamped(y, x - 1));
  const double py = 0.5 * (phi.at_clamped(y + 1, x) - phi.at_clamped(y - 1, x));
  return std::sqrt(px * px + py * py);
}

RegionStats weighted_means(const Grid<double>& phi, const Image& image, double eps) {
  SoftMask weights(phi.height(), phi.width());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    weights[i] = smoothed_heaviside(phi[i], eps);
  }
  return region_means(image, weights);
}

}  // namespace

double smoothed_heaviside(double x, double eps) {
  return 0.5 * (1.0 + (2.0 / std::numbers::pi) * std::atan(x / eps));
}

double smoothed_delta(double x, double eps) {
  return (1.0 / std::numbers::pi) * eps / (eps * eps + x * x);
}

LevelSetState init_phi(int height, int width, InitScheme scheme, double dt) {
  LevelSetState state{Grid<double>(height, width), 0, {}, dt};
  if (scheme == InitScheme::checkerboard) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        state.phi(y, x) = std::sin(std::numbers::pi * x / 5.0) *
                          std::sin(std::numbers::pi * y / 5.0);
      }
    }
  } else {
    const double cy = 0.5 * (height - 1);
    const double cx = 0.5 * (width - 1);
    const double r = std::min(height, width) / 3.0;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dy = y - cy;
        const double dx = x - cx;
        state.phi(y, x) = r - std::sqrt(dy * dy + dx * dx);
      }
    }
  }
  return state;
}

double state_energy(const LevelSetState& state, const Image& image,
                    const LevelSetParams& params) {
  if (!state.phi.same_shape(image.data)) {
    throw std::invalid_argument("state_energy: phi and image shapes differ");
  }
  const RegionStats stats = weighted_means(state.phi, image, params.epsilon);
  double length = 0.0, area = 0.0, inside = 0.0, outside = 0.0;
  for (int y = 0; y < state.phi.height(); ++y) {
    for (int x = 0; x < state.phi.width(); ++x) {
      const double p = state.phi(y, x);
      const double h = smoothed_heaviside(p, params.epsilon);
      const double g = image(y, x);
      length += smoothed_delta(p, params.epsilon) * gradient_magnitude_at(state.phi, y, x);
      area += h;
      const double rin = g - stats.c1;
      const double rout = g - stats.c2;
      inside += rin * rin * h;
      outside += rout * rout * (1.0 - h);
    }
  }
  return params.mu * length + params.nu * area + params.lambda1 * inside +
         params.lambda2 * outside;
}

double evolve_step(LevelSetState& state, const Image& image, const LevelSetParams& params) {
  if (!state.phi.same_shape(image.data)) {
    throw std::invalid_argument("evolve_step: phi and image shapes differ");
  }
  const RegionStats stats = weighted_means(state.phi, image, params.epsilon);
  Grid<double> next(state.phi.height(), state.phi.width());
  double abs_delta_sum = 0.0;
  for (int y = 0; y < state.phi.height(); ++y) {
    for (int x = 0; x < state.phi.width(); ++x) {
      const double p = state.phi(y, x);
      const double g = image(y, x);
      const double rin = g - stats.c1;
      const double rout = g - stats.c2;
      const double force = params.mu * curvature_at(state.phi, y, x) - params.nu -
                           params.lambda1 * rin * rin + params.lambda2 * rout * rout;
      const double step = state.dt * smoothed_delta(p, params.epsilon) * force;
      next(y, x) = p + step;
      abs_delta_sum += std::abs(step);
      if (!std::isfinite(next(y, x))) {
        throw std::runtime_error(
            "evolve_step: non-finite phi at iteration " + std::to_string(state.iteration + 1) +
            " (dt=" + std::to_string(state.dt) + " too large)");
      }
    }
  }
  state.phi = std::move(next);
  state.iteration += 1;
  state.energy_history.push_back(state_energy(state, image, params));
  return abs_delta_sum / static_cast<double>(state.phi.size());
}

LevelSetResult run(const Image& image, const LevelSetParams& params) {
  if (params.max_iters < 1) {
    throw std::invalid_argument("run: max_iters must be at least 1");
  }
  if (!(params.dt > 0.0) || !(params.epsilon > 0.0)) {
    throw std::invalid_argument("run: dt and epsilon must be positive");
  }
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = image[i];
    if (!std::isfinite(v) || v < -1e-9 || v > 1.0 + 1e-9) {
      throw std::invalid_argument("run: image must be normalized to [0,1]");
    }
  }

  const auto t0 = std::chrono::steady_clock::now();
  LevelSetState state = init_phi(image.height(), image.width(), params.init, params.dt);
  state.energy_history.push_back(state_energy(state, image, params));

  LevelSetResult result;
  int rejections_here = 0;
  constexpr int kMaxRejections = 60;  // consecutive, at one iterate
  while (result.iterations < params.max_iters) {
    const Grid<double> snapshot = state.phi;
    const double prev_energy = state.energy_history.back();
    const double delta = evolve_step(state, image, params);
    if (state.energy_history.back() > prev_energy + energy_slack(prev_energy)) {
      state.phi = snapshot;
      state.iteration -= 1;
      state.energy_history.pop_back();
      state.dt *= 0.5;
      if (++rejections_here > kMaxRejections) break;  // step size exhausted; stop here
      continue;
    }
    rejections_here = 0;
    // Let the step size climb back after a transient, so one rejected step
    // does not freeze the rest of the run at a crawl.
    state.dt = std::min(state.dt * 1.2, params.dt);
    result.iterations += 1;
    if (delta < params.tol) {
      result.converged = true;
      result.stalled = (result.iterations == 1);
      break;
    }
  }

  result.mask = BinaryMask(state.phi.height(), state.phi.width());
  for (std::size_t i = 0; i < state.phi.size(); ++i) {
    result.mask[i] = state.phi[i] > 0.0 ? 1 : 0;
  }
  // The descent objective is complement-symmetric except for the area term,
  // so the embedding's sign is an accident of initialization. Reported masks
  // keep the toolkit's orientation: inside is the brighter region (c1 >= c2).
  const RegionStats stats = region_means(image, result.mask);
  if (stats.c1 < stats.c2) {
    for (std::size_t i = 0; i < result.mask.size(); ++i) result.mask[i] ^= 1;
  }
  result.energy_history = std::move(state.energy_history);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace acwe::levelset
