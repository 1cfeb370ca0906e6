#pragma once

#include <vector>

#include "acwe/types.hpp"

namespace acwe::levelset {

enum class InitScheme { checkerboard, centered_circle };

struct LevelSetParams {
  double mu = 0.1;      // nonzero length weight for noise robustness
  double nu = 0.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double epsilon = 1.0;  // Heaviside/delta smoothing width
  double dt = 0.5;
  int max_iters = 500;
  double tol = 1e-4;     // convergence threshold on mean |delta phi|
  InitScheme init = InitScheme::checkerboard;
};

/// Evolving embedding phi (inside where phi > 0) plus solver bookkeeping.
struct LevelSetState {
  Grid<double> phi;
  int iteration = 0;
  std::vector<double> energy_history;
  double dt = 0.5;  // effective step, halved by run() on energy violations
};

struct LevelSetResult {
  BinaryMask mask;
  std::vector<double> energy_history;
  int iterations = 0;
  double seconds = 0.0;
  bool converged = false;
  bool stalled = false;  // tol satisfied on the very first step (zero force)
};

/// Smoothed Heaviside H_eps(x) = (1 + (2/pi) atan(x/eps)) / 2 and its
/// derivative delta_eps(x) = eps / (pi (eps^2 + x^2)).
double smoothed_heaviside(double x, double eps);
double smoothed_delta(double x, double eps);

/// Checkerboard: phi = sin(pi x / 5) sin(pi y / 5). Centered circle: signed
/// distance to a circle of radius min(h,w)/3, positive inside.
LevelSetState init_phi(int height, int width, InitScheme scheme, double dt = 0.5);

/// Region-energy of the current embedding: the descent objective
///   mu sum delta(phi)|grad phi| + nu sum H(phi)
///   + lambda1 sum (g-c1)^2 H(phi) + lambda2 sum (g-c2)^2 (1-H(phi))
/// with c1, c2 the H(phi)-weighted means.
double state_energy(const LevelSetState& state, const Image& image,
                    const LevelSetParams& params);

/// One explicit descent step:
///   phi += state.dt * delta(phi) * [mu kappa - nu - lambda1 (g-c1)^2 + lambda2 (g-c2)^2]
/// with curvature kappa from central differences (denominator regularized by
/// eta = 1e-8). Recomputes c1, c2 from the current embedding, then appends the
/// post-step energy to the history. The step size comes from state.dt (seeded
/// from params by init_phi). Returns mean |delta phi|.
double evolve_step(LevelSetState& state, const Image& image, const LevelSetParams& params);

/// Full solve: iterates evolve_step until mean |delta phi| < tol or max_iters.
/// A step that raises the energy is rejected and retried at half the step
/// size, so the recorded energy history is non-increasing. Expects a
/// normalized image (values in [0,1]). The returned mask is oriented so that
/// inside is the brighter region (c1 >= c2); the descent objective is
/// complement-symmetric up to the area term, so the embedding's sign is an
/// initialization accident rather than information.
LevelSetResult run(const Image& image, const LevelSetParams& params);

}  // namespace acwe::levelset
