#include "wflow/inner_solver.hpp"

#include <cmath>
#include <string>

#include "wflow/error.hpp"

namespace wflow {

InnerResult minimize_certified(const InnerProblem& problem, int max_iterations) {
  InnerResult res;
  res.theta = problem.start;
  double step = problem.initial_step;
  double value = problem.objective(res.theta);
  Vector grad = problem.direction(res.theta);
  double g2 = problem.metric(grad);
  for (int it = 0;; ++it) {
    res.gap_bound = g2 / (2.0 * problem.strong_convexity);
    res.iterations = it;
    if (res.gap_bound <= problem.target_gap) return res;
    if (it >= max_iterations)
      fail(ErrorCode::InnerSolverStalled, "gap bound " + std::to_string(res.gap_bound) + " above target after " +
                                              std::to_string(it) + " iterations");
    bool accepted = false;
    for (int halvings = 0; halvings < 80; ++halvings, step *= 0.5) {
      Vector cand = res.theta - step * grad;
      if (!problem.feasible(cand)) continue;
      const double cv = problem.objective(cand);
      if (!std::isfinite(cv)) continue;
      const bool armijo = cv <= value - 0.5 * step * g2;
      Vector cg;
      double cg2 = 0.0;
      // Near the optimum objective differences drown in rounding; fall back
      // to a decrease of the gradient norm.
      if (!armijo) {
        if (cv > value + 1e-14 * (1.0 + std::abs(value))) continue;
        cg = problem.direction(cand);
        cg2 = problem.metric(cg);
        if (!(cg2 < g2)) continue;
      } else {
        cg = problem.direction(cand);
        cg2 = problem.metric(cg);
      }
      res.theta = std::move(cand);
      value = cv;
      grad = std::move(cg);
      g2 = cg2;
      accepted = true;
      break;
    }
    if (!accepted)
      fail(ErrorCode::InnerSolverStalled, "line search failed with gap bound " + std::to_string(res.gap_bound));
    step *= 2.0;
  }
}

}  // namespace wflow
