#ifndef CATMAINT_SUPERVISOR_HPP
#define CATMAINT_SUPERVISOR_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "catmaint/error.hpp"
#include "catmaint/estimation.hpp"

namespace catmaint {

/// Current target (0-based), time of the last switch, dwell and entropy
/// threshold.
struct SupervisorState {
  std::size_t j = 0;
  double tau = 0.0;      // s
  double delta = 100.0;  // s
  double epsilon = 0.0;  // nats
};

struct SupervisorOptions {
  // Additionally require the candidate's entropy to exceed epsilon before
  // switching. Off by default; the plain rule only checks the current target.
  bool candidate_above_threshold = false;
};

struct TargetDecision {
  std::size_t j;
  double tau;
  bool switched;
};

/// Lowest index among the maximal entries.
inline std::size_t argmax_entropy(std::span<const double> h) {
  if (h.empty()) throw Error(ErrorCode::InvalidArgument, "argmax of an empty entropy list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < h.size(); ++i) {
    if (h[i] > h[best]) best = i;
  }
  return best;
}

/// Entropy-threshold target selection with dwell hysteresis. The current
/// target is kept while t - tau <= Delta or while its own entropy is still
/// above epsilon; otherwise the max-entropy deputy is selected and tau reset.
inline TargetDecision select_target(std::span<const double> entropy_per_deputy,
                                    const SupervisorState& s, double t,
                                    const SupervisorOptions& opt = {}) {
  if (entropy_per_deputy.empty() || s.j >= entropy_per_deputy.size()) {
    throw Error(ErrorCode::InvalidArgument, "supervisor target index out of range");
  }
  if (t - s.tau <= s.delta || entropy_per_deputy[s.j] > s.epsilon) {
    return {s.j, s.tau, false};
  }
  const std::size_t best = argmax_entropy(entropy_per_deputy);
  if (opt.candidate_above_threshold && !(entropy_per_deputy[best] > s.epsilon)) {
    return {s.j, s.tau, false};
  }
  return {best, t, best != s.j};
}

inline TargetDecision select_target(const BeliefCatalog& beliefs, const SupervisorState& s,
                                    double t, const SupervisorOptions& opt = {}) {
  const std::vector<double> h = entropies(beliefs);
  return select_target(std::span<const double>(h), s, t, opt);
}

}  // namespace catmaint

#endif  // CATMAINT_SUPERVISOR_HPP
