#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace hazardbench {

// Pair counts behind Harrell's c.  A pair (i, j) is comparable iff
// t_i < t_j and subject i had an event; pairs tied on time are never
// comparable.  Concordant means risk_i > risk_j; risks tied under exact
// floating-point equality count half.
struct ConcordanceResult {
  double c_index = 0.0;
  std::uint64_t concordant = 0;
  std::uint64_t discordant = 0;
  std::uint64_t tied_risk = 0;
  std::uint64_t comparable_pairs = 0;

  std::string to_json() const;
};

// O(n log n) counting over a rank-indexed Fenwick tree.  Counts are exact
// integers, so the result matches concordance_index_bruteforce bit for bit.
ConcordanceResult concordance_index(const Eigen::VectorXd& times,
                                    const std::vector<std::uint8_t>& events,
                                    const Eigen::VectorXd& risks);

// Exhaustive O(n^2) pair enumeration; the defining reference for the
// fast path above.
ConcordanceResult concordance_index_bruteforce(const Eigen::VectorXd& times,
                                               const std::vector<std::uint8_t>& events,
                                               const Eigen::VectorXd& risks);

// Product-limit survival curve.  `times` holds the distinct event times in
// increasing order; subjects censored at an event time are still in that
// time's risk set.
struct KaplanMeierCurve {
  std::vector<double> times;
  std::vector<double> survival;
  std::vector<std::uint64_t> at_risk;
  std::vector<std::uint64_t> events;

  // survival at an arbitrary time (step function, 1 before the first event)
  double survival_at(double t) const;

  std::string to_csv() const;  // header: time,survival,at_risk,events
};

KaplanMeierCurve kaplan_meier(const Eigen::VectorXd& times,
                              const std::vector<std::uint8_t>& events);

}  // namespace hazardbench
