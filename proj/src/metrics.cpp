#include "hazardbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "hazardbench/error.hpp"
#include "text_io.hpp"

namespace hazardbench {

namespace {

void check_inputs(const Eigen::VectorXd& times,
                  const std::vector<std::uint8_t>& events,
                  const Eigen::VectorXd& risks) {
  if (times.size() != static_cast<Eigen::Index>(events.size()) ||
      times.size() != risks.size()) {
    throw HazardError(ErrorCode::LengthMismatch,
                      "metrics: times, events and risks must have equal length");
  }
  for (Eigen::Index i = 0; i < risks.size(); ++i) {
    if (!std::isfinite(risks[i])) {
      throw HazardError(ErrorCode::NonFiniteValue,
                        "metrics: non-finite risk at row " + std::to_string(i));
    }
  }
}

double c_from_counts(const ConcordanceResult& r) {
  return (static_cast<double>(r.concordant) + 0.5 * static_cast<double>(r.tied_risk)) /
         static_cast<double>(r.comparable_pairs);
}

// Fenwick tree over risk ranks; supports prefix counts.
class Fenwick {
 public:
  explicit Fenwick(std::size_t size) : tree_(size + 1, 0) {}

  void add(std::size_t rank) {
    for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += 1;
  }

  // number of inserted ranks < rank
  std::uint64_t count_below(std::size_t rank) const {
    std::uint64_t sum = 0;
    for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) sum += tree_[i];
    return sum;
  }

 private:
  std::vector<std::uint64_t> tree_;
};

}  // namespace

ConcordanceResult concordance_index_bruteforce(const Eigen::VectorXd& times,
                                               const std::vector<std::uint8_t>& events,
                                               const Eigen::VectorXd& risks) {
  check_inputs(times, events, risks);
  ConcordanceResult r;
  const Eigen::Index n = times.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!events[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (times[i] >= times[j]) continue;  // needs t_i < t_j
      ++r.comparable_pairs;
      if (risks[i] > risks[j]) {
        ++r.concordant;
      } else if (risks[i] < risks[j]) {
        ++r.discordant;
      } else {
        ++r.tied_risk;
      }
    }
  }
  if (r.comparable_pairs == 0) {
    throw HazardError(ErrorCode::NoComparablePairs,
                      "metrics: no comparable pairs (no event precedes another "
                      "subject's follow-up)");
  }
  r.c_index = c_from_counts(r);
  return r;
}

ConcordanceResult concordance_index(const Eigen::VectorXd& times,
                                    const std::vector<std::uint8_t>& events,
                                    const Eigen::VectorXd& risks) {
  check_inputs(times, events, risks);
  const Eigen::Index n = times.size();

  // rank-compress risks (exact equality defines ties)
  std::vector<double> sorted_risks(risks.data(), risks.data() + n);
  std::sort(sorted_risks.begin(), sorted_risks.end());
  sorted_risks.erase(std::unique(sorted_risks.begin(), sorted_risks.end()),
                     sorted_risks.end());
  auto rank_of = [&](double value) -> std::size_t {
    return static_cast<std::size_t>(
        std::lower_bound(sorted_risks.begin(), sorted_risks.end(), value) -
        sorted_risks.begin());
  };

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return times[a] < times[b]; });

  // Walk distinct times in descending order.  The tree holds every subject
  // with a strictly later time, which is exactly the comparable set for an
  // event in the current time group.
  ConcordanceResult r;
  Fenwick tree(sorted_risks.size());
  std::uint64_t inserted = 0;
  std::size_t hi = order.size();
  while (hi > 0) {
    std::size_t lo = hi;
    const double t = times[order[hi - 1]];
    while (lo > 0 && times[order[lo - 1]] == t) --lo;

    for (std::size_t k = lo; k < hi; ++k) {
      const Eigen::Index i = order[k];
      if (!events[static_cast<std::size_t>(i)]) continue;
      const std::size_t rank = rank_of(risks[i]);
      const std::uint64_t below = tree.count_below(rank);
      const std::uint64_t below_or_equal = tree.count_below(rank + 1);
      r.comparable_pairs += inserted;
      r.concordant += below;
      r.tied_risk += below_or_equal - below;
      r.discordant += inserted - below_or_equal;
    }
    for (std::size_t k = lo; k < hi; ++k) {
      tree.add(rank_of(risks[order[k]]));
      ++inserted;
    }
    hi = lo;
  }

  if (r.comparable_pairs == 0) {
    throw HazardError(ErrorCode::NoComparablePairs,
                      "metrics: no comparable pairs (no event precedes another "
                      "subject's follow-up)");
  }
  r.c_index = c_from_counts(r);
  return r;
}

std::string ConcordanceResult::to_json() const {
  nlohmann::json j;
  j["c_index"] = c_index;
  j["concordant"] = concordant;
  j["discordant"] = discordant;
  j["tied_risk"] = tied_risk;
  j["comparable_pairs"] = comparable_pairs;
  return j.dump();
}

KaplanMeierCurve kaplan_meier(const Eigen::VectorXd& times,
                              const std::vector<std::uint8_t>& events) {
  if (times.size() != static_cast<Eigen::Index>(events.size())) {
    throw HazardError(ErrorCode::LengthMismatch,
                      "metrics: times and events must have equal length");
  }
  if (times.size() < 1) {
    throw HazardError(ErrorCode::LengthMismatch, "metrics: empty input");
  }

  const Eigen::Index n = times.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return times[a] < times[b]; });

  KaplanMeierCurve curve;
  // The product is carried as a gcd-reduced uint64 fraction while it fits,
  // so telescoping cases (for example, no censoring) come out exact; only
  // when the fraction would overflow does it fall back to a double product.
  std::uint64_t num = 1, den = 1;
  double survival = 1.0;
  bool exact = true;

  std::uint64_t at_risk = static_cast<std::uint64_t>(n);
  std::size_t pos = 0;
  while (pos < order.size()) {
    std::size_t end = pos;
    const double t = times[order[pos]];
    std::uint64_t deaths = 0;
    while (end < order.size() && times[order[end]] == t) {
      if (events[static_cast<std::size_t>(order[end])]) ++deaths;
      ++end;
    }
    if (deaths > 0) {
      const std::uint64_t survivors = at_risk - deaths;
      if (exact) {
        std::uint64_t f_num = survivors, f_den = at_risk;
        const std::uint64_t g = std::gcd(f_num, f_den);
        if (g > 0) { f_num /= g; f_den /= g; }
        if (f_num == 0) {
          num = 0;
          den = 1;
        } else if (num <= UINT64_MAX / f_num && den <= UINT64_MAX / f_den) {
          num *= f_num;
          den *= f_den;
          const std::uint64_t h = std::gcd(num, den);
          num /= h;
          den /= h;
        } else {
          exact = false;
        }
      }
      if (exact) {
        survival = static_cast<double>(num) / static_cast<double>(den);
      } else {
        survival *= static_cast<double>(survivors) / static_cast<double>(at_risk);
      }
      curve.times.push_back(t);
      curve.survival.push_back(survival);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(deaths);
    }
    at_risk -= static_cast<std::uint64_t>(end - pos);
    pos = end;
  }
  return curve;
}

double KaplanMeierCurve::survival_at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

std::string KaplanMeierCurve::to_csv() const {
  std::string out = "time,survival,at_risk,events\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    out += detail::format_double(times[i]);
    out += ',';
    out += detail::format_double(survival[i]);
    out += ',';
    out += std::to_string(at_risk[i]);
    out += ',';
    out += std::to_string(events[i]);
    out += '\n';
  }
  return out;
}

}  // namespace hazardbench
