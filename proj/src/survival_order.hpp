#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <numeric>
#include <vector>

#include "hazardbench/dataset.hpp"

namespace hazardbench::detail {

// One group of subjects sharing the same follow-up time, as a [first, last)
// range into TimeOrder::index.
struct TimeBlock {
  Eigen::Index first = 0;
  Eigen::Index last = 0;
  double time = 0.0;
  Eigen::Index n_events = 0;
};

// Canonical traversal order for partial-likelihood sums: time ascending,
// events before censorings at equal times, then covariates lexicographically.
// Sorting on values (not on input position) makes every accumulated sum, and
// therefore every fit, independent of how the caller happened to order rows.
struct TimeOrder {
  std::vector<Eigen::Index> index;  // dataset row ids, canonically ordered
  std::vector<TimeBlock> blocks;    // distinct times, ascending
  Eigen::Index total_events = 0;
};

inline TimeOrder make_time_order(const SurvivalDataset& data) {
  TimeOrder order;
  const Eigen::Index n = data.n();
  order.index.resize(static_cast<std::size_t>(n));
  std::iota(order.index.begin(), order.index.end(), Eigen::Index{0});

  const auto& times = data.times;
  const auto& events = data.events;
  const auto& x = data.covariates;
  std::sort(order.index.begin(), order.index.end(),
            [&](Eigen::Index a, Eigen::Index b) {
              if (times[a] != times[b]) return times[a] < times[b];
              const bool ea = events[static_cast<std::size_t>(a)] != 0;
              const bool eb = events[static_cast<std::size_t>(b)] != 0;
              if (ea != eb) return ea;  // events first within a tied time
              for (Eigen::Index j = 0; j < x.cols(); ++j) {
                if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
              }
              return a < b;
            });

  Eigen::Index pos = 0;
  while (pos < n) {
    TimeBlock block;
    block.first = pos;
    block.time = times[order.index[static_cast<std::size_t>(pos)]];
    while (pos < n && times[order.index[static_cast<std::size_t>(pos)]] == block.time) {
      if (events[static_cast<std::size_t>(order.index[static_cast<std::size_t>(pos)])] != 0) {
        ++block.n_events;
      }
      ++pos;
    }
    block.last = pos;
    order.total_events += block.n_events;
    order.blocks.push_back(block);
  }
  return order;
}

}  // namespace hazardbench::detail
