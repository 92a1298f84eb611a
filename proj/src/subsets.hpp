#pragma once

#include <cstdint>
#include <vector>

#include "msar/comorbidity.hpp"

namespace msar::detail {

/// Calls fn(mask) for every n-subset of `members`, in lexicographic order.
template <typename Fn>
void for_each_subset(const std::vector<CategoryIndex>& members, int n, Fn&& fn) {
  const int k = static_cast<int>(members.size());
  if (n < 1 || n > k) return;
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    std::uint32_t mask = 0;
    for (int i : idx) mask |= 1U << members[static_cast<std::size_t>(i)];
    fn(mask);
    int i = n - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == k - n + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < n; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace msar::detail
