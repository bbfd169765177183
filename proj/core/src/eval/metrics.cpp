#include "sigpointer/eval/metrics.hpp"

#include <algorithm>
#include <iterator>

#include "sigpointer/errors.hpp"

namespace sigpointer::eval {

IndexSet to_set(std::span<const std::size_t> indices) {
  IndexSet s(indices.begin(), indices.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

IndexSet bin_indices(std::span<const std::size_t> indices, std::size_t f) {
  if (f == 0) throw InputError("bin factor must be at least 1");
  IndexSet out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(i / f);
  return to_set(out);
}

namespace {

std::size_t intersection_size(const IndexSet& a, const IndexSet& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n, ++i, ++j;
    }
  }
  return n;
}

}  // namespace

double jaccard(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  const auto a = to_set(predicted), b = to_set(truth);
  if (a.empty() && b.empty()) return 1.0;
  const std::size_t inter = intersection_size(a, b);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

double recall(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  const auto a = to_set(predicted), b = to_set(truth);
  if (b.empty()) return a.empty() ? 1.0 : 0.0;
  return static_cast<double>(intersection_size(a, b)) / static_cast<double>(b.size());
}

}  // namespace sigpointer::eval
