#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <span>

namespace consensus {

template <std::floating_point T>
T sigmoid(T x) {
  if (x >= 0) return 1 / (1 + std::exp(-x));
  const T e = std::exp(x);
  return e / (1 + e);
}

template <std::floating_point T>
T log_sigmoid(T x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

template <std::floating_point T>
T logsumexp(std::span<const T> xs) {
  T m = -std::numeric_limits<T>::infinity();
  for (T x : xs) m = std::max(m, x);
  if (std::isinf(m)) return m;
  T s = 0;
  for (T x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace consensus
