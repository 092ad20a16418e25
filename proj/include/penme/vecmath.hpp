// Copyright 2026 The PENME Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <span>
#include <string>

#include "penme/error.hpp"

namespace penme {

template <typename A, typename B>
void CheckSameDim(std::span<const A> a, std::span<const B> b, const char* op) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDomain, std::string(op) + ": dimension mismatch (" +
                                        std::to_string(a.size()) + " vs " +
                                        std::to_string(b.size()) + ")");
  }
}

template <typename T>
double SquaredNorm(std::span<const T> a) {
  double s = 0.0;
  for (T v : a) s += static_cast<double>(v) * static_cast<double>(v);
  return s;
}

template <typename A, typename B>
double Dot(std::span<const A> a, std::span<const B> b) {
  CheckSameDim(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

// dot(a,b) / (|a| |b|), clamped to [-1, 1] against rounding.
template <typename A, typename B>
double CosineSimilarity(std::span<const A> a, std::span<const B> b) {
  CheckSameDim(a, b, "cosine_similarity");
  const double na = std::sqrt(SquaredNorm(a));
  const double nb = std::sqrt(SquaredNorm(b));
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::kDomain, "cosine_similarity of a zero-norm vector");
  const double c = Dot(a, b) / (na * nb);
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}

template <typename A, typename B>
double Euclidean(std::span<const A> a, std::span<const B> b) {
  CheckSameDim(a, b, "euclidean");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace penme
