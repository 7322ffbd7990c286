/*
Copyright 2026 The lbsgd Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef LBSGD_NN_REDUCE_H_
#define LBSGD_NN_REDUCE_H_

#include <bit>
#include <cstddef>
#include <span>
#include <vector>

namespace lbsgd::nn {

// Every reduction over examples, and over worker partials, uses one fixed
// binary tree: a range of n > 1 leaves splits so that the left child holds
// the largest power of two strictly below n. Leaves stay in ascending order.
//
// When a batch of B examples is cut into P contiguous slices whose length is
// a power of two, each slice is a complete subtree and the tree over the P
// slice partials reproduces the top of the tree over all B examples. That is
// what makes a P-worker sum bitwise equal to the single-worker sum.
constexpr std::size_t tree_split(std::size_t n) { return std::bit_floor(n - 1); }

// True when slices of `slice` leaves are guaranteed to be subtrees.
constexpr bool slice_is_subtree(std::size_t slice) { return std::has_single_bit(slice); }

// Sums `count` width-sized leaf vectors into `out` following the fixed tree.
// `leaf(i, dst)` must overwrite dst[0..width) with leaf i.
class TreeSum {
 public:
  explicit TreeSum(std::size_t width) : width_(width) {}

  template <class Leaf>
  void run(std::size_t count, std::span<double> out, Leaf&& leaf) {
    std::size_t depth = 1;
    while ((std::size_t{1} << depth) < count) ++depth;
    if (scratch_.size() < depth + 1) scratch_.resize(depth + 1);
    for (auto& buf : scratch_) buf.resize(width_);
    recurse(0, count, out.data(), leaf, 0);
  }

 private:
  template <class Leaf>
  void recurse(std::size_t lo, std::size_t hi, double* out, Leaf& leaf, std::size_t depth) {
    if (hi - lo == 1) {
      leaf(lo, out);
      return;
    }
    const std::size_t mid = lo + tree_split(hi - lo);
    recurse(lo, mid, out, leaf, depth + 1);
    double* tmp = scratch_[depth].data();
    recurse(mid, hi, tmp, leaf, depth + 1);
    for (std::size_t k = 0; k < width_; ++k) out[k] += tmp[k];
  }

  std::size_t width_;
  std::vector<std::vector<double>> scratch_;
};

// Tree sum of per-part vectors (all the same length). Used both for worker
// partials in the all-reduce and for cross-shard statistics in the engine.
std::vector<double> tree_sum_parts(std::span<const std::span<const double>> parts);

// Tree sum of scalars.
double tree_sum_scalars(std::span<const double> values);

}  // namespace lbsgd::nn

#endif  // LBSGD_NN_REDUCE_H_
