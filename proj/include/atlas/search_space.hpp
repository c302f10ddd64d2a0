// Copyright 2026 The atlas-nas Authors.
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

#ifndef ATLAS_SEARCH_SPACE_HPP_
#define ATLAS_SEARCH_SPACE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "atlas/rng.hpp"

namespace atlas {

/// MLP search space: every one of L hidden layers picks its width from
/// the candidate set H, so the space holds |H|^L architectures.
struct SearchSpaceSpec {
  int num_layers = 0;
  std::vector<int> width_choices;  // strictly increasing, all >= 1
  int input_dim = 0;

  /// Throws std::invalid_argument when a field is out of contract.
  void validate() const;

  double arch_count() const;
};

/// One architecture: the width of each hidden layer, bottom-up.
/// Text form is dash-joined, e.g. "8-16-32"; it doubles as the
/// persistence key, so comparisons are lexicographic on the sizes.
struct ArchEncoding {
  std::vector<int> sizes;

  std::string to_string() const;
  static ArchEncoding from_string(const std::string& text);

  bool operator==(const ArchEncoding&) const = default;
  auto operator<=>(const ArchEncoding& other) const {
    return sizes <=> other.sizes;
  }
};

/// Throws unless enc has exactly space.num_layers sizes, each in
/// space.width_choices.
void validate_encoding(const ArchEncoding& enc, const SearchSpaceSpec& space);

/// Uniform iid width per position.
ArchEncoding sample_arch(const SearchSpaceSpec& space, Rng& rng);
ArchEncoding sample_arch(const SearchSpaceSpec& space, std::uint64_t seed);

/// Resamples one uniformly chosen position to a different width
/// (uniform over the remaining choices), so the result's Hamming
/// distance from the input is exactly 1. With adjacent=true the new
/// width is instead a neighbor of the old one in the candidate list
/// (either neighbor with equal probability where both exist).
/// Throws when |H| = 1: no legal mutation exists.
ArchEncoding mutate_arch(const ArchEncoding& enc, const SearchSpaceSpec& space,
                         Rng& rng, bool adjacent = false);
ArchEncoding mutate_arch(const ArchEncoding& enc, const SearchSpaceSpec& space,
                         std::uint64_t seed, bool adjacent = false);

/// All encodings in lexicographic order (first position most
/// significant). Guarded: throws when the space holds more than 10^5
/// architectures.
std::vector<ArchEncoding> enumerate_space(const SearchSpaceSpec& space);

/// Seed for everything tied to one architecture (init, training data
/// order) inside a run keyed by `seed`: derived from the text encoding
/// so that bench records are reproducible out of order.
std::uint64_t arch_seed(std::uint64_t seed, const ArchEncoding& enc);

}  // namespace atlas

#endif  // ATLAS_SEARCH_SPACE_HPP_
