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

#include "atlas/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace atlas {

void SearchSpaceSpec::validate() const {
  if (num_layers < 1)
    throw std::invalid_argument("search space: num_layers must be >= 1");
  if (input_dim < 1)
    throw std::invalid_argument("search space: input_dim must be >= 1");
  if (width_choices.empty())
    throw std::invalid_argument("search space: empty width candidate set");
  for (std::size_t i = 0; i < width_choices.size(); ++i) {
    if (width_choices[i] < 1)
      throw std::invalid_argument("search space: widths must be >= 1");
    if (i > 0 && width_choices[i] <= width_choices[i - 1])
      throw std::invalid_argument("search space: widths must be strictly increasing");
  }
}

double SearchSpaceSpec::arch_count() const {
  return std::pow(static_cast<double>(width_choices.size()), num_layers);
}

std::string ArchEncoding::to_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i > 0) out << '-';
    out << sizes[i];
  }
  return out.str();
}

ArchEncoding ArchEncoding::from_string(const std::string& text) {
  ArchEncoding enc;
  if (text.empty()) throw std::invalid_argument("arch encoding: empty string");
  std::size_t at = 0;
  while (at <= text.size()) {
    std::size_t dash = text.find('-', at);
    if (dash == std::string::npos) dash = text.size();
    const std::string part = text.substr(at, dash - at);
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(part, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("arch encoding: bad size '" + part + "' in '" +
                                  text + "'");
    }
    if (used != part.size() || value < 1)
      throw std::invalid_argument("arch encoding: bad size '" + part + "' in '" +
                                  text + "'");
    enc.sizes.push_back(value);
    at = dash + 1;
  }
  return enc;
}

void validate_encoding(const ArchEncoding& enc, const SearchSpaceSpec& space) {
  if (static_cast<int>(enc.sizes.size()) != space.num_layers)
    throw std::invalid_argument("arch encoding: expected " +
                                std::to_string(space.num_layers) + " sizes, got " +
                                std::to_string(enc.sizes.size()));
  for (int s : enc.sizes) {
    if (!std::binary_search(space.width_choices.begin(), space.width_choices.end(), s))
      throw std::invalid_argument("arch encoding: size " + std::to_string(s) +
                                  " is not a candidate width");
  }
}

ArchEncoding sample_arch(const SearchSpaceSpec& space, Rng& rng) {
  space.validate();
  ArchEncoding enc;
  enc.sizes.reserve(static_cast<std::size_t>(space.num_layers));
  for (int l = 0; l < space.num_layers; ++l)
    enc.sizes.push_back(
        space.width_choices[rng.below(space.width_choices.size())]);
  return enc;
}

ArchEncoding sample_arch(const SearchSpaceSpec& space, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x73616D70ULL));
  return sample_arch(space, rng);
}

ArchEncoding mutate_arch(const ArchEncoding& enc, const SearchSpaceSpec& space,
                         Rng& rng, bool adjacent) {
  space.validate();
  validate_encoding(enc, space);
  if (space.width_choices.size() < 2)
    throw std::invalid_argument("mutate: needs at least two candidate widths");

  ArchEncoding out = enc;
  const auto pos = static_cast<std::size_t>(rng.below(out.sizes.size()));
  const auto& H = space.width_choices;
  const auto old_it = std::find(H.begin(), H.end(), out.sizes[pos]);
  const auto old_idx = static_cast<std::size_t>(old_it - H.begin());

  std::size_t new_idx;
  if (adjacent) {
    if (old_idx == 0) {
      new_idx = 1;
    } else if (old_idx == H.size() - 1) {
      new_idx = old_idx - 1;
    } else {
      new_idx = rng.below(2) == 0 ? old_idx - 1 : old_idx + 1;
    }
  } else {
    new_idx = static_cast<std::size_t>(rng.below(H.size() - 1));
    if (new_idx >= old_idx) ++new_idx;
  }
  out.sizes[pos] = H[new_idx];
  return out;
}

ArchEncoding mutate_arch(const ArchEncoding& enc, const SearchSpaceSpec& space,
                         std::uint64_t seed, bool adjacent) {
  Rng rng(derive_seed(seed, 0x6D757461ULL));
  return mutate_arch(enc, space, rng, adjacent);
}

std::vector<ArchEncoding> enumerate_space(const SearchSpaceSpec& space) {
  space.validate();
  const double count = space.arch_count();
  if (count > 1e5)
    throw std::invalid_argument("enumerate: space holds " + std::to_string(count) +
                                " architectures, limit is 100000");

  std::vector<ArchEncoding> all;
  all.reserve(static_cast<std::size_t>(count));
  std::vector<std::size_t> odo(static_cast<std::size_t>(space.num_layers), 0);
  const std::size_t base = space.width_choices.size();
  for (;;) {
    ArchEncoding enc;
    enc.sizes.reserve(odo.size());
    for (std::size_t idx : odo) enc.sizes.push_back(space.width_choices[idx]);
    all.push_back(std::move(enc));
    // Advance the rightmost position; carry leftward.
    std::size_t p = odo.size();
    while (p > 0) {
      --p;
      if (++odo[p] < base) break;
      odo[p] = 0;
      if (p == 0) return all;
    }
  }
}

std::uint64_t arch_seed(std::uint64_t seed, const ArchEncoding& enc) {
  return derive_seed(seed, enc.to_string());
}

}  // namespace atlas
