/*
   Copyright 2026 the ntxsim authors

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
#include "ntxsim/hwloop.hpp"

#include <string>

namespace ntx {

AddressFault::AddressFault(std::int64_t addr,
                           const std::array<std::uint32_t, kMaxLoops>& idx)
    : std::runtime_error("address " + std::to_string(addr) +
                         " out of bounds at index (" + std::to_string(idx[0]) +
                         "," + std::to_string(idx[1]) + "," +
                         std::to_string(idx[2]) + "," + std::to_string(idx[3]) +
                         "," + std::to_string(idx[4]) + ")"),
      address(addr),
      index(idx) {}

void validate_hwl(const HwlConfig& hwl) {
  if (hwl.outer_level < 0 || hwl.outer_level >= kMaxLoops)
    throw ConfigError("outer_level out of range");
  if (hwl.store_level > hwl.init_level || hwl.init_level > hwl.outer_level ||
      hwl.store_level < 0)
    throw ConfigError("require store_level <= init_level <= outer_level");
  for (int i = 0; i <= hwl.outer_level; ++i) {
    if (hwl.bounds[i] < 1 || hwl.bounds[i] > kMaxBound)
      throw ConfigError("loop bound " + std::to_string(i) +
                        " outside [1, 65536]");
  }
}

std::array<std::int64_t, kMaxLoops> convert_strides(
    std::span<const std::int64_t> strides,
    std::span<const std::uint32_t> bounds) {
  if (strides.size() != bounds.size() || strides.size() > kMaxLoops)
    throw ConfigError("need matching stride/bound lists of length <= 5");
  std::array<std::int64_t, kMaxLoops> steps{};
  std::int64_t excursion = 0;  // sum of (N_k - 1) * s_k over inner levels
  for (std::size_t i = 0; i < strides.size(); ++i) {
    if (bounds[i] < 1) throw ConfigError("loop bound must be >= 1");
    steps[i] = strides[i] - excursion;
    excursion += (static_cast<std::int64_t>(bounds[i]) - 1) * strides[i];
  }
  return steps;
}

AguConfig agu_from_word_strides(std::int64_t base_bytes,
                                std::span<const std::int64_t> word_strides,
                                std::span<const std::uint32_t> bounds) {
  std::array<std::int64_t, kMaxLoops> byte_strides{};
  for (std::size_t i = 0; i < word_strides.size(); ++i)
    byte_strides[i] = word_strides[i] * 4;
  AguConfig agu;
  agu.base = base_bytes;
  agu.step = convert_strides(
      std::span<const std::int64_t>(byte_strides.data(), word_strides.size()),
      bounds);
  return agu;
}

NestWalker::NestWalker(const HwlConfig& hwl, const std::array<AguConfig, 3>& agu)
    : hwl_(hwl), agu_(agu) {
  validate_hwl(hwl_);
  addr_ = {agu_[0].base, agu_[1].base, agu_[2].base};
  total_ = 1;
  for (int i = 0; i <= hwl_.outer_level; ++i) total_ *= hwl_.bounds[i];
}

bool NestWalker::next(Step& out) {
  if (emitted_ == total_) return false;

  out.addr = addr_;
  out.index = index_;
  out.init = true;
  for (int i = 0; i < hwl_.init_level; ++i) out.init &= index_[i] == 0;
  out.store = true;
  for (int i = 0; i < hwl_.store_level; ++i)
    out.store &= index_[i] == hwl_.bounds[i] - 1;

  // Ripple-increment; the highest level that advances selects the step.
  int level = 0;
  while (level <= hwl_.outer_level && index_[level] == hwl_.bounds[level] - 1) {
    index_[level] = 0;
    ++level;
  }
  if (level <= hwl_.outer_level) {
    ++index_[level];
    for (int k = 0; k < 3; ++k) addr_[k] += agu_[k].step[level];
  }
  ++emitted_;
  return true;
}

std::vector<std::int64_t> generate_address_stream(const AguConfig& agu,
                                                  const HwlConfig& hwl,
                                                  std::int64_t limit) {
  NestWalker walker(hwl, {agu, agu, agu});
  std::vector<std::int64_t> stream;
  stream.reserve(walker.total_steps());
  NestWalker::Step step;
  while (walker.next(step)) {
    if (limit >= 0 && (step.addr[0] < 0 || step.addr[0] >= limit))
      throw AddressFault(step.addr[0], step.index);
    stream.push_back(step.addr[0]);
  }
  return stream;
}

}  // namespace ntx
