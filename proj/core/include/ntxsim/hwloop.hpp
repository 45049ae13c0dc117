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
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace ntx {

inline constexpr int kMaxLoops = 5;
inline constexpr std::uint32_t kMaxBound = 65536;  // 16-bit loop counters

// Five nested loops; level 0 is innermost. Levels above outer_level are
// inactive. The accumulator is initialized when a fresh init_level block
// begins and a result is stored when a store_level block completes, so
// store_level <= init_level <= outer_level.
struct HwlConfig {
  std::array<std::uint32_t, kMaxLoops> bounds{1, 1, 1, 1, 1};
  int outer_level = 0;
  int init_level = 0;
  int store_level = 0;
};

// One address generator: byte base plus one signed byte step per loop level.
// When the counters advance, only the step of the highest incrementing level
// is applied; convert_strides folds the rewind of all wrapped inner levels
// into that step.
struct AguConfig {
  std::int64_t base = 0;
  std::array<std::int64_t, kMaxLoops> step{};
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Address fault raised when a generated address leaves the memory window;
// carries the offending loop index tuple.
struct AddressFault : std::runtime_error {
  AddressFault(std::int64_t addr, const std::array<std::uint32_t, kMaxLoops>& idx);
  std::int64_t address;
  std::array<std::uint32_t, kMaxLoops> index;
};

// Convert per-level strides (distance between consecutive indices of that
// level, any byte unit) into the single-addition steps the AGU applies.
// A level's step must undo the full excursion of the levels inside it:
//   p_i = s_i - sum_{k<i} (N_k - 1) * s_k
void validate_hwl(const HwlConfig& hwl);
std::array<std::int64_t, kMaxLoops> convert_strides(
    std::span<const std::int64_t> strides, std::span<const std::uint32_t> bounds);

// Build an AGU from logical strides expressed in 4-byte words.
AguConfig agu_from_word_strides(std::int64_t base_bytes,
                                std::span<const std::int64_t> word_strides,
                                std::span<const std::uint32_t> bounds);

// Enumerate the full address sequence (one entry per innermost iteration).
// If limit >= 0, any address outside [0, limit) raises AddressFault.
std::vector<std::int64_t> generate_address_stream(const AguConfig& agu,
                                                  const HwlConfig& hwl,
                                                  std::int64_t limit = -1);

// Incremental walk of a loop nest shared by the functional engine and the
// cycle-level simulator: one step per innermost iteration, with the
// init/store block boundaries and all three stream addresses.
class NestWalker {
 public:
  NestWalker(const HwlConfig& hwl, const std::array<AguConfig, 3>& agu);

  struct Step {
    std::array<std::int64_t, 3> addr;  // current AGU addresses (bytes)
    bool init;                          // first element of an init block
    bool store;                         // last element of a store block
    std::array<std::uint32_t, kMaxLoops> index;
  };

  // Fills the next step; returns false once the nest is exhausted.
  bool next(Step& out);

  // Total innermost iterations = product of active bounds.
  std::uint64_t total_steps() const { return total_; }

 private:
  HwlConfig hwl_;
  std::array<AguConfig, 3> agu_;
  std::array<std::uint32_t, kMaxLoops> index_{};
  std::array<std::int64_t, 3> addr_;
  std::uint64_t total_;
  std::uint64_t emitted_ = 0;
};

}  // namespace ntx
