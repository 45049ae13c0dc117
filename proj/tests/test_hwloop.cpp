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

#include <doctest.h>

#include <cstdint>
#include <random>
#include <vector>

using namespace ntx;

namespace {

// Reference stream straight from the closed form A = base + sum i_k * s_k,
// enumerated in row-major loop order (level 0 innermost).
std::vector<std::int64_t> closed_form_stream(std::int64_t base,
                                             const std::vector<std::int64_t>& s,
                                             const std::vector<std::uint32_t>& n) {
  std::vector<std::uint32_t> idx(n.size(), 0);
  std::vector<std::int64_t> out;
  for (;;) {
    std::int64_t a = base;
    for (std::size_t k = 0; k < s.size(); ++k) a += idx[k] * s[k];
    out.push_back(a);
    std::size_t level = 0;
    while (level < n.size() && idx[level] + 1 == n[level]) idx[level++] = 0;
    if (level == n.size()) return out;
    ++idx[level];
  }
}

HwlConfig nest(const std::vector<std::uint32_t>& n) {
  HwlConfig hwl;
  for (std::size_t i = 0; i < n.size(); ++i) hwl.bounds[i] = n[i];
  hwl.outer_level = static_cast<int>(n.size()) - 1;
  return hwl;
}

std::vector<std::int64_t> stepped_stream(std::int64_t base,
                                         const std::vector<std::int64_t>& s,
                                         const std::vector<std::uint32_t>& n,
                                         std::int64_t limit = -1) {
  AguConfig agu;
  agu.base = base;
  agu.step = convert_strides(s, n);
  return generate_address_stream(agu, nest(n), limit);
}

}  // namespace

TEST_CASE("single loop step equals stride") {
  const auto p = convert_strides(std::vector<std::int64_t>{1},
                                 std::vector<std::uint32_t>{7});
  CHECK(p[0] == 1);
}

TEST_CASE("zero strides stay zero") {
  const auto p = convert_strides(std::vector<std::int64_t>{0, 0},
                                 std::vector<std::uint32_t>{3, 3});
  CHECK(p[0] == 0);
  CHECK(p[1] == 0);
}

TEST_CASE("outer step folds the inner excursion") {
  const std::vector<std::int64_t> s{1, 8};
  const std::vector<std::uint32_t> n{3, 3};
  const auto p = convert_strides(s, n);
  CHECK(p[0] == 1);
  CHECK(p[1] == 6);
  const std::vector<std::int64_t> want{0, 1, 2, 8, 9, 10, 16, 17, 18};
  CHECK(stepped_stream(0, s, n) == want);
}

TEST_CASE("contiguous walk from a base address") {
  const auto got = stepped_stream(100, {1}, {4});
  CHECK(got == std::vector<std::int64_t>{100, 101, 102, 103});
}

TEST_CASE("two level walk matches the closed form") {
  const auto got = stepped_stream(100, {1, 4}, {2, 2});
  CHECK(got == std::vector<std::int64_t>{100, 101, 104, 105});
}

TEST_CASE("negative address is rejected with the faulting tuple") {
  try {
    stepped_stream(0, {4, -4}, {2, 2}, 1024);
    FAIL("expected AddressFault");
  } catch (const AddressFault& f) {
    CHECK(f.address == -4);
    CHECK(f.index[0] == 0);
    CHECK(f.index[1] == 1);
  }
}

TEST_CASE("three loops with a zero middle stride rewind correctly") {
  // A = i0 + 8*i2. A two-term recursion over the previous step breaks here;
  // the step of a level must undo the excursion of all levels inside it.
  const std::vector<std::int64_t> s{1, 0, 8};
  const std::vector<std::uint32_t> n{3, 2, 2};
  const auto p = convert_strides(s, n);
  CHECK(p[0] == 1);
  CHECK(p[1] == -2);
  CHECK(p[2] == 6);
  CHECK(stepped_stream(0, s, n) == closed_form_stream(0, s, n));
}

TEST_CASE("word stride helper scales to bytes") {
  const std::vector<std::int64_t> words{1, 8};
  const std::vector<std::uint32_t> n{3, 3};
  const AguConfig agu = agu_from_word_strides(256, words, n);
  CHECK(agu.base == 256);
  CHECK(agu.step[0] == 4);
  CHECK(agu.step[1] == 24);
}

TEST_CASE("configuration limits are enforced") {
  CHECK_THROWS_AS(convert_strides(std::vector<std::int64_t>(6, 1),
                                  std::vector<std::uint32_t>(6, 2)),
                  ConfigError);
  CHECK_THROWS_AS(convert_strides(std::vector<std::int64_t>{1},
                                  std::vector<std::uint32_t>{0}),
                  ConfigError);
  HwlConfig bad;
  bad.outer_level = 1;
  bad.init_level = 2;  // init outside the active nest
  CHECK_THROWS_AS(validate_hwl(bad), ConfigError);
  HwlConfig wide = nest({1});
  wide.bounds[0] = kMaxBound + 1;
  CHECK_THROWS_AS(validate_hwl(wide), ConfigError);
}

TEST_CASE("random nests reproduce the closed form stream") {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> dl(1, 5);
  std::uniform_int_distribution<std::int64_t> dstride(-16, 16);
  for (int trial = 0; trial < 300; ++trial) {
    const int levels = dl(rng);
    std::uniform_int_distribution<std::uint32_t> dn(1, 6 - levels + 2);
    std::vector<std::int64_t> s(levels);
    std::vector<std::uint32_t> n(levels);
    for (int i = 0; i < levels; ++i) {
      s[i] = dstride(rng);
      n[i] = dn(rng);
    }
    CAPTURE(trial);
    CHECK(stepped_stream(1000, s, n) == closed_form_stream(1000, s, n));
  }
}
