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

#include <cstdint>
#include <string>
#include <vector>

namespace ntx::verify {

struct SuiteResult {
  std::string name;
  int passed = 0;
  int total = 0;
  std::string first_failure;  // property name, empty when clean

  bool ok() const { return passed == total; }
};

// Runs the self-check suites (oracle-equivalence, gradient, decomposition,
// accumulator) with a deterministic generator. `inject_fault` corrupts the
// named suite on purpose — a hook for testing the failure path — and is
// empty for a normal run. `cases` sizes the randomized suites.
std::vector<SuiteResult> run_all(std::uint64_t seed, int cases,
                                 const std::string& inject_fault);

}  // namespace ntx::verify
