// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <string>

// One line per claim, machine-grepable, nonzero exit iff any [FAIL].
// [STRETCH] lines report aspirational targets without gating the binary.
namespace accept {

inline int failures = 0;

inline void check(bool ok, const std::string& what, const std::string& detail) {
  std::printf("[%s] %s (%s)\n", ok ? "PASS" : "FAIL", what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

inline void stretch(bool ok, const std::string& what,
                    const std::string& detail) {
  std::printf("[%s] %s (%s)\n", ok ? "PASS" : "STRETCH", what.c_str(),
              detail.c_str());
  std::fflush(stdout);
}

inline void info(const std::string& what, const std::string& detail) {
  std::printf("[INFO] %s (%s)\n", what.c_str(), detail.c_str());
  std::fflush(stdout);
}

inline int verdict() {
  if (failures == 0) {
    std::printf("all checks passed\n");
    return 0;
  }
  std::printf("%d check(s) failed\n", failures);
  return 1;
}

}  // namespace accept
