// Acceptance suite at full scale (T = 1e6, 64 paths). One line per criterion; exit status is
// nonzero when any must-pass criterion fails.

#include <cstdio>
#include <iostream>

#include "oulab/checks.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path work = argc > 1 ? argv[1] : "acceptance-work";
  const auto results = oulab::run_all_checks(oulab::CheckScale::acceptance(), work, [](const oulab::CheckResult& r) {
    std::cout << oulab::format_line(r) << std::endl;
  });
  int failed = 0;
  for (const auto& r : results) failed += r.must_pass && !r.pass ? 1 : 0;
  std::cout << "\n" << oulab::format_table(results);
  std::printf("%d must-pass criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
