#include <iostream>

#include "iwes/acceptance.hpp"

// Runs every release criterion and reports one line each; nonzero exit when
// any criterion fails so the suite gates CI.
int main() {
  const int failures = iwes::acceptance::run_and_report(std::cout, "acceptance_scratch");
  return failures == 0 ? 0 : 3;
}
