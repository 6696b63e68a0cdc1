// Regenerates the frozen micro-primitive subgroup tables from the
// constructive refinement oracle and prints them to stdout. The checked-in
// copy lives in data/subgroup_tables.txt; a test compares the two byte for
// byte.

#include <iostream>

#include "blocktet/refinement_oracle.hpp"

int main() {
  try {
    std::cout << blocktet::oracle::render_subgroup_tables();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
