// Acceptance runner. With no arguments every criterion runs; otherwise only
// the criterion ids given. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails.
//
// SHIFT_LAB_THREADS sets the worker count (default: hardware concurrency).

#include <cstdlib>
#include <iostream>
#include <string>

#include "shiftlab/experiments.hpp"
#include "shiftlab/selftest.hpp"

int main(int argc, char** argv) {
  shiftlab::selftest::Options opts;
  opts.threads = 0;
  if (const char* env = std::getenv("SHIFT_LAB_THREADS")) opts.threads = std::atoi(env);
  opts.threads = shiftlab::resolve_threads(opts.threads);
  for (int i = 1; i < argc; ++i) {
    const int id = std::atoi(argv[i]);
    if (id < 1 || id > 10) {
      std::cerr << "unknown criterion '" << argv[i] << "'\n";
      return 2;
    }
    opts.only.insert(id);
  }
  bool all = true;
  shiftlab::selftest::run(opts, [&](const shiftlab::selftest::CriterionResult& r) {
    all = all && r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << ": " << r.name << " [" << r.seconds
              << " s] " << r.detail << std::endl;
  });
  return all ? 0 : 1;
}
