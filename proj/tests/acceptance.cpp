// Acceptance gate: runs the numbered verification criteria and prints one
// PASS/FAIL line per criterion. Exit status is nonzero if anything failed.
//
//   acceptance                 run every criterion
//   acceptance --only 5        run one criterion (repeatable)
//   acceptance --suite bounds  run a named suite
//   acceptance --seed 7        change the case seed (default 1)

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <aldist/verify.hpp>

int main(int argc, char** argv) {
  std::uint64_t seed = 1;
  std::string suite = "all";
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    const auto value = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value after " << arg << "\n";
        std::exit(64);
      }
      return argv[++i];
    };
    if (arg == "--only") {
      only.push_back(std::stoi(value()));
    } else if (arg == "--seed") {
      seed = std::stoull(value());
    } else if (arg == "--suite") {
      suite = value();
    } else {
      std::cerr << "usage: acceptance [--only N]... [--suite NAME] [--seed S]\n";
      return 64;
    }
  }

  std::vector<int> ids = only.empty() ? aldist::suite_ids(suite) : only;
  const std::vector<aldist::criterion_result> results = aldist::run_criteria(ids, seed);

  std::size_t passed = 0;
  for (const aldist::criterion_result& r : results) {
    std::cout << "criterion " << r.id << " " << r.name << ": " << (r.pass ? "PASS" : "FAIL")
              << " [" << r.detail << "]\n";
    if (r.pass) ++passed;
  }
  std::cout << passed << "/" << results.size() << " criteria passed (seed " << seed << ")\n";
  return passed == results.size() ? 0 : 1;
}
