// Runs every registered suite and prints one verdict line per criterion.
// Exit status is 0 only when all criteria pass.

#include "eigengp/harness.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>

int main(int argc, char **argv) {
  using namespace eigengp;
  std::string report_path;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--report" && i + 1 < argc)
      report_path = argv[++i];

  Json all = Json::array();
  int failed = 0;
  for (const SuiteSpec &spec : suite_registry()) {
    SuiteReport r;
    try {
      r = run_suite(spec.name);
    } catch (const std::exception &e) {
      r.name = spec.name;
      r.criterion = spec.criterion;
      r.passed = false;
      r.summary = std::string("suite raised: ") + e.what();
    }
    failed += r.passed ? 0 : 1;
    std::printf("%s  criterion %d  %-20s %8.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.criterion,
                r.name.c_str(), r.seconds, r.summary.c_str());
    std::fflush(stdout);
    all.push_back(r.to_json());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(suite_registry().size()) - failed,
              suite_registry().size());
  if (!report_path.empty())
    std::ofstream(report_path) << Json{{"schema_version", kSchemaVersion}, {"suites", all}}.dump(2)
                               << '\n';
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
