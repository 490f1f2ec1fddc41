#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace advlab::verify {

struct SuiteResult {
  std::string name;
  int total = 0;
  int failed = 0;
  std::string first_failure;  // serialized failing case, empty if none
  std::string detail;         // e.g. worst relative error observed
  bool ok() const { return failed == 0; }
};

// Randomized k-point hull-closure trials (k in [2,8], d in {8,64,512}):
// direct vs. peeled evaluation within tol plus envelope membership.
SuiteResult hull_closure_suite(int trials, double tol, uint64_t seed);

// Random (method, epsilon, image) attack cases against a small fixed-weight
// conv classifier; every output must respect the epsilon ball (within
// `tolerance`) and the pixel box.
SuiteResult budget_fuzz_suite(int cases, double tolerance, uint64_t seed);

// Central finite differences against the analytic denoiser-loss and
// restorer-loss gradients on small networks; at least `samples` parameters
// per loss, aggregate relative error below 1e-3.
SuiteResult gradient_check_suite(uint64_t seed, int samples = 120);

// Mixing identities: endpoint exactness and bilinearity of convex_mix.
SuiteResult mix_properties_suite(int trials, uint64_t seed);

std::vector<SuiteResult> run_all(int hull_trials, int fuzz_cases,
                                 double budget_tolerance, uint64_t seed);

}  // namespace advlab::verify
