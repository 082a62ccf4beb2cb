#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace lesionquant::verify {

struct CriterionResult {
    int number = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct CriterionInfo {
    int number;
    const char* name;
    const char* summary;
};

const std::vector<CriterionInfo>& criteria();

/// `selection` is "all" (or empty) or a comma-separated list of criterion
/// names and numbers. Throws InvalidArgument for an unknown entry.
std::vector<int> parse_selection(std::string_view selection);

CriterionResult run_criterion(int number, std::uint64_t seed);

/// Runs the selected criteria in order, reporting each as it finishes.
std::vector<CriterionResult> run(std::string_view selection, std::uint64_t seed,
                                 const std::function<void(const CriterionResult&)>& on_result = {});

/// "[PASS] 2 registration: ... (3.1 s)"
std::string format_line(const CriterionResult& r);

}  // namespace lesionquant::verify
