#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cyclemon/experiments.hpp"

namespace cyclemon::report {

// One row per configuration: id,mean_error,std_error,repeats,seed.
// std_error is left empty when the configuration has no std (repeats < 2).
std::string results_csv(const std::vector<experiments::ConfigResult>& rows);

// Grouped bar chart with std-dev error bars. Every bar carries a data-mean
// attribute equal to the CSV mean_error field, digit for digit.
std::string results_svg(const std::vector<experiments::ConfigResult>& rows,
                        const std::string& title);

void write_text(const std::filesystem::path& path, const std::string& content);

}  // namespace cyclemon::report
