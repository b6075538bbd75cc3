#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace uhm {

/// One row of the long-format result table.
struct ResultRow {
    std::string suite;
    std::string method;
    std::uint64_t seed = 0;
    int step = 0;
    std::string metric;
    double value = 0.0;
};

/// Shortest round-trippable decimal rendering (17 significant digits).
std::string format_value(double value);

/// Writes the header and rows with LF line endings.  The byte stream is a
/// pure function of the rows, so identical inputs give identical files.
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);

}  // namespace uhm
