#include "uhm/csv.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace uhm {

std::string format_value(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << "suite,method,seed,step,metric,value\n";
    for (const auto& row : rows) {
        out << row.suite << ',' << row.method << ',' << row.seed << ',' << row.step << ','
            << row.metric << ',' << format_value(row.value) << '\n';
    }
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    write_results_csv(out, rows);
    if (!out) throw std::runtime_error("failed writing output file: " + path);
}

}  // namespace uhm
