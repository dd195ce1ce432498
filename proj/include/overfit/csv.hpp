#pragma once

#include <optional>
#include <string>
#include <vector>

namespace overfit {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a named column; throws ValidationError when absent.
    std::size_t column(const std::string& name) const;
};

// Comma-separated file with a header row. Fields are trimmed; blank fields
// stay as empty strings. Throws ValidationError naming the path on failure.
CsvTable read_csv(const std::string& path);

// Blank -> nullopt; non-numeric text -> ValidationError naming the location.
std::optional<double> parse_cell(const std::string& cell, const std::string& where);

}  // namespace overfit
