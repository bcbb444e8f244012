#pragma once

#include <string>
#include <vector>

namespace derm {

// Minimal CSV support: comma-separated, no quoting (ids and relative paths
// must not contain commas). Lines starting with '#' are comments.
std::vector<std::string> split_csv_line(const std::string& line);

// Reads all non-comment rows of a CSV file; the first such row is the header.
struct CsvFile {
    std::vector<std::string> comments;  // leading '#' lines, without the '#'
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvFile read_csv(const std::string& path);

std::string join_csv(const std::vector<std::string>& fields);

}  // namespace derm
