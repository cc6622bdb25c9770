#pragma once
// Minimal delimited-text (CSV) reading and writing. All tabular files in
// this project are comma-separated UTF-8 with a header row; fields never
// contain commas or quotes, so no quoting is implemented.

#include <stdexcept>
#include <string>
#include <vector>

namespace hea {

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
    int require_column(const std::string& name) const;
};

Table read_csv(const std::string& path);
Table parse_csv(const std::string& content);
void write_csv(const std::string& path, const Table& t);
std::string to_csv(const Table& t);

std::vector<std::string> split(const std::string& line, char sep);

double parse_double(const std::string& s, const std::string& context);

}  // namespace hea
