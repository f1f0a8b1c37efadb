// Minimal CSV reader/writer. Handles double-quoted fields; everything else is
// a plain comma split. All tables here are small enough to hold in memory.
#pragma once

#include <string>
#include <vector>

namespace c3f::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // -1 if the column is absent.
    int column(const std::string& name) const;
};

Table read_file(const std::string& path);
Table read_string(const std::string& text);

std::string to_string(const Table& table);
void write_file(const Table& table, const std::string& path);

}  // namespace c3f::csv
