#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace plastinet {

/// Deterministic CSV emission: integers verbatim, reals with "%.10g", no
/// quoting needed for the fixed headers this project writes.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void write_row(const std::vector<std::string>& fields);
    void close();

    static std::string field(std::int64_t v);
    static std::string field(double v);

private:
    std::string path_;
    void* file_ = nullptr;
    std::size_t columns_ = 0;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const; // throws if absent
};

/// Strict RFC-4180 reader (quoted fields, escaped quotes, CRLF or LF line
/// ends). Malformed input raises IoError with the byte offset.
CsvTable read_csv(const std::string& path);

struct SeriesGroup {
    std::string name;
    std::vector<std::string> files;
};

struct AggregateRow {
    std::string group;
    std::int64_t step = 0;
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation; 0 for a single series
};

/// Per (group, step): mean and sample standard deviation of `metric` across
/// the group's files. All files in a group must share an identical step grid;
/// a mismatch raises an error naming the offending files.
std::vector<AggregateRow> plot_data(const std::vector<SeriesGroup>& groups,
                                    const std::string& step_column, const std::string& metric);

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& metric,
                         const std::string& path);

} // namespace plastinet
