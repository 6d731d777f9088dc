#include "plastinet/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "plastinet/error.hpp"

namespace plastinet {

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("csv: cannot open '" + path + "' for writing");
    file_ = f;
    write_row(header);
}

CsvWriter::~CsvWriter() { close(); }

void CsvWriter::close() {
    if (file_) {
        std::fclose(static_cast<FILE*>(file_));
        file_ = nullptr;
    }
}

void CsvWriter::write_row(const std::vector<std::string>& fields) {
    if (!file_) throw IoError("csv: write after close on '" + path_ + "'");
    if (fields.size() != columns_) {
        throw IoError("csv: row width " + std::to_string(fields.size()) + " != header width " +
                      std::to_string(columns_) + " in '" + path_ + "'");
    }
    FILE* f = static_cast<FILE*>(file_);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) std::fputc(',', f);
        std::fwrite(fields[i].data(), 1, fields[i].size(), f);
    }
    std::fputc('\n', f);
}

std::string CsvWriter::field(std::int64_t v) { return std::to_string(v); }

std::string CsvWriter::field(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw IoError("csv: missing column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("csv: cannot open '" + path + "'");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    CsvTable table;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    std::size_t i = 0;
    const std::size_t n = content.size();

    auto end_field = [&]() {
        row.push_back(field);
        field.clear();
        field_was_quoted = false;
    };
    auto end_row = [&](std::size_t at) {
        end_field();
        if (table.header.empty()) {
            table.header = row;
        } else {
            if (row.size() != table.header.size()) {
                throw IoError("csv: row width " + std::to_string(row.size()) +
                                  " != header width " + std::to_string(table.header.size()) +
                                  " in '" + path + "'",
                              static_cast<long long>(at));
            }
            table.rows.push_back(row);
        }
        row.clear();
    };

    while (i < n) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < n && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            ++i;
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty() || field_was_quoted) {
                    throw IoError("csv: stray quote in '" + path + "'", static_cast<long long>(i));
                }
                in_quotes = true;
                field_was_quoted = true;
                ++i;
                break;
            case ',':
                end_field();
                ++i;
                break;
            case '\r':
                if (i + 1 >= n || content[i + 1] != '\n') {
                    throw IoError("csv: bare carriage return in '" + path + "'",
                                  static_cast<long long>(i));
                }
                end_row(i);
                i += 2;
                break;
            case '\n':
                end_row(i);
                ++i;
                break;
            default:
                if (field_was_quoted) {
                    throw IoError("csv: text after closing quote in '" + path + "'",
                                  static_cast<long long>(i));
                }
                field.push_back(c);
                ++i;
                break;
        }
    }
    if (in_quotes) {
        throw IoError("csv: unterminated quoted field in '" + path + "'",
                      static_cast<long long>(n));
    }
    if (!field.empty() || !row.empty()) end_row(n); // final line without newline
    if (table.header.empty()) throw IoError("csv: empty file '" + path + "'");
    return table;
}

namespace {

double parse_double(const std::string& s, const std::string& file) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError("csv: non-numeric value '" + s + "' in '" + file + "'");
    }
}

std::int64_t parse_int(const std::string& s, const std::string& file) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError("csv: non-integer value '" + s + "' in '" + file + "'");
    }
}

} // namespace

std::vector<AggregateRow> plot_data(const std::vector<SeriesGroup>& groups,
                                    const std::string& step_column, const std::string& metric) {
    std::vector<AggregateRow> out;
    for (const auto& group : groups) {
        if (group.files.empty()) {
            throw ConfigError("plot-data: group '" + group.name + "' has no log files");
        }
        std::vector<std::int64_t> steps;
        std::vector<std::vector<double>> values; // per file
        for (std::size_t f = 0; f < group.files.size(); ++f) {
            const CsvTable table = read_csv(group.files[f]);
            const std::size_t sc = table.column(step_column);
            const std::size_t mc = table.column(metric);
            std::vector<std::int64_t> file_steps;
            std::vector<double> file_values;
            for (const auto& row : table.rows) {
                file_steps.push_back(parse_int(row[sc], group.files[f]));
                file_values.push_back(parse_double(row[mc], group.files[f]));
            }
            if (f == 0) {
                steps = file_steps;
            } else if (file_steps != steps) {
                throw ConfigError("plot-data: step grid of '" + group.files[f] +
                                  "' does not match '" + group.files[0] + "'");
            }
            values.push_back(std::move(file_values));
        }
        const double n = static_cast<double>(values.size());
        for (std::size_t r = 0; r < steps.size(); ++r) {
            double mean = 0.0;
            for (const auto& v : values) mean += v[r];
            mean /= n;
            double sq = 0.0;
            for (const auto& v : values) sq += (v[r] - mean) * (v[r] - mean);
            const double stddev = values.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
            out.push_back(AggregateRow{group.name, steps[r], mean, stddev});
        }
    }
    return out;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::string& metric,
                         const std::string& path) {
    CsvWriter w(path, {"method", "global_step", metric + "_mean", metric + "_std"});
    for (const auto& r : rows) {
        w.write_row({r.group, CsvWriter::field(r.step), CsvWriter::field(r.mean),
                     CsvWriter::field(r.stddev)});
    }
}

} // namespace plastinet
