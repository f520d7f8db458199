#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ofvio {

/// Formats a double so that parsing it back yields the identical bit pattern.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct CsvRow {
    std::vector<std::string> fields;
    int line_number = 0;

    size_t size() const { return fields.size(); }
    const std::string& operator[](size_t i) const { return fields[i]; }
};

/// Minimal CSV reader: comma-separated, no quoting (none of the shipped formats need it).
/// Errors carry file and line context.
class CsvReader {
  public:
    CsvReader(const std::string& path, const std::string& expected_header)
        : path_(path), stream_(path) {
        if (!stream_) throw std::runtime_error("cannot open " + path);
        std::string header;
        if (!std::getline(stream_, header)) throw std::runtime_error(path + ": empty file");
        ++line_;
        strip_cr(header);
        if (header != expected_header)
            throw std::runtime_error(path + ":1: expected header '" + expected_header +
                                     "', got '" + header + "'");
    }

    bool next(CsvRow& row) {
        std::string line;
        while (std::getline(stream_, line)) {
            ++line_;
            strip_cr(line);
            if (line.empty()) continue;
            row.fields.clear();
            row.line_number = line_;
            size_t start = 0;
            while (true) {
                const size_t comma = line.find(',', start);
                if (comma == std::string::npos) {
                    row.fields.push_back(line.substr(start));
                    break;
                }
                row.fields.push_back(line.substr(start, comma - start));
                start = comma + 1;
            }
            return true;
        }
        return false;
    }

    double parse_double(const CsvRow& row, size_t field) const {
        const std::string& s = row.fields.at(field);
        try {
            size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw std::runtime_error(location(row, field) + ": malformed number '" + s + "'");
        }
    }

    long long parse_int(const CsvRow& row, size_t field) const {
        const std::string& s = row.fields.at(field);
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw std::runtime_error(location(row, field) + ": malformed integer '" + s + "'");
        return v;
    }

    void expect_fields(const CsvRow& row, size_t n) const {
        if (row.size() != n)
            throw std::runtime_error(path_ + ":" + std::to_string(row.line_number) + ": expected " +
                                     std::to_string(n) + " fields, got " + std::to_string(row.size()));
    }

    const std::string& path() const { return path_; }

  private:
    static void strip_cr(std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    }

    std::string location(const CsvRow& row, size_t field) const {
        return path_ + ":" + std::to_string(row.line_number) + ": field " + std::to_string(field + 1);
    }

    std::string path_;
    std::ifstream stream_;
    int line_ = 0;
};

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& header) : path_(path), stream_(path) {
        if (!stream_) throw std::runtime_error("cannot open " + path + " for writing");
        stream_ << header << "\n";
    }

    void write_row(const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) stream_ << ',';
            stream_ << fields[i];
        }
        stream_ << '\n';
    }

    ~CsvWriter() { stream_.flush(); }

  private:
    std::string path_;
    std::ofstream stream_;
};

}  // namespace ofvio
