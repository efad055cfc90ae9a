#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "lexsel/common.hpp"

namespace lexsel {

// Tab-separated reader. The header row is parsed on construction; next()
// yields one data row at a time (blank lines skipped, CR stripped).
class TsvReader {
  public:
    explicit TsvReader(const std::string& path) : path_(path), in_(path) {
        if (!in_) throw data_error("cannot open file: " + path);
        if (!read_line()) throw data_error("empty file (no header row): " + path);
        for (auto f : split_tabs(line_)) header_.emplace_back(trim(f));
    }

    const std::vector<std::string>& header() const { return header_; }
    const std::string& path() const { return path_; }
    size_t line_no() const { return line_no_; }

    // Index of a required header column.
    size_t column(const std::string& name) const {
        for (size_t i = 0; i < header_.size(); ++i)
            if (header_[i] == name) return i;
        throw config_error("missing column '" + name + "' in " + path_);
    }

    bool has_column(const std::string& name) const {
        for (const auto& h : header_)
            if (h == name) return true;
        return false;
    }

    // Advances to the next data row; false at EOF. Views point into an
    // internal buffer valid until the next call.
    bool next(std::vector<std::string_view>& fields) {
        while (read_line()) {
            if (line_.empty()) continue;
            fields = split_tabs(line_);
            return true;
        }
        return false;
    }

  private:
    bool read_line() {
        if (!std::getline(in_, line_)) return false;
        ++line_no_;
        if (!line_.empty() && line_.back() == '\r') line_.pop_back();
        return true;
    }

    std::string path_;
    std::ifstream in_;
    std::string line_;
    size_t line_no_ = 0;
    std::vector<std::string> header_;
};

class TsvWriter {
  public:
    explicit TsvWriter(const std::string& path) : out_(path) {
        if (!out_) throw data_error("cannot open file for writing: " + path);
    }

    void row(const std::vector<std::string>& fields) {
        for (size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << '\t';
            out_ << fields[i];
        }
        out_ << '\n';
    }

  private:
    std::ofstream out_;
};

}  // namespace lexsel
