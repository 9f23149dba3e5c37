#pragma once

// Trace files: `#` comment lines, a header of AP names, then one row of 0/1 per step.

#include <cstddef>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hoaexec/errors.hpp"

namespace hoaexec {

class TraceError : public Error {
 public:
  using Error::Error;
};

class TraceReader {
 public:
  TraceReader(std::unique_ptr<std::istream> in, std::string source)
      : in_(std::move(in)), source_(std::move(source)) {
    std::string line;
    while (next_significant(line)) {
      columns_ = split(line);
      return;
    }
    throw TraceError(source_ + ": missing header line");
  }

  static std::shared_ptr<TraceReader> open(const std::string& path) {
    auto f = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*f) throw TraceError("cannot open trace file '" + path + "'");
    return std::make_shared<TraceReader>(std::move(f), path);
  }

  static std::shared_ptr<TraceReader> from_string(std::string text, std::string source = "<trace>") {
    return std::make_shared<TraceReader>(std::make_unique<std::istringstream>(std::move(text)),
                                         std::move(source));
  }

  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::string& source() const noexcept { return source_; }

  std::optional<std::size_t> column_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i] == name) return i;
    }
    return std::nullopt;
  }

  /// Reads the next record; returns false at end of input.
  bool advance() {
    std::string line;
    if (!next_significant(line)) {
      exhausted_ = true;
      return false;
    }
    const auto tokens = split(line);
    if (tokens.size() != columns_.size()) {
      throw TraceError(source_ + ":" + std::to_string(line_no_) + ": expected " +
                       std::to_string(columns_.size()) + " values, found " +
                       std::to_string(tokens.size()));
    }
    record_.assign(tokens.size(), false);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i] == "1") {
        record_[i] = true;
      } else if (tokens[i] != "0") {
        throw TraceError(source_ + ":" + std::to_string(line_no_) + ": value '" + tokens[i] +
                         "' is not 0 or 1");
      }
    }
    return true;
  }

  bool exhausted() const noexcept { return exhausted_; }
  bool value(std::size_t column) const { return record_.at(column); }

 private:
  bool next_significant(std::string& line) {
    while (std::getline(*in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  }

  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
  }

  std::unique_ptr<std::istream> in_;
  std::string source_;
  std::vector<std::string> columns_;
  std::vector<bool> record_;
  std::size_t line_no_ = 0;
  bool exhausted_ = false;
};

}  // namespace hoaexec
