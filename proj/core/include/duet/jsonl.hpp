#pragma once

#include <fstream>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "duet/errors.hpp"
#include "duet/json.hpp"

namespace duet {

// JSON-lines helpers shared by the trajectory store, signal export and the
// synthesis archive. One canonical-form JSON value per line.

inline void write_jsonl_line(std::ostream& os, const json& j) {
  os << canonical(j) << '\n';
}

inline void write_jsonl_file(const std::string& path,
                             const std::vector<json>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  for (const auto& row : rows) write_jsonl_line(os, row);
  if (!os) throw IoError("write failed: " + path);
}

inline std::vector<json> read_jsonl_stream(std::istream& is,
                                           const std::string& where) {
  std::vector<json> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw IoError(where + ":" + std::to_string(lineno) + ": invalid JSON line");
    }
    rows.push_back(std::move(j));
  }
  return rows;
}

inline std::vector<json> read_jsonl_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  return read_jsonl_stream(is, path);
}

inline json read_json_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  json j = json::parse(is, nullptr, false);
  if (j.is_discarded()) throw IoError(path + ": invalid JSON");
  return j;
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << body;
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace duet
