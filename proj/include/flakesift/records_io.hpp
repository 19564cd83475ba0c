// Copyright 2026 The Flakesift Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

// JSON Lines record format. One object per line:
//
//   {"buildId": 12, "testId": "suite.name", "testSuite": "suite",
//    "testSource": "...",
//    "attempts": [{"runStatus": "FAIL", "runTagStatus": "TIMEOUT",
//                  "runDuration": 31.0}, ...]}
//
// "flakeRate" is accepted and ignored. A line without "attempts" is read as
// a single attempt from top-level runStatus / runTagStatus / runDuration.

#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "flakesift/core.hpp"
#include "flakesift/error.hpp"
#include "json.hpp"

namespace flakesift {

using Json = nlohmann::json;

namespace detail {

inline RunAttempt attempt_from_json(const Json& j) {
  const auto status_str = j.at("runStatus").get<std::string>();
  const auto status = parse_run_status(status_str);
  if (!status) throw ValidationError("unknown runStatus \"" + status_str + "\"");
  RunTagStatus tag = RunTagStatus::kUnknown;
  if (auto it = j.find("runTagStatus"); it != j.end() && !it->is_null()) {
    const auto tag_str = it->get<std::string>();
    const auto parsed = parse_run_tag_status(tag_str);
    if (!parsed) throw ValidationError("unknown runTagStatus \"" + tag_str + "\"");
    tag = *parsed;
  }
  double duration = 0.0;
  if (auto it = j.find("runDuration"); it != j.end() && !it->is_null()) duration = it->get<double>();
  return {*status, tag, duration};
}

}  // namespace detail

inline Json attempt_to_json(const RunAttempt& a) {
  return Json{{"runStatus", to_string(a.status)},
              {"runTagStatus", to_string(a.tag_status)},
              {"runDuration", a.duration}};
}

/// Decodes one record object. Structural problems (missing fields, wrong
/// types) raise ParseError; unknown enum strings raise ValidationError.
inline TestExecutionRecord record_from_json(const Json& j) {
  TestExecutionRecord r;
  try {
    if (!j.is_object()) throw ParseError("record is not a JSON object");
    r.build_id = j.at("buildId").get<BuildId>();
    r.test_id = j.at("testId").get<std::string>();
    if (auto it = j.find("testSuite"); it != j.end() && !it->is_null())
      r.test_suite = it->get<std::string>();
    if (auto it = j.find("testSource"); it != j.end() && !it->is_null())
      r.test_source = it->get<std::string>();
    if (auto it = j.find("attempts"); it != j.end()) {
      if (!it->is_array()) throw ParseError("\"attempts\" is not an array");
      for (const auto& a : *it) r.attempts.push_back(detail::attempt_from_json(a));
    } else {
      r.attempts.push_back(detail::attempt_from_json(j));
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("bad record field: ") + e.what());
  }
  return r;
}

/// Canonical encoding (keys sorted, attempts always explicit).
inline Json record_to_json(const TestExecutionRecord& r) {
  Json attempts = Json::array();
  for (const auto& a : r.attempts) attempts.push_back(attempt_to_json(a));
  return Json{{"buildId", r.build_id},
              {"testId", r.test_id},
              {"testSuite", r.test_suite},
              {"testSource", r.test_source},
              {"attempts", std::move(attempts)}};
}

inline std::string serialize_record(const TestExecutionRecord& r) { return record_to_json(r).dump(); }

/// Parses a JSONL stream and validates every record. Blank lines are
/// skipped. Errors name the offending line; validation errors also name
/// test_id and build_id.
inline std::vector<TestExecutionRecord> parse_records(std::istream& in,
                                                      int max_attempts = kDefaultMaxAttempts) {
  std::vector<TestExecutionRecord> out;
  std::set<std::pair<BuildId, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    TestExecutionRecord r;
    try {
      r = record_from_json(j);
      validate_record(r, max_attempts);
    } catch (const ParseError& e) {
      throw ParseError(line_no, e.what());
    } catch (const TruncatedRerunsError& e) {
      throw TruncatedRerunsError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.emplace(r.build_id, r.test_id).second)
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate test_id " + r.test_id +
                            " in build " + std::to_string(r.build_id));
    out.push_back(std::move(r));
  }
  return out;
}

/// Reads a whole file, transparently inflating gzip (detected by the
/// 0x1f 0x8b magic bytes).
inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.size() < 2 || static_cast<unsigned char>(raw[0]) != 0x1f ||
      static_cast<unsigned char>(raw[1]) != 0x8b)
    return raw;

  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error("zlib init failed");
  zs.next_in = reinterpret_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  std::string out;
  char buf[1 << 16];
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc == Z_STREAM_END && zs.avail_in > 0) {
      // concatenated gzip members
      out.append(buf, sizeof(buf) - zs.avail_out);
      inflateReset(&zs);
      rc = Z_OK;
      continue;
    }
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw ParseError("corrupt gzip stream in " + path.string());
    }
    out.append(buf, sizeof(buf) - zs.avail_out);
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw ParseError("truncated gzip stream in " + path.string());
    }
  }
  inflateEnd(&zs);
  return out;
}

inline void write_gzip_file(const std::filesystem::path& path, const std::string& data) {
  gzFile gz = gzopen(path.string().c_str(), "wb9");
  if (!gz) throw Error("cannot write " + path.string());
  // gzip header carries no timestamp when written through gzopen, so the
  // output is reproducible byte for byte.
  std::size_t off = 0;
  while (off < data.size()) {
    const auto chunk = static_cast<unsigned>(std::min<std::size_t>(data.size() - off, 1u << 20));
    if (gzwrite(gz, data.data() + off, chunk) != static_cast<int>(chunk)) {
      gzclose(gz);
      throw Error("gzip write failed for " + path.string());
    }
    off += chunk;
  }
  if (gzclose(gz) != Z_OK) throw Error("gzip close failed for " + path.string());
}

inline std::vector<TestExecutionRecord> read_records_file(const std::filesystem::path& path,
                                                          int max_attempts = kDefaultMaxAttempts) {
  std::istringstream in(read_file_bytes(path));
  try {
    return parse_records(in, max_attempts);
  } catch (const ParseError& e) {
    throw ParseError(path.filename().string() + ": " + e.what(), e.line());
  } catch (const TruncatedRerunsError& e) {
    throw TruncatedRerunsError(path.filename().string() + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(path.filename().string() + ": " + e.what());
  }
}

}  // namespace flakesift
