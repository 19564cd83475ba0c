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

// Corpus access. Everything downstream reads builds through CorpusReader so
// that the same code runs on the on-disk store, an in-memory corpus, or an
// audited wrapper that records which builds were touched in which phase.
//
// On-disk layout of a store directory:
//
//   manifest.json              CorpusManifest
//   build-0000000042.jsonl     records of build 42, sorted by testId;
//                              testSource replaced by "testSourceRef"
//   sources/<hash>.txt         each distinct (testId, source) text once

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flakesift/core.hpp"
#include "flakesift/error.hpp"
#include "flakesift/records_io.hpp"

namespace flakesift {

namespace fs = std::filesystem;

inline constexpr int kStoreSchemaVersion = 1;

class CorpusReader {
 public:
  virtual ~CorpusReader() = default;

  /// Sorted ascending. Listing build ids does not count as reading a build.
  virtual std::vector<BuildId> build_ids() const = 0;

  /// Records of one build sorted by test_id. Throws if the build is absent.
  virtual std::vector<TestExecutionRecord> read_build(BuildId id) const = 0;

  /// Phase marker for access auditing; a no-op for plain readers.
  virtual void mark_phase(std::string_view /*phase*/) const {}

  std::vector<BuildId> build_ids_in(const BuildRange& range) const {
    std::vector<BuildId> out;
    for (auto b : build_ids())
      if (range.contains(b)) out.push_back(b);
    return out;
  }
};

inline void sort_records(std::vector<TestExecutionRecord>& records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.build_id != b.build_id ? a.build_id < b.build_id : a.test_id < b.test_id;
  });
}

/// Reads every record of the given builds, sorted by (build_id, test_id).
inline std::vector<TestExecutionRecord> read_all(const CorpusReader& reader,
                                                 const std::vector<BuildId>& builds) {
  std::vector<TestExecutionRecord> out;
  for (auto b : builds) {
    auto recs = reader.read_build(b);
    std::move(recs.begin(), recs.end(), std::back_inserter(out));
  }
  return out;
}

inline std::vector<TestExecutionRecord> read_all(const CorpusReader& reader) {
  return read_all(reader, reader.build_ids());
}

class MemoryCorpus final : public CorpusReader {
 public:
  MemoryCorpus() = default;
  explicit MemoryCorpus(std::vector<TestExecutionRecord> records) {
    for (auto& r : records) add(std::move(r));
  }

  /// Snapshot of another reader (one pass over every build).
  static MemoryCorpus load(const CorpusReader& reader) { return MemoryCorpus(read_all(reader)); }

  void add(TestExecutionRecord r) {
    auto& build = builds_[r.build_id];
    auto it = std::lower_bound(build.begin(), build.end(), r.test_id,
                               [](const auto& rec, const std::string& id) { return rec.test_id < id; });
    if (it != build.end() && it->test_id == r.test_id)
      throw ValidationError("duplicate test_id " + r.test_id + " in build " +
                            std::to_string(r.build_id));
    build.insert(it, std::move(r));
  }

  std::vector<BuildId> build_ids() const override {
    std::vector<BuildId> out;
    out.reserve(builds_.size());
    for (const auto& [id, _] : builds_) out.push_back(id);
    return out;
  }

  std::vector<TestExecutionRecord> read_build(BuildId id) const override {
    auto it = builds_.find(id);
    if (it == builds_.end()) throw Error("build " + std::to_string(id) + " not in corpus");
    return it->second;
  }

  std::size_t record_count() const {
    std::size_t n = 0;
    for (const auto& [_, recs] : builds_) n += recs.size();
    return n;
  }

 private:
  std::map<BuildId, std::vector<TestExecutionRecord>> builds_;
};

struct AccessEvent {
  std::string phase;
  BuildId build_id = 0;
};

/// Records every read_build call together with the phase active at the
/// time. Experiments mark "training" before assembling training data and
/// "scoring" before touching holdout builds.
class AuditedReader final : public CorpusReader {
 public:
  explicit AuditedReader(const CorpusReader& inner) : inner_(inner) {}

  std::vector<BuildId> build_ids() const override { return inner_.build_ids(); }

  std::vector<TestExecutionRecord> read_build(BuildId id) const override {
    {
      std::lock_guard lock(mu_);
      events_.push_back({phase_, id});
    }
    return inner_.read_build(id);
  }

  void mark_phase(std::string_view phase) const override {
    std::lock_guard lock(mu_);
    phase_ = std::string(phase);
    phases_.push_back(phase_);
  }

  std::vector<AccessEvent> events() const {
    std::lock_guard lock(mu_);
    return events_;
  }

  std::vector<std::string> phases() const {
    std::lock_guard lock(mu_);
    return phases_;
  }

  /// Builds read while `phase` was active that fall outside `allowed`.
  std::vector<AccessEvent> violations(std::string_view phase, const BuildRange& allowed) const {
    std::vector<AccessEvent> out;
    for (const auto& e : events())
      if (e.phase == phase && !allowed.contains(e.build_id)) out.push_back(e);
    return out;
  }

  void clear() {
    std::lock_guard lock(mu_);
    events_.clear();
    phases_.clear();
    phase_.clear();
  }

 private:
  const CorpusReader& inner_;
  mutable std::mutex mu_;
  mutable std::string phase_;
  mutable std::vector<AccessEvent> events_;
  mutable std::vector<std::string> phases_;
};

// ---------------------------------------------------------------------------
// Fetchers

/// Source of per-build records, e.g. a CI results API.
class ResultFetcher {
 public:
  virtual ~ResultFetcher() = default;
  virtual std::vector<BuildId> available_builds() const = 0;
  /// Every returned record carries `build_id`. May throw TransportError.
  virtual std::vector<TestExecutionRecord> fetch_build(BuildId build_id) const = 0;
};

/// Serves builds from JSONL files (plain or gzip). A build split across
/// several files is merged; the same (build, test) offered twice with
/// different content is a ConflictError.
class FileFetcher final : public ResultFetcher {
 public:
  explicit FileFetcher(const std::vector<fs::path>& files, int max_attempts = kDefaultMaxAttempts) {
    for (const auto& f : files) {
      for (auto& r : read_records_file(f, max_attempts)) {
        auto& build = builds_[r.build_id];
        auto [it, inserted] = build.try_emplace(r.test_id, r);
        if (!inserted && !(it->second == r))
          throw ConflictError("build " + std::to_string(r.build_id) + " test " + r.test_id +
                              " offered twice with different content (" + f.string() + ")");
      }
    }
  }

  std::vector<BuildId> available_builds() const override {
    std::vector<BuildId> out;
    for (const auto& [id, _] : builds_) out.push_back(id);
    return out;
  }

  std::vector<TestExecutionRecord> fetch_build(BuildId build_id) const override {
    auto it = builds_.find(build_id);
    if (it == builds_.end()) throw Error("build " + std::to_string(build_id) + " not available");
    std::vector<TestExecutionRecord> out;
    for (const auto& [_, r] : it->second) out.push_back(r);
    return out;
  }

 private:
  std::map<BuildId, std::map<std::string, TestExecutionRecord>> builds_;
};

// ---------------------------------------------------------------------------
// Store

struct CorpusManifest {
  std::string tester_name;
  BuildRange build_id_range;
  std::uint64_t record_count = 0;
  int schema_version = kStoreSchemaVersion;
  std::map<BuildId, std::uint64_t> builds;  // build id -> record count

  friend bool operator==(const CorpusManifest&, const CorpusManifest&) = default;
};

inline Json manifest_to_json(const CorpusManifest& m) {
  Json builds = Json::array();
  for (const auto& [id, n] : m.builds) builds.push_back(Json{{"buildId", id}, {"records", n}});
  Json range = Json::array();
  if (!m.builds.empty()) range = Json::array({m.build_id_range.lo, m.build_id_range.hi});
  return Json{{"schema_version", m.schema_version},
              {"tester_name", m.tester_name},
              {"build_id_range", range},
              {"record_count", m.record_count},
              {"builds", builds}};
}

inline CorpusManifest manifest_from_json(const Json& j) {
  CorpusManifest m;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    m.tester_name = j.at("tester_name").get<std::string>();
    m.record_count = j.at("record_count").get<std::uint64_t>();
    for (const auto& b : j.at("builds"))
      m.builds[b.at("buildId").get<BuildId>()] = b.at("records").get<std::uint64_t>();
    const auto& range = j.at("build_id_range");
    if (range.size() == 2) m.build_id_range = {range[0].get<BuildId>(), range[1].get<BuildId>()};
  } catch (const Json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what());
  }
  if (m.schema_version != kStoreSchemaVersion)
    throw ValidationError("unsupported store schema_version " + std::to_string(m.schema_version));
  std::uint64_t total = 0;
  for (const auto& [_, n] : m.builds) total += n;
  if (total != m.record_count) throw ValidationError("manifest record_count does not match builds");
  return m;
}

/// 64-bit FNV-1a, stable across platforms; names content-addressed sources.
inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string source_key(std::string_view test_id, std::string_view source) {
  std::uint64_t h = fnv1a64(test_id);
  h = fnv1a64(std::string_view("\0", 1), h);
  h = fnv1a64(source, h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

inline std::string build_file_name(BuildId id) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "build-%010" PRId64 ".jsonl", static_cast<std::int64_t>(id));
  return buf;
}

inline void write_file_atomic(const fs::path& path, const std::string& data) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Directory-backed corpus. Single writer, any number of readers.
class CorpusStore final : public CorpusReader {
 public:
  /// Opens an existing store (manifest.json must exist).
  static CorpusStore open(const fs::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw Error("no manifest.json in " + dir.string());
    CorpusStore s(dir);
    try {
      s.manifest_ = manifest_from_json(Json::parse(read_file_bytes(manifest_path)));
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("bad manifest: ") + e.what());
    }
    return s;
  }

  /// Opens or initializes a store.
  static CorpusStore create(const fs::path& dir, const std::string& tester_name = "") {
    if (fs::exists(dir / "manifest.json")) {
      auto s = open(dir);
      if (!tester_name.empty() && s.manifest_.tester_name.empty()) s.manifest_.tester_name = tester_name;
      return s;
    }
    fs::create_directories(dir / "sources");
    CorpusStore s(dir);
    s.manifest_.tester_name = tester_name;
    s.write_manifest();
    return s;
  }

  CorpusStore(CorpusStore&& other) noexcept
      : dir_(std::move(other.dir_)), manifest_(std::move(other.manifest_)),
        source_cache_(std::move(other.source_cache_)) {}

  const CorpusManifest& manifest() const noexcept { return manifest_; }
  const fs::path& path() const noexcept { return dir_; }

  std::vector<BuildId> build_ids() const override {
    std::vector<BuildId> out;
    for (const auto& [id, _] : manifest_.builds) out.push_back(id);
    return out;
  }

  std::vector<TestExecutionRecord> read_build(BuildId id) const override {
    if (!manifest_.builds.contains(id)) throw Error("build " + std::to_string(id) + " not in store");
    std::istringstream in(read_file_bytes(dir_ / build_file_name(id)));
    std::vector<TestExecutionRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::parse_error& e) {
        throw ParseError(build_file_name(id) + ": malformed JSON: " + e.what(), line_no);
      }
      auto r = record_from_json(j);
      if (auto ref = j.find("testSourceRef"); ref != j.end())
        r.test_source = load_source(ref->get<std::string>());
      out.push_back(std::move(r));
    }
    return out;
  }

  /// Stores one build's records, replacing any previous content for that
  /// build. Byte-identical content leaves the store untouched. Returns true
  /// when something was written.
  bool commit_build(BuildId id, std::vector<TestExecutionRecord> records,
                    int max_attempts = kDefaultMaxAttempts) {
    std::sort(records.begin(), records.end(),
              [](const auto& a, const auto& b) { return a.test_id < b.test_id; });
    std::string body;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (r.build_id != id)
        throw ValidationError("record " + r.test_id + " carries build " + std::to_string(r.build_id) +
                              ", expected " + std::to_string(id));
      if (i > 0 && records[i - 1].test_id == r.test_id)
        throw ValidationError("duplicate test_id " + r.test_id + " in build " + std::to_string(id));
      validate_record(r, max_attempts);
      Json j = record_to_json(r);
      j.erase("testSource");
      if (!r.test_source.empty()) {
        const auto key = source_key(r.test_id, r.test_source);
        const auto src_path = dir_ / "sources" / (key + ".txt");
        if (!fs::exists(src_path)) write_file_atomic(src_path, r.test_source);
        j["testSourceRef"] = key;
      }
      body += j.dump();
      body += '\n';
    }
    const auto file = dir_ / build_file_name(id);
    if (manifest_.builds.contains(id) && fs::exists(file) && read_file_bytes(file) == body) return false;
    write_file_atomic(file, body);
    manifest_.builds[id] = records.size();
    refresh_manifest();
    write_manifest();
    return true;
  }

 private:
  explicit CorpusStore(fs::path dir) : dir_(std::move(dir)) {}

  void refresh_manifest() {
    manifest_.record_count = 0;
    for (const auto& [_, n] : manifest_.builds) manifest_.record_count += n;
    if (!manifest_.builds.empty())
      manifest_.build_id_range = {manifest_.builds.begin()->first, manifest_.builds.rbegin()->first};
  }

  void write_manifest() const {
    write_file_atomic(dir_ / "manifest.json", manifest_to_json(manifest_).dump(2) + "\n");
  }

  std::string load_source(const std::string& key) const {
    std::lock_guard lock(mu_);
    if (auto it = source_cache_.find(key); it != source_cache_.end()) return it->second;
    auto text = read_file_bytes(dir_ / "sources" / (key + ".txt"));
    source_cache_.emplace(key, text);
    return text;
  }

  fs::path dir_;
  CorpusManifest manifest_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::string> source_cache_;
};

struct IngestOptions {
  std::string tester_name;
  int max_attempts = kDefaultMaxAttempts;
};

/// Pulls the given builds from `fetcher` in ascending order and commits
/// each one. A fetch failure aborts the ingest: builds already committed
/// stay, the failing build and everything after it are untouched.
inline CorpusManifest ingest(const ResultFetcher& fetcher, std::vector<BuildId> builds,
                             const fs::path& store_path, const IngestOptions& opts = {}) {
  std::sort(builds.begin(), builds.end());
  if (std::adjacent_find(builds.begin(), builds.end()) != builds.end())
    throw ValidationError("build list contains duplicates");
  auto store = CorpusStore::create(store_path, opts.tester_name);
  for (auto b : builds) {
    auto records = fetcher.fetch_build(b);
    for (const auto& r : records)
      if (r.build_id != b)
        throw ValidationError("fetcher returned build " + std::to_string(r.build_id) +
                              " when asked for " + std::to_string(b));
    store.commit_build(b, std::move(records), opts.max_attempts);
  }
  return store.manifest();
}

inline CorpusManifest ingest(const ResultFetcher& fetcher, const fs::path& store_path,
                             const IngestOptions& opts = {}) {
  return ingest(fetcher, fetcher.available_builds(), store_path, opts);
}

inline CorpusManifest ingest_files(const std::vector<fs::path>& files, const fs::path& store_path,
                                   const IngestOptions& opts = {}) {
  FileFetcher fetcher(files, opts.max_attempts);
  return ingest(fetcher, store_path, opts);
}

/// All *.jsonl / *.jsonl.gz files directly inside `dir`, sorted by name.
inline std::vector<fs::path> list_record_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.ends_with(".jsonl") || name.ends_with(".jsonl.gz")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace flakesift
