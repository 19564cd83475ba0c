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

// Synthetic corpora with a ground-truth ledger.
//
// Every test runs in every build. A flaky test flakes in a build with
// probability flake_recurrence (1-5 failures, then a pass). Builds receive
// an injected fault with probability fault_injection_rate; a few tests of
// the fault pool then fail all max_attempts attempts. overlap_fraction of
// the pool is drawn from the flaky tests. Each test's source carries
// marker identifiers of its own class with probability (1 + s) / 2, where
// s is vocab_signal_strength, and of the other class otherwise.

#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "flakesift/corpus_stats.hpp"
#include "flakesift/random.hpp"
#include "flakesift/records_io.hpp"
#include "flakesift/store.hpp"

namespace flakesift {

struct DurationDist {
  double mean = 1.0;
  double stddev = 0.3;
};

struct SynthConfig {
  int n_builds = 500;
  int n_tests = 2000;
  double flaky_fraction = 0.1;
  double fault_injection_rate = 0.25;
  // 1 - (1 - r)^35 ~= 0.88: most flakes have an earlier flake in the window.
  double flake_recurrence = 0.0585;
  double vocab_signal_strength = 0.5;
  double overlap_fraction = 1.0 / 3.0;
  double fault_pool_fraction = 0.05;
  int max_faults_per_build = 4;
  double skip_rate = 0.0;
  DurationDist pass_duration{1.0, 0.3};
  DurationDist flaky_duration{0.5, 0.2};
  DurationDist fault_duration{1.5, 0.4};
  int marker_slots = 4;
  int noise_tokens = 12;
  int noise_vocabulary = 300;
  int max_attempts = kDefaultMaxAttempts;
  BuildId first_build = 1;
  std::uint64_t seed = 1;

  static SynthConfig profile(std::string_view name);
  void check() const;
};

/// Profiles: "default" (desk scale), "planted" (perfect vocabulary
/// separation, no overlap) and "adversarial" (weak vocabulary, overlapping
/// classes, discriminative execution features).
inline SynthConfig SynthConfig::profile(std::string_view name) {
  SynthConfig c;
  if (name == "default") return c;
  if (name == "planted") {
    c.n_builds = 150;
    c.n_tests = 400;
    c.flaky_fraction = 0.15;
    c.flake_recurrence = 0.1;
    c.vocab_signal_strength = 1.0;
    c.overlap_fraction = 0.0;
    c.fault_pool_fraction = 0.15;
    return c;
  }
  if (name == "adversarial") {
    c.n_builds = 160;
    c.n_tests = 500;
    c.flaky_fraction = 0.2;
    c.flake_recurrence = 0.1;
    c.fault_injection_rate = 0.4;
    c.vocab_signal_strength = 0.3;
    c.overlap_fraction = 1.0 / 3.0;
    c.fault_pool_fraction = 0.12;
    c.pass_duration = {1.0, 0.3};
    c.flaky_duration = {0.3, 0.1};
    c.fault_duration = {2.0, 0.4};
    return c;
  }
  throw Error("unknown synth profile \"" + std::string(name) + "\" (default, planted, adversarial)");
}

inline void SynthConfig::check() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(std::string("synth: ") + name + " must be in [0, 1]");
  };
  if (n_builds < 1 || n_tests < 1) throw Error("synth: n_builds and n_tests must be >= 1");
  prob(flaky_fraction, "flaky_fraction");
  prob(fault_injection_rate, "fault_injection_rate");
  prob(flake_recurrence, "flake_recurrence");
  prob(vocab_signal_strength, "vocab_signal_strength");
  prob(overlap_fraction, "overlap_fraction");
  prob(fault_pool_fraction, "fault_pool_fraction");
  prob(skip_rate, "skip_rate");
  if (max_attempts < 2) throw Error("synth: max_attempts must be >= 2");
  if (max_faults_per_build < 1) throw Error("synth: max_faults_per_build must be >= 1");
  if (marker_slots < 0 || noise_tokens < 0 || noise_vocabulary < 1) throw Error("synth: bad source shape");
  for (const auto* d : {&pass_duration, &flaky_duration, &fault_duration})
    if (!(d->mean >= 0 && d->stddev >= 0)) throw Error("synth: durations must be non-negative");
}

struct LedgerTest {
  std::string test_id;
  std::string test_suite;
  bool flaky = false;       // may flake in any build
  bool fault_pool = false;  // may reveal injected faults
  std::vector<std::string> planted;  // marker identifiers in its source
};

/// A non-PASS outcome. Tests absent from a build's events passed.
struct LedgerEvent {
  BuildId build_id = 0;
  std::string test_id;
  OutcomeLabel label = OutcomeLabel::kFlaky;
  int failures = 0;  // failing attempts

  friend bool operator==(const LedgerEvent&, const LedgerEvent&) = default;
};

struct GroundTruthLedger {
  std::vector<BuildId> builds;
  std::vector<LedgerTest> tests;
  std::vector<LedgerEvent> events;  // sorted by (build, test)
  int max_attempts = kDefaultMaxAttempts;
};

struct SynthCorpus {
  std::vector<std::vector<TestExecutionRecord>> builds;  // ascending build id, records by test_id
  GroundTruthLedger ledger;
};

inline const std::vector<std::string>& flaky_markers() {
  static const std::vector<std::string> v{"waitUntilDone", "setTimeout", "pollForChange",
                                          "asyncCallback", "sleepMillis", "retryLater"};
  return v;
}

inline const std::vector<std::string>& stable_markers() {
  static const std::vector<std::string> v{"assertEquals", "expectTrue",   "checkResult",
                                          "verifyOutput", "compareBytes", "validateState"};
  return v;
}

namespace detail {

inline double normal(CounterRng& rng) {
  const double u1 = 1.0 - rng.uniform01();  // (0, 1]
  const double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Non-negative, rounded to milliseconds.
inline double draw_duration(CounterRng& rng, const DurationDist& d) {
  const double v = std::max(0.001, d.mean + d.stddev * normal(rng));
  return std::round(v * 1000.0) / 1000.0;
}

/// Pronounceable lowercase filler words that never collide with a marker
/// token. Fixed for every seed.
inline std::vector<std::string> noise_words(int n) {
  static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static const char* kVowels[] = {"a", "e", "i", "o", "u"};
  std::set<std::string> reserved;
  for (const auto* list : {&flaky_markers(), &stable_markers()})
    for (const auto& m : *list)
      for (auto& t : tokenize(m)) reserved.insert(t);
  std::set<std::string> seen;
  std::vector<std::string> out;
  CounterRng rng(0x5eed, 0);
  while (static_cast<int>(out.size()) < n) {
    std::string w;
    const int syllables = 2 + static_cast<int>(rng.uniform(2));
    for (int s = 0; s < syllables; ++s) {
      w += kOnsets[rng.uniform(std::size(kOnsets))];
      w += kVowels[rng.uniform(std::size(kVowels))];
    }
    if (reserved.contains(w) || !seen.insert(w).second) continue;
    out.push_back(w);
  }
  return out;
}

inline std::string pad(long long v, int width) {
  auto s = std::to_string(v);
  return std::string(width > static_cast<int>(s.size()) ? width - s.size() : 0, '0') + s;
}

}  // namespace detail

/// Builds the corpus in memory. Deterministic per seed.
inline SynthCorpus generate_corpus(const SynthConfig& cfg) {
  cfg.check();
  const auto n = static_cast<std::size_t>(cfg.n_tests);
  const auto n_flaky = static_cast<std::size_t>(std::llround(cfg.flaky_fraction * static_cast<double>(n)));
  std::size_t pool = 0, overlap = 0;
  if (cfg.fault_injection_rate > 0) {
    pool = static_cast<std::size_t>(std::llround(cfg.fault_pool_fraction * static_cast<double>(n)));
    if (pool == 0) {
      if (cfg.overlap_fraction > 0) throw Error("synth: overlap_fraction > 0 but the fault pool is empty");
      throw Error("synth: fault_injection_rate > 0 but the fault pool is empty");
    }
    overlap = static_cast<std::size_t>(std::llround(cfg.overlap_fraction * static_cast<double>(pool)));
    if (overlap > n_flaky)
      throw Error("synth: " + std::to_string(overlap) + " overlapping fault tests requested but only " +
                  std::to_string(n_flaky) + " flaky tests exist");
    if (pool - overlap > n - n_flaky) throw Error("synth: not enough non-flaky tests for the fault pool");
  } else if (cfg.overlap_fraction > 0 && cfg.fault_pool_fraction == 0) {
    throw Error("synth: overlap_fraction > 0 but the fault pool is empty");
  }

  SynthCorpus out;
  auto& ledger = out.ledger;
  ledger.max_attempts = cfg.max_attempts;

  // Roster: class assignment by a seeded shuffle of test indices.
  CounterRng roster_rng(cfg.seed, 0);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[roster_rng.uniform(i)]);
  ledger.tests.resize(n);
  const int suites = std::max(1, cfg.n_tests / 50);
  for (std::size_t i = 0; i < n; ++i) {
    auto& t = ledger.tests[i];
    const auto suite = static_cast<long long>(i % static_cast<std::size_t>(suites));
    t.test_suite = "Suite" + detail::pad(suite, 3);
    t.test_id = t.test_suite + ".test" + detail::pad(static_cast<long long>(i), 5);
  }
  for (std::size_t j = 0; j < n_flaky; ++j) ledger.tests[order[j]].flaky = true;
  std::vector<std::size_t> pool_members;
  for (std::size_t j = 0; j < overlap; ++j) pool_members.push_back(order[j]);
  for (std::size_t j = 0; j < pool - overlap; ++j) pool_members.push_back(order[n_flaky + j]);
  std::sort(pool_members.begin(), pool_members.end());
  for (auto i : pool_members) ledger.tests[i].fault_pool = true;

  // Sources.
  const auto words = detail::noise_words(cfg.noise_vocabulary);
  const double own = (1.0 + cfg.vocab_signal_strength) / 2.0;
  std::vector<std::string> sources(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(cfg.seed, 1ULL << 40 | i);
    auto& t = ledger.tests[i];
    const auto& mine = t.flaky ? flaky_markers() : stable_markers();
    const auto& other = t.flaky ? stable_markers() : flaky_markers();
    std::vector<std::string> body;
    for (int s = 0; s < cfg.marker_slots; ++s) {
      const auto& list = rng.bernoulli(own) ? mine : other;
      t.planted.push_back(list[rng.uniform(list.size())]);
      body.push_back(t.planted.back() + "();");
    }
    for (int s = 0; s < cfg.noise_tokens; ++s) body.push_back(words[rng.uniform(words.size())] + "();");
    // Interleave markers with filler deterministically.
    for (std::size_t k = body.size(); k > 1; --k) std::swap(body[k - 1], body[rng.uniform(k)]);
    std::string src = "TEST(" + t.test_suite + ", " + t.test_id.substr(t.test_id.find('.') + 1) + ") {\n";
    for (const auto& line : body) src += "  " + line + "\n";
    src += "}\n";
    sources[i] = std::move(src);
  }

  // Builds. Records are emitted in test_id order, which is roster order.
  for (int bi = 0; bi < cfg.n_builds; ++bi) {
    const BuildId b = cfg.first_build + bi;
    ledger.builds.push_back(b);
    CounterRng rng(cfg.seed, 2ULL << 40 | static_cast<std::uint64_t>(bi));
    std::vector<bool> faulted(n, false);
    if (!pool_members.empty() && rng.bernoulli(cfg.fault_injection_rate)) {
      const auto count = std::min<std::size_t>(pool_members.size(), 1 + rng.uniform(cfg.max_faults_per_build));
      auto picks = pool_members;
      for (std::size_t k = 0; k < count; ++k) {
        std::swap(picks[k], picks[k + rng.uniform(picks.size() - k)]);
        faulted[picks[k]] = true;
      }
    }
    std::vector<TestExecutionRecord> records;
    records.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& t = ledger.tests[i];
      TestExecutionRecord r;
      r.build_id = b;
      r.test_id = t.test_id;
      r.test_suite = t.test_suite;
      r.test_source = sources[i];
      if (faulted[i]) {
        for (int a = 0; a < cfg.max_attempts; ++a)
          r.attempts.push_back({RunStatus::kFail, RunTagStatus::kFail, detail::draw_duration(rng, cfg.fault_duration)});
        ledger.events.push_back({b, t.test_id, OutcomeLabel::kFaultRevealing, cfg.max_attempts});
      } else if (t.flaky && rng.bernoulli(cfg.flake_recurrence)) {
        const int fails = 1 + static_cast<int>(rng.uniform(static_cast<std::uint64_t>(cfg.max_attempts - 1)));
        for (int a = 0; a < fails; ++a)
          r.attempts.push_back({RunStatus::kFail, RunTagStatus::kFail, detail::draw_duration(rng, cfg.flaky_duration)});
        r.attempts.push_back({RunStatus::kPass, RunTagStatus::kPass, detail::draw_duration(rng, cfg.pass_duration)});
        ledger.events.push_back({b, t.test_id, OutcomeLabel::kFlaky, fails});
      } else if (cfg.skip_rate > 0 && rng.bernoulli(cfg.skip_rate)) {
        r.attempts.push_back({RunStatus::kSkip, RunTagStatus::kSkip, 0.0});
        ledger.events.push_back({b, t.test_id, OutcomeLabel::kSkipped, 0});
      } else {
        r.attempts.push_back({RunStatus::kPass, RunTagStatus::kPass, detail::draw_duration(rng, cfg.pass_duration)});
      }
      records.push_back(std::move(r));
    }
    out.builds.push_back(std::move(records));
  }
  return out;
}

inline MemoryCorpus to_memory_corpus(const SynthCorpus& c) {
  MemoryCorpus m;
  for (const auto& b : c.builds)
    for (const auto& r : b) m.add(r);
  return m;
}

inline Json synth_config_to_json(const SynthConfig& c) {
  auto dist = [](const DurationDist& d) { return Json{{"mean", d.mean}, {"stddev", d.stddev}}; };
  return Json{{"n_builds", c.n_builds},
              {"n_tests", c.n_tests},
              {"flaky_fraction", c.flaky_fraction},
              {"fault_injection_rate", c.fault_injection_rate},
              {"flake_recurrence", c.flake_recurrence},
              {"vocab_signal_strength", c.vocab_signal_strength},
              {"overlap_fraction", c.overlap_fraction},
              {"fault_pool_fraction", c.fault_pool_fraction},
              {"max_faults_per_build", c.max_faults_per_build},
              {"skip_rate", c.skip_rate},
              {"pass_duration", dist(c.pass_duration)},
              {"flaky_duration", dist(c.flaky_duration)},
              {"fault_duration", dist(c.fault_duration)},
              {"marker_slots", c.marker_slots},
              {"noise_tokens", c.noise_tokens},
              {"noise_vocabulary", c.noise_vocabulary},
              {"max_attempts", c.max_attempts},
              {"first_build", c.first_build},
              {"seed", c.seed}};
}

/// Overlays the keys present in `j` onto `base`.
inline SynthConfig synth_config_from_json(const Json& j, SynthConfig base = {}) {
  try {
    auto get = [&](const char* key, auto& field) {
      if (auto it = j.find(key); it != j.end()) field = it->get<std::decay_t<decltype(field)>>();
    };
    auto dist = [&](const char* key, DurationDist& d) {
      if (auto it = j.find(key); it != j.end()) {
        d.mean = it->value("mean", d.mean);
        d.stddev = it->value("stddev", d.stddev);
      }
    };
    get("n_builds", base.n_builds);
    get("n_tests", base.n_tests);
    get("flaky_fraction", base.flaky_fraction);
    get("fault_injection_rate", base.fault_injection_rate);
    get("flake_recurrence", base.flake_recurrence);
    get("vocab_signal_strength", base.vocab_signal_strength);
    get("overlap_fraction", base.overlap_fraction);
    get("fault_pool_fraction", base.fault_pool_fraction);
    get("max_faults_per_build", base.max_faults_per_build);
    get("skip_rate", base.skip_rate);
    dist("pass_duration", base.pass_duration);
    dist("flaky_duration", base.flaky_duration);
    dist("fault_duration", base.fault_duration);
    get("marker_slots", base.marker_slots);
    get("noise_tokens", base.noise_tokens);
    get("noise_vocabulary", base.noise_vocabulary);
    get("max_attempts", base.max_attempts);
    get("first_build", base.first_build);
    get("seed", base.seed);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("bad synth config: ") + e.what());
  }
  return base;
}

inline Json ledger_to_json(const GroundTruthLedger& l) {
  Json tests = Json::array();
  for (const auto& t : l.tests)
    tests.push_back(Json{{"test_id", t.test_id},
                         {"test_suite", t.test_suite},
                         {"flaky", t.flaky},
                         {"fault_pool", t.fault_pool},
                         {"planted", t.planted}});
  Json events = Json::array();
  for (const auto& e : l.events)
    events.push_back(Json::array({e.build_id, e.test_id, to_string(e.label), e.failures}));
  return Json{{"schema_version", 1},
              {"max_attempts", l.max_attempts},
              {"builds", l.builds},
              {"tests", tests},
              {"events", events}};
}

inline GroundTruthLedger ledger_from_json(const Json& j) {
  GroundTruthLedger l;
  try {
    l.max_attempts = j.at("max_attempts").get<int>();
    l.builds = j.at("builds").get<std::vector<BuildId>>();
    for (const auto& t : j.at("tests"))
      l.tests.push_back({t.at("test_id").get<std::string>(), t.at("test_suite").get<std::string>(),
                         t.at("flaky").get<bool>(), t.at("fault_pool").get<bool>(),
                         t.at("planted").get<std::vector<std::string>>()});
    for (const auto& e : j.at("events")) {
      const auto label = parse_outcome_label(e.at(2).get<std::string>());
      if (!label) throw ValidationError("ledger: unknown label " + e.at(2).get<std::string>());
      l.events.push_back({e.at(0).get<BuildId>(), e.at(1).get<std::string>(), *label, e.at(3).get<int>()});
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("bad ledger: ") + e.what());
  }
  return l;
}

/// Writes build-NNNNNNNNNN.jsonl (or .jsonl.gz) per build plus ledger.json
/// and synth.json (the configuration) into `dir`.
inline void write_synth_corpus(const fs::path& dir, const SynthCorpus& c, const SynthConfig& cfg, bool gzip = false) {
  fs::create_directories(dir);
  for (const auto& build : c.builds) {
    if (build.empty()) continue;
    std::string data;
    for (const auto& r : build) data += serialize_record(r) + "\n";
    const auto name = "build-" + detail::pad(build.front().build_id, 10) + ".jsonl";
    if (gzip) write_gzip_file(dir / (name + ".gz"), data);
    else write_file_atomic(dir / name, data);
  }
  write_file_atomic(dir / "ledger.json", ledger_to_json(c.ledger).dump() + "\n");
  write_file_atomic(dir / "synth.json", synth_config_to_json(cfg).dump(2) + "\n");
}

inline GroundTruthLedger generate(const SynthConfig& cfg, const fs::path& dir, bool gzip = false) {
  auto c = generate_corpus(cfg);
  write_synth_corpus(dir, c, cfg, gzip);
  return std::move(c.ledger);
}

inline GroundTruthLedger read_ledger(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return ledger_from_json(Json::parse(bytes));
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

struct LedgerMismatch {
  BuildId build_id = 0;
  std::string test_id;
  std::string expected;
  std::string actual;
};

struct LedgerReport {
  std::vector<LedgerMismatch> mismatches;
  std::size_t records_checked = 0;
  bool ok() const noexcept { return mismatches.empty(); }
};

/// Relabels every record and compares with the ledger: same builds, every
/// roster test present in every build, same label and failure count.
inline LedgerReport verify_ledger(const CorpusReader& reader, const GroundTruthLedger& ledger) {
  LedgerReport rep;
  std::map<std::pair<BuildId, std::string>, const LedgerEvent*> events;
  for (const auto& e : ledger.events) events[{e.build_id, e.test_id}] = &e;
  std::set<std::string> roster;
  for (const auto& t : ledger.tests) roster.insert(t.test_id);

  const auto ids = reader.build_ids();
  const std::set<BuildId> corpus_builds(ids.begin(), ids.end());
  const std::set<BuildId> ledger_builds(ledger.builds.begin(), ledger.builds.end());
  for (auto b : ledger_builds)
    if (!corpus_builds.contains(b)) rep.mismatches.push_back({b, "", "build present", "build missing"});
  for (auto b : corpus_builds)
    if (!ledger_builds.contains(b)) rep.mismatches.push_back({b, "", "build absent", "build present"});

  for (auto b : ids) {
    if (!ledger_builds.contains(b)) continue;
    std::set<std::string> seen;
    for (const auto& r : reader.read_build(b)) {
      ++rep.records_checked;
      seen.insert(r.test_id);
      std::string expected = "PASS";
      int expected_failures = 0;
      if (!roster.contains(r.test_id)) {
        expected = "not in roster";
      } else if (auto it = events.find({b, r.test_id}); it != events.end()) {
        expected = std::string(to_string(it->second->label));
        expected_failures = it->second->failures;
      }
      std::string actual;
      try {
        const auto label = label_outcome(r.attempts, ledger.max_attempts);
        actual = std::string(to_string(label));
        int failures = 0;
        for (const auto& a : r.attempts) failures += is_failing(a.status);
        if (actual == expected && failures != expected_failures)
          actual += " with " + std::to_string(failures) + " failures";
        if (actual == expected) continue;
      } catch (const Error& e) {
        actual = std::string("invalid: ") + e.what();
      }
      if (expected_failures > 0 && expected != "PASS") expected += " with " + std::to_string(expected_failures) + " failures";
      rep.mismatches.push_back({b, r.test_id, expected, actual});
    }
    for (const auto& id : roster)
      if (!seen.contains(id)) rep.mismatches.push_back({b, id, "record present", "record missing"});
  }
  return rep;
}

inline Json ledger_report_to_json(const LedgerReport& r) {
  Json m = Json::array();
  for (const auto& x : r.mismatches)
    m.push_back(Json{{"build_id", x.build_id}, {"test_id", x.test_id}, {"expected", x.expected}, {"actual", x.actual}});
  return Json{{"ok", r.ok()}, {"records_checked", r.records_checked}, {"mismatches", m}};
}

/// The statistics corpus_stats would compute, derived from the ledger alone.
inline CorpusStats ledger_stats(const GroundTruthLedger& l) {
  CorpusStats s;
  s.builds = l.builds.size();
  s.records = l.builds.size() * l.tests.size();
  s.tests_total = l.builds.empty() ? 0 : l.tests.size();

  std::map<BuildId, std::vector<const LedgerEvent*>> by_build;
  for (const auto& e : l.events) by_build[e.build_id].push_back(&e);
  std::map<std::string, std::size_t> non_pass;
  std::set<std::string> flaky, fault, flaked_before;
  std::vector<std::uint64_t> flaky_per_build, fault_per_failing_build;
  for (auto b : l.builds) {
    std::uint64_t n_flaky = 0, n_fault = 0, with_history = 0;
    std::vector<std::string> flaked_now;
    for (const auto* e : by_build[b]) {
      ++non_pass[e->test_id];
      switch (e->label) {
        case OutcomeLabel::kFlaky:
          ++n_flaky;
          flaky.insert(e->test_id);
          flaked_now.push_back(e->test_id);
          s.flaky_failures += static_cast<std::uint64_t>(e->failures);
          break;
        case OutcomeLabel::kFaultRevealing:
          ++n_fault;
          fault.insert(e->test_id);
          if (flaked_before.contains(e->test_id)) ++with_history;
          s.fault_triggering_failures += static_cast<std::uint64_t>(e->failures);
          break;
        case OutcomeLabel::kSkipped:
          ++s.skipped_records;
          break;
        case OutcomeLabel::kPass:
          break;
      }
    }
    flaked_before.insert(flaked_now.begin(), flaked_now.end());
    flaky_per_build.push_back(n_flaky);
    if (n_flaky > 0) ++s.builds_with_flaky;
    if (n_fault > 0) {
      ++s.builds_with_fault_revealing;
      fault_per_failing_build.push_back(n_fault);
      s.fault_revealing_per_build_max = std::max(s.fault_revealing_per_build_max, n_fault);
      if (with_history > 0) ++s.builds_with_fault_revealing_flaky;
      if (with_history == n_fault) ++s.builds_exclusively_fault_revealing_flaky;
    }
  }
  if (!l.builds.empty())
    for (const auto& t : l.tests) {
      const bool p = non_pass[t.test_id] < l.builds.size();
      const bool f = flaky.contains(t.test_id), r = fault.contains(t.test_id);
      s.passing_tests += p;
      s.flaky_tests += f;
      s.fault_revealing_tests += r;
      s.failed_tests += (f || r);
      s.exclusively_flaky_tests += (f && !r);
      s.fault_revealing_flaky_tests += (f && r);
    }
  detail::mean_stddev(flaky_per_build, s.flaky_per_build_mean, s.flaky_per_build_stddev);
  detail::mean_stddev(fault_per_failing_build, s.fault_revealing_per_failing_build_mean,
                      s.fault_revealing_per_failing_build_stddev);
  return s;
}

}  // namespace flakesift
