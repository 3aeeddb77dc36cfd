#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace mpsych::transcript {

inline constexpr int kSchemaVersion = 1;

struct Entry {
  int schema_version = kSchemaVersion;
  std::uint64_t seq = 0;
  std::string experiment;
  std::string kind;
  std::string unit_id;
  std::size_t unit_index = 0;
  int unit_entries = 1;
  int unit_entry = 0;
  std::optional<std::string> timestamp;
  nlohmann::json payload;

  nlohmann::json to_json() const;
  static Entry from_json(const nlohmann::json& j);
};

// Everything one unit of work produced, written atomically and in unit order.
struct UnitRecord {
  std::size_t unit_index = 0;
  std::string unit_id;
  std::vector<std::pair<std::string, nlohmann::json>> entries;  // (kind, payload)
};

// Single serialized writer. Producers may submit units in any order; lines are
// appended strictly in unit-index order, each unit flushed as a whole.
class Sink {
 public:
  Sink(const std::filesystem::path& path, std::string experiment, std::size_t next_unit,
       std::uint64_t next_seq, bool timestamps);
  ~Sink();
  Sink(const Sink&) = delete;
  Sink& operator=(const Sink&) = delete;

  void submit(UnitRecord unit);
  std::size_t units_written() const;

 private:
  void write_unit(const UnitRecord& unit);

  mutable std::mutex mu_;
  std::FILE* file_ = nullptr;
  std::string experiment_;
  std::size_t next_unit_;
  std::uint64_t next_seq_;
  bool timestamps_;
  std::size_t written_ = 0;
  std::map<std::size_t, UnitRecord> pending_;
};

struct Scan {
  std::vector<Entry> entries;  // complete units only
  std::size_t complete_units = 0;
  std::uint64_t next_seq = 0;
  bool repaired = false;
};

// Reads and verifies a transcript: every line parses, schema versions match,
// sequence numbers run 0, 1, 2, ... and every unit is complete. A damaged
// tail raises IntegrityError naming the sequence number, unless `repair` is
// set, in which case the file is truncated to the last complete unit.
Scan scan(const std::filesystem::path& path, bool repair = false);

}  // namespace mpsych::transcript
