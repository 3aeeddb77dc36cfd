#include "mpsych/transcript.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include "mpsych/error.hpp"

namespace mpsych::transcript {
namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

nlohmann::json Entry::to_json() const {
  nlohmann::json j = {{"schema_version", schema_version},
                      {"seq", seq},
                      {"experiment", experiment},
                      {"kind", kind},
                      {"unit_id", unit_id},
                      {"unit_index", unit_index},
                      {"unit_entries", unit_entries},
                      {"unit_entry", unit_entry}};
  if (timestamp) j["timestamp"] = *timestamp;
  j["payload"] = payload;
  return j;
}

Entry Entry::from_json(const nlohmann::json& j) {
  Entry e;
  e.schema_version = j.at("schema_version").get<int>();
  e.seq = j.at("seq").get<std::uint64_t>();
  e.experiment = j.at("experiment").get<std::string>();
  e.kind = j.at("kind").get<std::string>();
  e.unit_id = j.at("unit_id").get<std::string>();
  e.unit_index = j.at("unit_index").get<std::size_t>();
  e.unit_entries = j.at("unit_entries").get<int>();
  e.unit_entry = j.at("unit_entry").get<int>();
  if (j.contains("timestamp")) e.timestamp = j.at("timestamp").get<std::string>();
  e.payload = j.at("payload");
  return e;
}

Sink::Sink(const std::filesystem::path& path, std::string experiment, std::size_t next_unit,
           std::uint64_t next_seq, bool timestamps)
    : experiment_(std::move(experiment)),
      next_unit_(next_unit),
      next_seq_(next_seq),
      timestamps_(timestamps) {
  file_ = std::fopen(path.c_str(), "ab");
  if (!file_) throw IoError("cannot open transcript " + path.string() + " for appending");
}

Sink::~Sink() {
  if (file_) std::fclose(file_);
}

void Sink::submit(UnitRecord unit) {
  std::lock_guard lock(mu_);
  if (unit.unit_index < next_unit_ || pending_.count(unit.unit_index)) {
    throw IntegrityError("unit " + std::to_string(unit.unit_index) + " submitted twice");
  }
  pending_.emplace(unit.unit_index, std::move(unit));
  for (auto it = pending_.find(next_unit_); it != pending_.end(); it = pending_.find(next_unit_)) {
    write_unit(it->second);
    pending_.erase(it);
    ++next_unit_;
    ++written_;
  }
}

std::size_t Sink::units_written() const {
  std::lock_guard lock(mu_);
  return written_;
}

void Sink::write_unit(const UnitRecord& unit) {
  std::string block;
  const int n = static_cast<int>(unit.entries.size());
  for (int k = 0; k < n; ++k) {
    Entry e;
    e.seq = next_seq_++;
    e.experiment = experiment_;
    e.kind = unit.entries[static_cast<std::size_t>(k)].first;
    e.unit_id = unit.unit_id;
    e.unit_index = unit.unit_index;
    e.unit_entries = n;
    e.unit_entry = k;
    if (timestamps_) e.timestamp = utc_now();
    e.payload = unit.entries[static_cast<std::size_t>(k)].second;
    block += e.to_json().dump();
    block.push_back('\n');
  }
  if (std::fwrite(block.data(), 1, block.size(), file_) != block.size() ||
      std::fflush(file_) != 0) {
    throw IoError("failed writing transcript");
  }
}

Scan scan(const std::filesystem::path& path, bool repair) {
  Scan out;
  if (!std::filesystem::exists(path)) return out;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read transcript " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::size_t pos = 0;
  std::size_t unit_start_offset = 0;  // byte offset where the open unit began
  std::size_t unit_start_entries = 0;
  std::uint64_t unit_start_seq = 0;
  std::optional<std::string> problem;
  std::optional<Entry> open_unit_head;

  while (pos < data.size()) {
    const std::size_t nl = data.find('\n', pos);
    const std::uint64_t expected = out.next_seq;
    if (nl == std::string::npos) {
      problem = "truncated line at sequence number " + std::to_string(expected);
      break;
    }
    Entry e;
    try {
      e = Entry::from_json(nlohmann::json::parse(data.substr(pos, nl - pos)));
    } catch (const nlohmann::json::exception&) {
      problem = "unreadable line at sequence number " + std::to_string(expected);
      break;
    }
    if (e.schema_version != kSchemaVersion) {
      throw SchemaError("transcript schema version " + std::to_string(e.schema_version) +
                        " at sequence number " + std::to_string(e.seq) + " (expected " +
                        std::to_string(kSchemaVersion) + ")");
    }
    if (e.seq != expected) {
      problem = "sequence number " + std::to_string(e.seq) + " where " +
                std::to_string(expected) + " was expected";
      break;
    }
    if (e.unit_entry == 0) {
      if (open_unit_head) {
        problem = "unit " + open_unit_head->unit_id + " incomplete before sequence number " +
                  std::to_string(e.seq);
        break;
      }
      if (e.unit_index != out.complete_units) {
        problem = "unit index " + std::to_string(e.unit_index) + " out of order at sequence number " +
                  std::to_string(e.seq);
        break;
      }
      unit_start_offset = pos;
      unit_start_entries = out.entries.size();
      unit_start_seq = e.seq;
      open_unit_head = e;
    } else if (!open_unit_head || e.unit_index != open_unit_head->unit_index ||
               e.unit_entries != open_unit_head->unit_entries ||
               e.unit_entry != static_cast<int>(out.entries.size() - unit_start_entries)) {
      problem = "unit bookkeeping broken at sequence number " + std::to_string(e.seq);
      break;
    }
    out.entries.push_back(std::move(e));
    ++out.next_seq;
    pos = nl + 1;
    if (out.entries.back().unit_entry + 1 == out.entries.back().unit_entries) {
      ++out.complete_units;
      open_unit_head.reset();
      unit_start_offset = pos;
      unit_start_entries = out.entries.size();
      unit_start_seq = out.next_seq;
    }
  }
  if (!problem && open_unit_head) {
    problem = "unit " + open_unit_head->unit_id + " incomplete at end of transcript (sequence number " +
              std::to_string(out.next_seq) + ")";
  }
  if (!problem) return out;

  if (!repair) {
    throw IntegrityError("transcript " + path.string() + ": " + *problem +
                         "; rerun with --repair to discard the damaged tail");
  }
  out.entries.resize(unit_start_entries);
  out.next_seq = unit_start_seq;
  std::filesystem::resize_file(path, unit_start_offset);
  out.repaired = true;
  return out;
}

}  // namespace mpsych::transcript
