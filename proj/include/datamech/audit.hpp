#pragma once

#include <ctime>
#include <fstream>
#include <string>
#include <vector>

#include "datamech/canonical.hpp"
#include "datamech/digest.hpp"
#include "datamech/errors.hpp"

namespace datamech {

// One link of the append-only audit chain. record_digest covers every other
// field; prev_digest is the previous record's record_digest (all zeros for
// the first record).
struct AuditRecord {
  std::uint64_t sequence = 0;
  std::string timestamp;  // UTC, second precision
  std::string kind;       // quality_score | marginal_estimate | auction | simulation
  std::string payload_digest;
  std::string prev_digest;
  std::string record_digest;
};

inline bool is_audit_kind(const std::string& kind) {
  return kind == "quality_score" || kind == "marginal_estimate" || kind == "auction" ||
         kind == "simulation";
}

inline std::string audit_record_digest(const AuditRecord& r) {
  return canonical_digest(json{{"sequence", r.sequence},
                               {"timestamp", r.timestamp},
                               {"kind", r.kind},
                               {"payload_digest", r.payload_digest},
                               {"prev_digest", r.prev_digest}});
}

inline void to_json(json& j, const AuditRecord& r) {
  j = json{{"sequence", r.sequence},   {"timestamp", r.timestamp},
           {"kind", r.kind},           {"payload_digest", r.payload_digest},
           {"prev_digest", r.prev_digest}, {"record_digest", r.record_digest}};
}

inline void from_json(const json& j, AuditRecord& r) {
  j.at("sequence").get_to(r.sequence);
  j.at("timestamp").get_to(r.timestamp);
  j.at("kind").get_to(r.kind);
  j.at("payload_digest").get_to(r.payload_digest);
  j.at("prev_digest").get_to(r.prev_digest);
  j.at("record_digest").get_to(r.record_digest);
}

inline std::string utc_timestamp_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[24];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// Append-only JSONL log. Reopening an existing file continues its chain.
// Timestamps live in the record digest but never in payload digests, so
// output determinism checks are unaffected by the wall clock.
class AuditLog {
 public:
  explicit AuditLog(std::string path) : path_(std::move(path)), prev_digest_(kZeroDigest) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      AuditRecord r;
      try {
        from_json(json::parse(line), r);
      } catch (const json::exception&) {
        throw DataError("audit log '" + path_ + "': unparseable record at sequence " +
                        std::to_string(next_sequence_));
      }
      prev_digest_ = r.record_digest;
      next_sequence_ = r.sequence + 1;
    }
  }

  // Appends one record; payload determines payload_digest only.
  AuditRecord append(const std::string& kind, const json& payload,
                     const std::string& timestamp = utc_timestamp_now()) {
    if (!is_audit_kind(kind)) throw ConfigError("audit: unknown record kind '" + kind + "'");
    AuditRecord r;
    r.sequence = next_sequence_;
    r.timestamp = timestamp;
    r.kind = kind;
    r.payload_digest = canonical_digest(payload);
    r.prev_digest = prev_digest_;
    r.record_digest = audit_record_digest(r);

    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("audit log '" + path_ + "': cannot open for append");
    out << canonical_dump(json(r)) << '\n';
    out.flush();

    prev_digest_ = r.record_digest;
    ++next_sequence_;
    return r;
  }

  const std::string& path() const { return path_; }
  std::uint64_t next_sequence() const { return next_sequence_; }

 private:
  std::string path_;
  std::string prev_digest_;
  std::uint64_t next_sequence_ = 0;
};

struct AuditVerification {
  bool intact = true;
  std::uint64_t first_break = 0;  // sequence index of the first bad record
  std::uint64_t records = 0;
  std::string message;
};

// Recomputes the whole digest chain; any single-bit mutation, reorder or
// truncation-with-edit shows up at the first affected sequence number.
inline AuditVerification verify_audit_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("audit log '" + path + "': cannot open");
  AuditVerification result;
  std::string prev = kZeroDigest;
  std::uint64_t index = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    AuditRecord r;
    try {
      from_json(json::parse(line), r);
    } catch (const json::exception& e) {
      result.intact = false;
      result.first_break = index;
      result.message = std::string("unparseable record: ") + e.what();
      return result;
    }
    if (r.sequence != index) {
      result.intact = false;
      result.first_break = index;
      result.message = "sequence mismatch: expected " + std::to_string(index) + ", found " +
                       std::to_string(r.sequence);
      return result;
    }
    if (r.prev_digest != prev) {
      result.intact = false;
      result.first_break = index;
      result.message = "previous-digest link broken";
      return result;
    }
    if (audit_record_digest(r) != r.record_digest) {
      result.intact = false;
      result.first_break = index;
      result.message = "record digest mismatch";
      return result;
    }
    prev = r.record_digest;
    ++index;
  }
  result.records = index;
  return result;
}

}  // namespace datamech
