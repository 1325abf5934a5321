#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace medcot {

enum class Stage {
  Generated,
  Verified,
  Tiered,
  Ranked,
  Refined,
  Summarized,
  Scored,
  Assembled,
  Failed
};

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct JournalHeader {
  std::string run_id;
  std::string plan_fingerprint;
  std::string started_at;
};

struct JournalEntry {
  std::string qid;
  Stage stage{Stage::Generated};
  nlohmann::json payload;
  std::string ts;
};

class JournalCorrupt : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct JournalData {
  JournalHeader header;
  std::vector<JournalEntry> entries;
  bool dropped_truncated_tail{false};
};

// Reads a journal. A truncated (unparseable) final line is dropped and
// flagged; garbage anywhere earlier throws JournalCorrupt with the line
// number. Throws std::runtime_error if the file is unreadable.
JournalData read_journal(const std::filesystem::path& path);

// Serialized appender; every append writes one line and flushes.
class JournalWriter {
 public:
  // Creates/truncates the file and writes the header line.
  static JournalWriter create(const std::filesystem::path& path,
                              const JournalHeader& header);
  // Opens an existing journal for appending; throws JournalCorrupt /
  // std::runtime_error per read_journal, and std::runtime_error if the
  // stored plan fingerprint differs from expected_fingerprint.
  static JournalWriter append_to(const std::filesystem::path& path,
                                 const std::string& expected_fingerprint);

  void append(const JournalEntry& entry);
  const JournalHeader& header() const { return header_; }

 private:
  JournalWriter(std::filesystem::path path, JournalHeader header)
      : path_(std::move(path)), header_(std::move(header)) {}
  std::filesystem::path path_;
  JournalHeader header_;
  std::mutex mu_;
};

// Exclusive-creation lock file guarding a journal against concurrent runs.
class JournalLock {
 public:
  explicit JournalLock(const std::filesystem::path& journal_path);
  ~JournalLock();
  JournalLock(const JournalLock&) = delete;
  JournalLock& operator=(const JournalLock&) = delete;

 private:
  std::filesystem::path lock_path_;
};

// Per-question view rebuilt from a journal: latest payload per stage.
struct QuestionProgress {
  std::map<Stage, nlohmann::json> payloads;
  bool failed{false};
  bool has(Stage s) const { return payloads.count(s) != 0; }
};

// Groups entries by question and validates per-question stage monotonicity
// (duplicate Assembled entries are corruption). Failed entries set `failed`
// but keep earlier stage payloads available for retry.
std::map<std::string, QuestionProgress> replay_journal(const JournalData& data);

void to_json(nlohmann::json& j, const JournalEntry& e);
void from_json(const nlohmann::json& j, JournalEntry& e);

}  // namespace medcot
