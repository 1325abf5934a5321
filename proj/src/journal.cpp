#include "medcot/journal.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>

#include "medcot/util.hpp"

namespace medcot {

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Generated: return "Generated";
    case Stage::Verified: return "Verified";
    case Stage::Tiered: return "Tiered";
    case Stage::Ranked: return "Ranked";
    case Stage::Refined: return "Refined";
    case Stage::Summarized: return "Summarized";
    case Stage::Scored: return "Scored";
    case Stage::Assembled: return "Assembled";
    case Stage::Failed: return "Failed";
  }
  throw std::runtime_error("unknown stage value");
}

Stage stage_from_string(const std::string& s) {
  static const std::map<std::string, Stage> table{
      {"Generated", Stage::Generated},   {"Verified", Stage::Verified},
      {"Tiered", Stage::Tiered},         {"Ranked", Stage::Ranked},
      {"Refined", Stage::Refined},       {"Summarized", Stage::Summarized},
      {"Scored", Stage::Scored},         {"Assembled", Stage::Assembled},
      {"Failed", Stage::Failed}};
  auto it = table.find(s);
  if (it == table.end()) throw std::runtime_error("unknown stage: " + s);
  return it->second;
}

static int stage_order(Stage s) { return static_cast<int>(s); }

JournalData read_journal(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read journal: " + path.string());

  JournalData data;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::optional<std::pair<std::size_t, std::string>> pending_bad;

  while (std::getline(in, line)) {
    ++line_no;
    if (pending_bad)
      throw JournalCorrupt("journal " + path.string() + " line " +
                           std::to_string(pending_bad->first) +
                           " is corrupt: " + pending_bad->second);
    if (trim(line).empty()) {
      pending_bad = {line_no, "empty line"};
      continue;
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      pending_bad = {line_no, e.what()};
      continue;
    }
    try {
      if (!have_header) {
        data.header.run_id = j.at("run_id").get<std::string>();
        data.header.plan_fingerprint =
            j.at("plan_fingerprint").get<std::string>();
        data.header.started_at = j.at("started_at").get<std::string>();
        have_header = true;
        continue;
      }
      data.entries.push_back(j.get<JournalEntry>());
    } catch (const std::exception& e) {
      pending_bad = {line_no, e.what()};
    }
  }
  if (pending_bad) data.dropped_truncated_tail = true;  // tolerated tail
  if (!have_header)
    throw JournalCorrupt("journal " + path.string() + " lacks a header line");
  return data;
}

JournalWriter JournalWriter::create(const std::filesystem::path& path,
                                    const JournalHeader& header) {
  nlohmann::json j{{"run_id", header.run_id},
                   {"plan_fingerprint", header.plan_fingerprint},
                   {"started_at", header.started_at}};
  write_file(path, j.dump() + "\n");
  return JournalWriter(path, header);
}

JournalWriter JournalWriter::append_to(const std::filesystem::path& path,
                                       const std::string& expected_fingerprint) {
  JournalData data = read_journal(path);
  if (data.header.plan_fingerprint != expected_fingerprint)
    throw std::runtime_error(
        "plan fingerprint mismatch: journal has " +
        data.header.plan_fingerprint + ", current plan is " +
        expected_fingerprint + "; refusing to resume");
  if (data.dropped_truncated_tail) {
    // Rewrite without the truncated tail so appends start on a clean line.
    std::string content;
    nlohmann::json h{{"run_id", data.header.run_id},
                     {"plan_fingerprint", data.header.plan_fingerprint},
                     {"started_at", data.header.started_at}};
    content += h.dump() + "\n";
    for (const auto& e : data.entries) {
      nlohmann::json j = e;
      content += j.dump() + "\n";
    }
    write_file(path, content);
  }
  return JournalWriter(path, data.header);
}

void JournalWriter::append(const JournalEntry& entry) {
  std::lock_guard lock(mu_);
  nlohmann::json j = entry;
  append_line(path_, j.dump());
}

JournalLock::JournalLock(const std::filesystem::path& journal_path)
    : lock_path_(journal_path.string() + ".lock") {
  const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw std::runtime_error(
        "journal is locked by another run (lock file exists: " +
        lock_path_.string() + ")");
  ::close(fd);
}

JournalLock::~JournalLock() {
  std::error_code ec;
  std::filesystem::remove(lock_path_, ec);
}

std::map<std::string, QuestionProgress> replay_journal(const JournalData& data) {
  std::map<std::string, QuestionProgress> out;
  std::map<std::string, int> last_order;
  for (const auto& e : data.entries) {
    auto& progress = out[e.qid];
    if (e.stage == Stage::Failed) {
      progress.failed = true;
      continue;
    }
    auto it = last_order.try_emplace(e.qid, -1).first;
    if (e.stage == Stage::Assembled && progress.has(Stage::Assembled))
      throw JournalCorrupt("duplicate Assembled entry for question " + e.qid);
    if (stage_order(e.stage) < it->second)
      throw JournalCorrupt("out-of-order stage " + to_string(e.stage) +
                           " for question " + e.qid);
    it->second = stage_order(e.stage);
    progress.failed = false;  // later progress supersedes an old failure
    progress.payloads[e.stage] = e.payload;
  }
  return out;
}

void to_json(nlohmann::json& j, const JournalEntry& e) {
  j = {{"qid", e.qid},
       {"stage", to_string(e.stage)},
       {"payload", e.payload},
       {"ts", e.ts}};
}

void from_json(const nlohmann::json& j, JournalEntry& e) {
  j.at("qid").get_to(e.qid);
  e.stage = stage_from_string(j.at("stage").get<std::string>());
  e.payload = j.at("payload");
  j.at("ts").get_to(e.ts);
}

}  // namespace medcot
