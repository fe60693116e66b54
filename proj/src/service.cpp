#include "blindeval/service.hpp"

#include <fcntl.h>
#include <fmt/format.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <random>

#include "blindeval/text.hpp"

namespace blindeval::service {

using nlohmann::json;

void SessionConfig::check() const {
  if (deadline_minutes < 1) {
    throw PreconditionError(
        fmt::format("deadline must be at least one minute, got {}", deadline_minutes));
  }
}

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::active: return "active";
    case SessionState::expired: return "expired";
    case SessionState::finished: return "finished";
  }
  return "?";
}

Clock system_clock() {
  return [] {
    return std::chrono::time_point_cast<std::chrono::milliseconds>(
        std::chrono::system_clock::now());
  };
}

// Journal

Journal::Journal(std::filesystem::path path, bool durable)
    : path_(std::move(path)), durable_(durable) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  drop_torn_tail();
  open();
}

// A crash mid-append leaves a final line without its newline. It was never
// acknowledged, so it is cut off before anything is appended after it.
void Journal::drop_torn_tail() {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path_, ec);
  if (ec || size == 0) return;
  std::ifstream in(path_, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (content.back() == '\n') return;
  const auto keep = content.rfind('\n');
  std::filesystem::resize_file(path_, keep == std::string::npos ? 0 : keep + 1);
}

Journal::~Journal() {
  if (fd_ >= 0) ::close(fd_);
}

void Journal::open() {
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0640);
  if (fd_ < 0) {
    throw Error(fmt::format("cannot open journal '{}': {}", path_.string(),
                            std::strerror(errno)));
  }
}

void Journal::append(const json& entry) {
  const std::string line = entry.dump() + "\n";
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const ssize_t n = ::write(fd_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(fmt::format("journal write failed: {}", std::strerror(errno)));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (durable_ && ::fdatasync(fd_) != 0) {
    throw Error(fmt::format("journal sync failed: {}", std::strerror(errno)));
  }
}

std::vector<json> Journal::read_all() const {
  std::vector<json> entries;
  std::ifstream in(path_, std::ios::binary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      entries.push_back(json::parse(line));
    } catch (const json::parse_error&) {
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw Error(fmt::format("corrupt journal line in '{}'", path_.string()));
    }
  }
  return entries;
}

void Journal::rewrite(const std::vector<json>& entries) {
  const auto tmp = std::filesystem::path(path_.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    for (const auto& e : entries) out << e.dump() << '\n';
    out.flush();
    if (!out) throw Error(fmt::format("cannot write '{}'", tmp.string()));
  }
  if (durable_) {
    const int fd = ::open(tmp.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd >= 0) {
      ::fsync(fd);
      ::close(fd);
    }
  }
  std::filesystem::rename(tmp, path_);
  ::close(fd_);
  open();
}

// Study

namespace {

std::string new_token() {
  std::random_device rd;
  return fmt::format("{:08x}{:08x}{:08x}{:08x}", rd(), rd(), rd(), rd());
}

std::int64_t remaining_seconds(Timestamp deadline, Timestamp now) {
  if (now >= deadline) return 0;
  return std::chrono::duration_cast<std::chrono::seconds>(deadline - now).count();
}

json session_entry(const Session& s) {
  return {{"type", "session"},
          {"token", s.token},
          {"rater_id", s.rater_id},
          {"started_at", format_timestamp(s.started_at)},
          {"deadline", format_timestamp(s.deadline)}};
}

Timestamp timestamp_field(const json& j, const char* name) {
  const auto t = parse_timestamp(j.at(name).get<std::string>());
  if (!t) throw Error(fmt::format("journal: bad timestamp in '{}'", name));
  return *t;
}

}  // namespace

Study::Study(std::vector<PreparedDocument> documents, SessionConfig cfg,
             std::filesystem::path journal_path, Clock clock)
    : cfg_(std::move(cfg)),
      clock_(std::move(clock)),
      documents_(std::move(documents)),
      journal_(std::move(journal_path)) {
  cfg_.check();
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    if (!doc_by_rater_.emplace(documents_[i].rater_id, i).second) {
      throw PreconditionError(
          fmt::format("two prepared documents for rater '{}'", documents_[i].rater_id));
    }
  }
  replay();
}

void Study::replay() {
  for (const auto& e : journal_.read_all()) {
    const auto type = e.value("type", std::string{});
    if (type == "session") {
      const auto rater = e.at("rater_id").get<std::string>();
      const auto doc = doc_by_rater_.find(rater);
      if (doc == doc_by_rater_.end()) {
        throw Error(fmt::format("journal names rater '{}' with no prepared document", rater));
      }
      SessionData data;
      data.document = &documents_[doc->second];
      data.session.token = e.at("token").get<std::string>();
      data.session.rater_id = rater;
      data.session.started_at = timestamp_field(e, "started_at");
      data.session.deadline = timestamp_field(e, "deadline");
      data.session.total = data.document->rows.size();
      data.submitted.assign(data.session.total, false);
      session_by_rater_[rater] = data.session.token;
      sessions_[data.session.token] = std::move(data);
    } else if (type == "submission") {
      const auto status = e.at("status").get<std::string>();
      if (status == "late") {
        late_.push_back(e);
        continue;
      }
      if (status != "accepted") continue;
      auto record = record_from_json(e.at("record"));
      const auto it = sessions_.find(e.at("token").get<std::string>());
      if (it != sessions_.end()) {
        const auto index = e.at("index").get<std::size_t>();
        if (index < it->second.submitted.size()) it->second.submitted[index] = true;
      }
      const auto [slot, inserted] =
          record_by_segment_.try_emplace(record.segment_id, records_.size());
      if (inserted) {
        records_.push_back(std::move(record));
      } else {
        records_[slot->second] = std::move(record);
      }
    }
  }
  for (auto& [token, data] : sessions_) {
    auto& s = data.session;
    s.submitted = static_cast<std::size_t>(
        std::count(data.submitted.begin(), data.submitted.end(), true));
    s.cursor = static_cast<std::size_t>(
        std::find(data.submitted.begin(), data.submitted.end(), false) -
        data.submitted.begin());
    if (s.submitted == s.total) s.state = SessionState::finished;
  }
}

void Study::append(const json& entry) {
  journal_.append(entry);
  ++appended_since_compaction_;
}

void Study::maybe_compact() {
  if (cfg_.compact_every > 0 && appended_since_compaction_ >= cfg_.compact_every) {
    journal_.rewrite(snapshot_entries());
    appended_since_compaction_ = 0;
  }
}

std::vector<json> Study::snapshot_entries() const {
  std::vector<json> entries;
  std::unordered_map<std::string, std::string> token_by_rater;
  for (const auto& [token, data] : sessions_) {
    entries.push_back(session_entry(data.session));
    token_by_rater[data.session.rater_id] = token;
  }
  for (const auto& r : records_) {
    const auto& data = sessions_.at(token_by_rater.at(r.rater_id));
    std::size_t index = 0;
    while (index < data.document->rows.size() &&
           data.document->rows[index].segment_id != r.segment_id) {
      ++index;
    }
    entries.push_back({{"type", "submission"},
                       {"status", "accepted"},
                       {"token", data.session.token},
                       {"index", index},
                       {"record", blindeval::to_json(r)}});
  }
  for (const auto& e : late_) entries.push_back(e);
  return entries;
}

void Study::compact() {
  std::lock_guard lock(mutex_);
  journal_.rewrite(snapshot_entries());
  appended_since_compaction_ = 0;
}

Study::SessionData& Study::find_session(const std::string& token) {
  const auto it = sessions_.find(token);
  if (it == sessions_.end()) throw ServiceError(ServiceError::Code::not_found, "unknown session");
  return it->second;
}

void Study::refresh(SessionData& data, Timestamp now) {
  auto& s = data.session;
  if (s.state == SessionState::finished) return;
  if (data.expired_latched || now >= s.deadline) {
    data.expired_latched = true;
    s.state = SessionState::expired;
  }
}

Session Study::create_session(const std::string& rater_id) {
  std::lock_guard lock(mutex_);
  const auto doc = doc_by_rater_.find(rater_id);
  if (doc == doc_by_rater_.end()) {
    throw ServiceError(ServiceError::Code::not_found,
                       fmt::format("no prepared document for rater '{}'", rater_id));
  }
  if (session_by_rater_.contains(rater_id)) {
    throw ServiceError(ServiceError::Code::conflict,
                       fmt::format("rater '{}' already has a session", rater_id));
  }
  SessionData data;
  data.document = &documents_[doc->second];
  auto& s = data.session;
  s.token = new_token();
  while (sessions_.contains(s.token)) s.token = new_token();
  s.rater_id = rater_id;
  s.started_at = clock_();
  s.deadline = s.started_at + std::chrono::minutes(cfg_.deadline_minutes);
  s.total = data.document->rows.size();
  data.submitted.assign(s.total, false);
  if (s.total == 0) s.state = SessionState::finished;

  append(session_entry(s));
  session_by_rater_[rater_id] = s.token;
  Session copy = s;
  sessions_[s.token] = std::move(data);
  maybe_compact();
  return copy;
}

Session Study::status(const std::string& token) {
  std::lock_guard lock(mutex_);
  auto& data = find_session(token);
  refresh(data, clock_());
  return data.session;
}

TaskPayload Study::get_task(const std::string& token, std::size_t index) {
  std::lock_guard lock(mutex_);
  auto& data = find_session(token);
  const Timestamp now = clock_();
  refresh(data, now);
  if (data.session.state == SessionState::expired) {
    throw ServiceError(ServiceError::Code::expired, "session expired");
  }
  if (index >= data.document->rows.size()) {
    throw ServiceError(ServiceError::Code::not_found,
                       fmt::format("task index {} out of range", index));
  }
  const auto& row = data.document->rows[index];
  return {row.segment_id, row.source, row.target, index + 1, data.document->rows.size(),
          remaining_seconds(data.session.deadline, now)};
}

Acknowledgement Study::submit(const std::string& token, std::size_t index,
                              const Submission& sub) {
  std::lock_guard lock(mutex_);
  auto& data = find_session(token);
  const Timestamp now = clock_();
  refresh(data, now);
  auto& s = data.session;
  if (index >= data.document->rows.size()) {
    throw ServiceError(ServiceError::Code::not_found,
                       fmt::format("task index {} out of range", index));
  }
  const auto& row = data.document->rows[index];
  if (sub.segment_id && *sub.segment_id != row.segment_id) {
    throw ServiceError(ServiceError::Code::forbidden,
                       fmt::format("segment '{}' does not belong to this task", *sub.segment_id));
  }
  if (!text::is_valid_utf8(sub.postedit) ||
      (sub.comment && !text::is_valid_utf8(*sub.comment))) {
    throw ServiceError(ServiceError::Code::bad_request, "invalid UTF-8");
  }

  AnnotationRecord record;
  record.segment_id = row.segment_id;
  record.rater_id = s.rater_id;
  record.target = row.target;
  record.postedited = text::nfc(sub.postedit);
  record.flags = sub.flags;
  record.comment = sub.comment;
  record.submitted_at = now;

  if (s.state == SessionState::expired) {
    record.completed = false;
    json entry = {{"type", "submission"},
                  {"status", "late"},
                  {"token", token},
                  {"index", index},
                  {"record", blindeval::to_json(record)}};
    append(entry);
    late_.push_back(std::move(entry));
    maybe_compact();
    throw ServiceError(ServiceError::Code::expired, "session expired; submission recorded as late");
  }
  if (s.state == SessionState::finished) {
    throw ServiceError(ServiceError::Code::conflict, "session already finished");
  }
  if (record.postedited.empty()) {
    throw ServiceError(ServiceError::Code::bad_request, "postedit must not be empty");
  }

  record.completed = true;
  append({{"type", "submission"},
          {"status", "accepted"},
          {"token", token},
          {"index", index},
          {"record", blindeval::to_json(record)}});

  const auto [slot, inserted] = record_by_segment_.try_emplace(record.segment_id, records_.size());
  if (inserted) {
    records_.push_back(record);
  } else {
    records_[slot->second] = record;
  }
  if (!data.submitted[index]) {
    data.submitted[index] = true;
    ++s.submitted;
  }
  while (s.cursor < data.submitted.size() && data.submitted[s.cursor]) ++s.cursor;
  if (s.submitted == s.total) s.state = SessionState::finished;
  maybe_compact();
  return {std::move(record), s};
}

std::vector<AnnotationRecord> Study::export_annotations() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t Study::late_submissions() const {
  std::lock_guard lock(mutex_);
  return late_.size();
}

json to_json(const TaskPayload& t) {
  return {{"segment_id", t.segment_id},     {"source", t.source},
          {"target", t.target},             {"position", t.position},
          {"total", t.total},               {"remaining_seconds", t.remaining_seconds}};
}

json to_json(const Session& s) {
  return {{"token", s.token},
          {"rater_id", s.rater_id},
          {"state", std::string(to_string(s.state))},
          {"started_at", format_timestamp(s.started_at)},
          {"deadline", format_timestamp(s.deadline)},
          {"cursor", s.cursor},
          {"total", s.total},
          {"submitted", s.submitted}};
}

}  // namespace blindeval::service
