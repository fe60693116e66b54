#pragma once

#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "blindeval/annotation.hpp"
#include "blindeval/error.hpp"
#include "blindeval/interleaver.hpp"

namespace blindeval::service {

struct SessionConfig {
  int deadline_minutes = 90;
  bool autosave = true;
  /// Shown to raters with their session, e.g. that the text is machine output.
  std::string instructions =
      "The translation below was produced by a machine translation system. "
      "Post-edit each segment: correct spelling and grammatical errors, but not style. "
      "Flag terminology, omission and typography errors in the original target segment.";
  /// Journal entries between automatic compactions; 0 disables them.
  std::size_t compact_every = 1000;

  void check() const;
};

enum class SessionState { active, expired, finished };
std::string_view to_string(SessionState state);

struct Session {
  std::string token;
  std::string rater_id;
  Timestamp started_at;
  Timestamp deadline;
  /// Index of the first row not yet submitted.
  std::size_t cursor = 0;
  SessionState state = SessionState::active;
  std::size_t total = 0;
  std::size_t submitted = 0;
};

struct TaskPayload {
  std::string segment_id;
  std::string source;
  std::string target;
  std::size_t position = 0;
  std::size_t total = 0;
  std::int64_t remaining_seconds = 0;
};

struct Submission {
  std::string postedit;
  ErrorFlags flags;
  std::optional<std::string> comment;
  /// When given, must name the segment at the submitted index.
  std::optional<std::string> segment_id;
};

struct Acknowledgement {
  AnnotationRecord record;
  Session session;
};

class ServiceError : public Error {
 public:
  enum class Code { not_found, conflict, expired, bad_request, forbidden };
  ServiceError(Code code, const std::string& message) : Error(message), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

using Clock = std::function<Timestamp()>;
Clock system_clock();

/// Append-only JSON-lines file. Each append is one write(2) of a complete
/// line on an O_APPEND descriptor, followed by fdatasync when durable. An
/// unterminated final line left by a crash is truncated on open.
class Journal {
 public:
  explicit Journal(std::filesystem::path path, bool durable = true);
  ~Journal();
  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;

  void append(const nlohmann::json& entry);
  /// Entries currently on disk.
  std::vector<nlohmann::json> read_all() const;
  /// Atomically replaces the file contents (temp file + rename).
  void rewrite(const std::vector<nlohmann::json>& entries);
  const std::filesystem::path& path() const { return path_; }

 private:
  void open();
  void drop_torn_tail();

  std::filesystem::path path_;
  bool durable_;
  int fd_ = -1;
};

/// Annotation collection for one study: the prepared documents, the
/// sessions, and the journal. Never holds origin information.
class Study {
 public:
  Study(std::vector<PreparedDocument> documents, SessionConfig cfg,
        std::filesystem::path journal_path, Clock clock = system_clock());

  const SessionConfig& config() const { return cfg_; }

  /// Throws ServiceError: not_found for an unknown rater, conflict when the
  /// rater already has a session.
  Session create_session(const std::string& rater_id);
  Session status(const std::string& token);
  TaskPayload get_task(const std::string& token, std::size_t index);
  /// Late submissions are journaled, then rejected with Code::expired.
  Acknowledgement submit(const std::string& token, std::size_t index, const Submission& s);

  /// Current records, one per submitted segment, in journal order.
  std::vector<AnnotationRecord> export_annotations() const;
  std::size_t late_submissions() const;
  void compact();

 private:
  struct SessionData {
    Session session;
    const PreparedDocument* document = nullptr;
    std::vector<bool> submitted;
    bool expired_latched = false;
  };

  SessionData& find_session(const std::string& token);
  void refresh(SessionData& s, Timestamp now);
  void replay();
  void append(const nlohmann::json& entry);
  void maybe_compact();
  std::vector<nlohmann::json> snapshot_entries() const;

  SessionConfig cfg_;
  Clock clock_;
  std::vector<PreparedDocument> documents_;
  std::unordered_map<std::string, std::size_t> doc_by_rater_;
  std::map<std::string, SessionData> sessions_;
  std::unordered_map<std::string, std::string> session_by_rater_;
  std::vector<AnnotationRecord> records_;
  std::unordered_map<std::string, std::size_t> record_by_segment_;
  std::vector<nlohmann::json> late_;
  Journal journal_;
  std::size_t appended_since_compaction_ = 0;
  mutable std::mutex mutex_;
};

nlohmann::json to_json(const TaskPayload& t);
nlohmann::json to_json(const Session& s);

struct ServerOptions {
  /// Bearer token required by GET /export; export is disabled when empty.
  std::string operator_token;
  /// Optional directory of static assets mounted at /.
  std::optional<std::filesystem::path> static_dir;
};

/// HTTP front end:
///   POST /sessions                       {"rater_id"}            -> session
///   GET  /sessions/{token}/tasks/{index}                         -> task
///   PUT  /sessions/{token}/tasks/{index} {"postedit","flags","comment"}
///   GET  /sessions/{token}/status
///   GET  /export                         (Authorization: Bearer <token>)
class HttpServer {
 public:
  HttpServer(Study& study, ServerOptions options);
  ~HttpServer();

  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it; call listen_after_bind next.
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace blindeval::service
