#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "blindeval/annotation.hpp"
#include "blindeval/corpus.hpp"

namespace blindeval {

enum class BalanceScope { per_section, whole_document };

std::string_view to_string(BalanceScope scope);
std::optional<BalanceScope> parse_balance_scope(std::string_view text);

struct PreparationConfig {
  std::uint64_t seed = 0;
  std::vector<std::string> raters;
  std::size_t segments_per_rater = 150;
  BalanceScope balance_scope = BalanceScope::per_section;

  /// Throws PreconditionError when the invariants do not hold.
  void check() const;
};

struct RaterSection {
  std::string rater_id;
  std::size_t start_index = 0;
  std::size_t count = 0;

  friend bool operator==(const RaterSection&, const RaterSection&) = default;
};

/// One row as shown to a rater. Carries no origin information.
struct PreparedRow {
  std::string segment_id;
  std::string source;
  std::string target;

  friend bool operator==(const PreparedRow&, const PreparedRow&) = default;
};

struct PreparedDocument {
  std::string rater_id;
  std::vector<PreparedRow> rows;

  friend bool operator==(const PreparedDocument&, const PreparedDocument&) = default;
};

struct KeyEntry {
  std::string segment_id;
  Origin origin = Origin::HT;
  std::string rater_id;

  friend bool operator==(const KeyEntry&, const KeyEntry&) = default;
};

/// Segment-to-origin mapping kept apart from everything raters see.
class BlindingKey {
 public:
  BlindingKey() = default;
  BlindingKey(std::uint64_t seed, LanguagePair language_pair, BalanceScope scope);

  std::uint64_t seed() const { return seed_; }
  const LanguagePair& language_pair() const { return language_pair_; }
  BalanceScope balance_scope() const { return scope_; }

  /// Throws PreconditionError on a duplicate segment id.
  void add(KeyEntry entry);
  const KeyEntry* find(const std::string& segment_id) const;
  const std::vector<KeyEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t count(Origin origin) const;

  friend bool operator==(const BlindingKey& a, const BlindingKey& b) {
    return a.seed_ == b.seed_ && a.language_pair_ == b.language_pair_ &&
           a.scope_ == b.scope_ && a.entries_ == b.entries_;
  }

 private:
  std::uint64_t seed_ = 0;
  LanguagePair language_pair_;
  BalanceScope scope_ = BalanceScope::per_section;
  std::vector<KeyEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace interleaver {

/// Consecutive, disjoint sections of `segments_per_rater` segments, one per
/// rater, assigned in document order.
std::vector<RaterSection> partition_sections(const AlignedDocument& doc,
                                             const PreparationConfig& cfg);

struct Prepared {
  std::vector<PreparedDocument> documents;
  BlindingKey key;
};

/// Chooses HT or MT for every segment of every section. Within each balance
/// scope the origins are a seeded shuffle of a half-HT/half-MT label vector;
/// on odd sizes the majority side is drawn from the same stream.
Prepared interleave(const AlignedDocument& doc, const std::vector<RaterSection>& sections,
                    const PreparationConfig& cfg);

/// Joins records with the key. Throws UnknownSegmentError for ids missing from
/// the key and PreconditionError on a rater mismatch. Records that carry no
/// target text get it from `corpus` when one is given.
EvalDataset unblind(const std::vector<AnnotationRecord>& records, const BlindingKey& key,
                    const AlignedDocument* corpus = nullptr);

// File formats.

/// id, source, target, postedit, terminology, omission, typography, comment;
/// the last five columns empty.
void write_prepared_tsv(const PreparedDocument& doc, std::ostream& out);
PreparedDocument read_prepared_tsv(std::istream& in, std::string rater_id);

void write_key_tsv(const BlindingKey& key, std::ostream& out);
BlindingKey read_key_tsv(std::istream& in);
BlindingKey read_key_file(const std::filesystem::path& path);

}  // namespace interleaver
}  // namespace blindeval
