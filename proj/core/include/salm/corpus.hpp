#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace salm {

/// Calendar date, no timezone. Comparisons are lexicographic (y, m, d).
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;

  /// Days since 1970-01-01 (civil calendar, negative before the epoch).
  int64_t to_days() const;
  static Date from_days(int64_t days);

  std::string to_string() const;             // ISO-8601 "YYYY-MM-DD"
  static Date parse(std::string_view iso);   // throws ParseError
  bool valid() const;
};

enum class SampleKind { Description, Payload };
enum class Provenance { Real, Synthetic, Template };

std::string to_string(SampleKind kind);
SampleKind sample_kind_from_string(std::string_view s);
std::string to_string(Provenance p);

/// One vulnerability class of the taxonomy. generic_label is the short
/// prototype text encoded by the text encoder at inference time.
struct VulnClass {
  int id = 0;  // dense, 1-based
  std::string name;
  std::string generic_label;
};

/// The 15-class threat taxonomy with its generic prototype labels.
const std::vector<VulnClass>& default_classes();

struct Sample {
  std::string id;
  SampleKind kind = SampleKind::Description;
  std::string text;  // raw bytes for payloads, UTF-8 for descriptions
  int class_id = 0;
  std::optional<Date> published;
  std::string threat_id;  // descriptions are shared across payload variants
  bool truncated = false;
};

struct Corpus {
  std::vector<VulnClass> classes;
  std::vector<Sample> samples;
  Provenance provenance = Provenance::Real;

  const VulnClass* class_by_id(int id) const;
  /// Case-insensitive name lookup.
  const VulnClass* class_by_name(std::string_view name) const;
  const Sample* sample_by_id(std::string_view id) const;

  size_t count_kind(SampleKind kind) const;
  /// class_id -> sample count, optionally restricted to one kind.
  std::map<int, size_t> class_histogram(std::optional<SampleKind> kind = std::nullopt) const;

  /// Checks the structural invariants (dense class ids, unique sample ids,
  /// valid class references, non-empty texts). Throws ValidationError.
  void validate(size_t max_payload_bytes = 16384) const;
};

enum class CorpusFormat { JsonArray, Jsonl };

struct LoadOptions {
  bool strict = false;                   // unknown category -> error instead of rejection
  size_t max_payload_bytes = 16384;      // longer payloads are truncated, flagged
  std::vector<VulnClass> classes;        // empty -> default_classes()
};

struct Rejection {
  size_t record_index = 0;  // 0-based position in the file
  std::string category;
  std::string reason;
};

struct LoadResult {
  Corpus corpus;
  std::vector<Rejection> rejections;
};

/// Load a corpus from the synthetic JSON-array format ({"Category",
/// "HTTP Payload"} records) or the internal JSONL schema (one sample object
/// per line: id, kind, text | text_b64, class, published, threat_id).
LoadResult load_corpus(const std::filesystem::path& path, CorpusFormat format,
                       const LoadOptions& options = {});

/// Write the internal JSONL schema. Payload bytes that are not valid UTF-8
/// are stored base64-encoded under "text_b64".
void save_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);

/// train = published strictly before cutoff, test = on/after. Every sample
/// needs a date; the error names the offending sample.
std::pair<Corpus, Corpus> temporal_split(const Corpus& corpus, Date cutoff);

struct SplitResult {
  Corpus train;
  Corpus test;
  std::vector<std::string> warnings;
};

/// Seeded per-class split; per-class test count is round(fraction * n).
/// Classes with fewer than 2 samples go wholly to train with a warning.
SplitResult stratified_split(const Corpus& corpus, double test_fraction, uint64_t seed);

/// Contrastive description triplet: anchor/positive share a class, the
/// negative does not, anchor != positive.
struct Triplet {
  std::string anchor_id;
  std::string positive_id;
  std::string negative_id;
};

/// Draw `count` description triplets. Anchor classes are sampled uniformly
/// over classes (not samples) to counter class imbalance; deterministic per
/// seed.
std::vector<Triplet> sample_triplets(const Corpus& corpus, size_t count, uint64_t seed);

/// Description/payload pair for cross-modal alignment; members share both
/// threat_id and class_id.
struct AlignPair {
  std::string description_id;
  std::string payload_id;
};

struct PairIssue {
  std::string payload_id;
  std::string reason;
};

struct PairResult {
  std::vector<AlignPair> pairs;
  std::vector<PairIssue> report;  // orphans and mismatches, never silently dropped
};

/// One pair per payload, joined to its threat's description (first in corpus
/// order when a threat has several).
PairResult build_pairs(const Corpus& corpus);

/// Split manifests: JSONL where each line is one sample id as a JSON string.
void write_manifest(const std::vector<std::string>& sample_ids, const std::filesystem::path& path);
std::vector<std::string> read_manifest(const std::filesystem::path& path);

/// Subset of `corpus` containing exactly the listed samples, in corpus order.
Corpus select_by_ids(const Corpus& corpus, const std::vector<std::string>& ids);

}  // namespace salm
