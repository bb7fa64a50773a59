#include "salm/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "salm/errors.hpp"
#include "salm/rng.hpp"

namespace salm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Date

int64_t Date::to_days() const {
  // Civil-calendar day count (Howard Hinnant's days_from_civil).
  int y = year;
  const int m = month;
  const int d = day;
  y -= m <= 2;
  const int era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return static_cast<int64_t>(era) * 146097 + static_cast<int64_t>(doe) - 719468;
}

Date Date::from_days(int64_t days) {
  int64_t z = days + 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t y = static_cast<int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

bool Date::valid() const {
  if (month < 1 || month > 12 || day < 1) return false;
  static const int lengths[13] = {0, 31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int max_day = lengths[month];
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  if (month == 2 && leap) max_day = 29;
  return day <= max_day;
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
  return buf;
}

Date Date::parse(std::string_view iso) {
  Date d;
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw ParseError("invalid ISO-8601 date '" + std::string(iso) + "' (expected YYYY-MM-DD)");
  }
  auto read = [&](size_t pos, size_t len, int& out) {
    auto first = iso.data() + pos;
    auto [p, ec] = std::from_chars(first, first + len, out);
    if (ec != std::errc() || p != first + len) {
      throw ParseError("invalid ISO-8601 date '" + std::string(iso) + "'");
    }
  };
  read(0, 4, d.year);
  read(5, 2, d.month);
  read(8, 2, d.day);
  if (!d.valid()) throw ParseError("invalid calendar date '" + std::string(iso) + "'");
  return d;
}

// ---------------------------------------------------------------------------
// Enums

std::string to_string(SampleKind kind) {
  return kind == SampleKind::Description ? "description" : "payload";
}

SampleKind sample_kind_from_string(std::string_view s) {
  if (s == "description") return SampleKind::Description;
  if (s == "payload") return SampleKind::Payload;
  throw ParseError("unknown sample kind '" + std::string(s) + "'");
}

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Real: return "real";
    case Provenance::Synthetic: return "synthetic";
    case Provenance::Template: return "template";
  }
  return "real";
}

// ---------------------------------------------------------------------------
// Taxonomy

const std::vector<VulnClass>& default_classes() {
  static const std::vector<VulnClass> classes = {
      {1, "Backdoor",
       "A hidden entry point allowing unauthorized system access. Data breaches and loss of "
       "control."},
      {2, "Botnet",
       "A network of compromised computers controlled remotely. Large-scale cyber-attacks and "
       "unauthorized system exploitation."},
      {3, "CGI",
       "A flaw in web applications enabling unauthorized actions. Data theft, code execution, "
       "and service disruption."},
      {4, "Code-execution",
       "A security flaw allowing arbitrary code execution. Unauthorized system control and "
       "potential data breaches."},
      {5, "Dir-traversal",
       "A security issue enabling attackers to retrieve sensitive files. Unauthorized file "
       "access and system compromise."},
      {6, "DoS",
       "An attack aimed at rendering a system unusable. Network disruption and resource "
       "exhaustion."},
      {7, "Info-Disclosure",
       "A weakness that allows unauthorized access to internal data. May lead to identity theft "
       "or system mapping."},
      {8, "Injection",
       "A vulnerability that lets attackers inject malicious code. Unauthorized database "
       "manipulation and system compromise."},
      {9, "Overflow",
       "A memory-related flaw causing crashes or unauthorized access. Unexpected execution paths "
       "and system instability."},
      {10, "Remote-File-Inclusion",
       "A vulnerability permitting attackers to include external malicious files. Unauthorized "
       "remote file execution and system compromise."},
      {11, "Scanner",
       "Automated tools probing for system vulnerabilities. Potential exposure of security gaps "
       "exploitable by attackers."},
      {12, "Trojan",
       "Malware disguised as legitimate software for system compromise. Unauthorized access and "
       "data theft."},
      {13, "Webshell",
       "A hidden backdoor allowing remote system control. Data manipulation and complete system "
       "takeover."},
      {14, "Worm",
       "A self-propagating malware spreading without human intervention. Network-wide infection "
       "and resource depletion."},
      {15, "XSS",
       "A vulnerability allowing unauthorized script execution in web applications. Data theft "
       "and session hijacking."},
  };
  return classes;
}

// ---------------------------------------------------------------------------
// Corpus

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

const VulnClass* Corpus::class_by_id(int id) const {
  for (const auto& c : classes) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

const VulnClass* Corpus::class_by_name(std::string_view name) const {
  const std::string needle = lower(name);
  for (const auto& c : classes) {
    if (lower(c.name) == needle) return &c;
  }
  return nullptr;
}

const Sample* Corpus::sample_by_id(std::string_view id) const {
  for (const auto& s : samples) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

size_t Corpus::count_kind(SampleKind kind) const {
  return static_cast<size_t>(std::count_if(samples.begin(), samples.end(),
                                           [&](const Sample& s) { return s.kind == kind; }));
}

std::map<int, size_t> Corpus::class_histogram(std::optional<SampleKind> kind) const {
  std::map<int, size_t> hist;
  for (const auto& c : classes) hist[c.id] = 0;
  for (const auto& s : samples) {
    if (!kind || s.kind == *kind) hist[s.class_id]++;
  }
  return hist;
}

void Corpus::validate(size_t max_payload_bytes) const {
  std::set<int> ids;
  std::set<std::string> names;
  for (const auto& c : classes) {
    if (!ids.insert(c.id).second) {
      throw ValidationError("duplicate class id " + std::to_string(c.id));
    }
    if (!names.insert(lower(c.name)).second) {
      throw ValidationError("duplicate class name '" + c.name + "'");
    }
    if (c.generic_label.empty()) {
      throw ValidationError("class '" + c.name + "' has an empty generic label");
    }
  }
  for (int expect = 1; expect <= static_cast<int>(classes.size()); ++expect) {
    if (!ids.count(expect)) {
      throw ValidationError("class ids are not dense: missing id " + std::to_string(expect));
    }
  }
  std::unordered_set<std::string> sample_ids;
  for (const auto& s : samples) {
    if (!sample_ids.insert(s.id).second) {
      throw ValidationError("duplicate sample id '" + s.id + "'");
    }
    if (s.text.empty()) throw ValidationError("sample '" + s.id + "' has empty text");
    if (!ids.count(s.class_id)) {
      throw ValidationError("sample '" + s.id + "' references unknown class id " +
                            std::to_string(s.class_id));
    }
    if (s.kind == SampleKind::Payload && s.text.size() > max_payload_bytes) {
      throw ValidationError("payload '" + s.id + "' exceeds the byte limit");
    }
  }
}

// ---------------------------------------------------------------------------
// base64 + UTF-8 helpers for the JSONL schema

namespace {

const char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 3 <= bytes.size()) {
    const uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back(kB64Alphabet[v & 63]);
    i += 3;
  }
  const size_t rem = bytes.size() - i;
  if (rem == 1) {
    const uint32_t v = static_cast<unsigned char>(bytes[i]) << 16;
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out += "==";
  } else if (rem == 2) {
    const uint32_t v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out.push_back(kB64Alphabet[(v >> 18) & 63]);
    out.push_back(kB64Alphabet[(v >> 12) & 63]);
    out.push_back(kB64Alphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::string base64_decode(std::string_view text) {
  std::string out;
  uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = b64_value(c);
    if (v < 0) throw ParseError("invalid base64 payload text");
    acc = (acc << 6) | static_cast<uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((acc >> bits) & 0xff));
    }
  }
  return out;
}

bool is_valid_utf8(std::string_view s) {
  size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = s[i];
    size_t len;
    if (c < 0x80) {
      len = 1;
    } else if ((c >> 5) == 0x6) {
      len = 2;
    } else if ((c >> 4) == 0xe) {
      len = 3;
    } else if ((c >> 3) == 0x1e) {
      len = 4;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    // Reject overlong encodings and out-of-range code points.
    if (len == 2 && c < 0xc2) return false;
    if (len == 3 && c == 0xe0 && static_cast<unsigned char>(s[i + 1]) < 0xa0) return false;
    if (len == 4 && (c > 0xf4 || (c == 0xf0 && static_cast<unsigned char>(s[i + 1]) < 0x90))) {
      return false;
    }
    i += len;
  }
  return true;
}

size_t line_of_offset(const std::string& text, size_t offset) {
  size_t line = 1;
  for (size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Loading

namespace {

struct ClassLookup {
  std::unordered_map<std::string, const VulnClass*> by_lower_name;

  explicit ClassLookup(const std::vector<VulnClass>& classes) {
    for (const auto& c : classes) by_lower_name[lower(c.name)] = &c;
  }
  const VulnClass* find(std::string_view name) const {
    auto it = by_lower_name.find(lower(name));
    return it == by_lower_name.end() ? nullptr : it->second;
  }
};

void truncate_payload(Sample& s, size_t max_bytes) {
  if (s.kind == SampleKind::Payload && s.text.size() > max_bytes) {
    s.text.resize(max_bytes);
    s.truncated = true;
  }
}

Sample sample_from_jsonl(const json& rec, const ClassLookup& lookup) {
  Sample s;
  s.id = rec.at("id").get<std::string>();
  s.kind = sample_kind_from_string(rec.at("kind").get<std::string>());
  if (rec.contains("text_b64")) {
    s.text = base64_decode(rec.at("text_b64").get<std::string>());
  } else {
    s.text = rec.at("text").get<std::string>();
  }
  const auto cls = rec.at("class").get<std::string>();
  const VulnClass* c = lookup.find(cls);
  if (c == nullptr) throw ValidationError("unknown category '" + cls + "'");
  s.class_id = c->id;
  if (rec.contains("published") && !rec.at("published").is_null()) {
    s.published = Date::parse(rec.at("published").get<std::string>());
  }
  s.threat_id = rec.value("threat_id", s.id);
  s.truncated = rec.value("truncated", false);
  return s;
}

}  // namespace

LoadResult load_corpus(const std::filesystem::path& path, CorpusFormat format,
                       const LoadOptions& options) {
  LoadResult result;
  result.corpus.classes = options.classes.empty() ? default_classes() : options.classes;
  const ClassLookup lookup(result.corpus.classes);

  const std::string content = read_file(path);

  if (format == CorpusFormat::JsonArray) {
    json root;
    try {
      root = json::parse(content);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_of_offset(content, e.byte)) +
                       ": " + e.what());
    }
    if (!root.is_array()) {
      throw ParseError(path.string() + ": expected a JSON array of records");
    }
    result.corpus.provenance = Provenance::Synthetic;
    size_t index = 0;
    for (const auto& rec : root) {
      auto reject = [&](std::string category, std::string reason) {
        if (options.strict) {
          throw ValidationError(path.string() + ": record " + std::to_string(index) + ": " +
                                reason);
        }
        result.rejections.push_back({index, std::move(category), std::move(reason)});
      };
      if (!rec.is_object() || !rec.contains("Category") || !rec.at("Category").is_string()) {
        reject("", "missing 'Category' field");
        ++index;
        continue;
      }
      const auto category = rec.at("Category").get<std::string>();
      if (!rec.contains("HTTP Payload") || !rec.at("HTTP Payload").is_string()) {
        reject(category, "missing 'HTTP Payload' field");
        ++index;
        continue;
      }
      const VulnClass* c = lookup.find(category);
      if (c == nullptr) {
        reject(category, "unknown category '" + category + "'");
        ++index;
        continue;
      }
      const auto payload = rec.at("HTTP Payload").get<std::string>();
      if (payload.empty()) {
        reject(category, "empty 'HTTP Payload'");
        ++index;
        continue;
      }
      Sample s;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "syn-%06zu", index);
      s.id = buf;
      s.kind = SampleKind::Payload;
      s.text = payload;
      s.class_id = c->id;
      s.threat_id = s.id;
      truncate_payload(s, options.max_payload_bytes);
      result.corpus.samples.push_back(std::move(s));
      ++index;
    }
  } else {
    result.corpus.provenance = Provenance::Real;
    size_t line_no = 0;
    size_t start = 0;
    while (start <= content.size()) {
      size_t end = content.find('\n', start);
      if (end == std::string::npos) end = content.size();
      std::string_view line(content.data() + start, end - start);
      ++line_no;
      start = end + 1;
      if (line.empty() ||
          line.find_first_not_of(" \t\r") == std::string_view::npos) {
        if (end == content.size()) break;
        continue;
      }
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      try {
        Sample s = sample_from_jsonl(rec, lookup);
        truncate_payload(s, options.max_payload_bytes);
        result.corpus.samples.push_back(std::move(s));
      } catch (const ValidationError& e) {
        if (options.strict) {
          throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        result.rejections.push_back(
            {line_no - 1, rec.value("class", std::string()), e.what()});
      }
      if (end == content.size()) break;
    }
  }

  result.corpus.validate(options.max_payload_bytes);
  return result;
}

void save_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& s : corpus.samples) {
    const VulnClass* c = corpus.class_by_id(s.class_id);
    json rec;
    rec["id"] = s.id;
    rec["kind"] = to_string(s.kind);
    if (is_valid_utf8(s.text)) {
      rec["text"] = s.text;
    } else {
      rec["text_b64"] = base64_encode(s.text);
    }
    rec["class"] = c ? c->name : std::to_string(s.class_id);
    if (s.published) rec["published"] = s.published->to_string();
    rec["threat_id"] = s.threat_id;
    if (s.truncated) rec["truncated"] = true;
    out << rec.dump() << "\n";
  }
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Splits

namespace {

Corpus subset(const Corpus& corpus, const std::vector<bool>& keep) {
  Corpus out;
  out.classes = corpus.classes;
  out.provenance = corpus.provenance;
  for (size_t i = 0; i < corpus.samples.size(); ++i) {
    if (keep[i]) out.samples.push_back(corpus.samples[i]);
  }
  return out;
}

}  // namespace

std::pair<Corpus, Corpus> temporal_split(const Corpus& corpus, Date cutoff) {
  std::vector<bool> in_train(corpus.samples.size(), false);
  for (size_t i = 0; i < corpus.samples.size(); ++i) {
    const Sample& s = corpus.samples[i];
    if (!s.published) {
      throw ValidationError("temporal_split: sample '" + s.id + "' has no published date");
    }
    in_train[i] = *s.published < cutoff;
  }
  std::vector<bool> in_test(corpus.samples.size());
  for (size_t i = 0; i < in_train.size(); ++i) in_test[i] = !in_train[i];
  return {subset(corpus, in_train), subset(corpus, in_test)};
}

SplitResult stratified_split(const Corpus& corpus, double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("stratified_split: test_fraction must be in (0, 1)");
  }
  SplitResult result;
  std::vector<bool> in_test(corpus.samples.size(), false);

  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < corpus.samples.size(); ++i) {
    by_class[corpus.samples[i].class_id].push_back(i);
  }

  for (auto& [class_id, indices] : by_class) {
    if (indices.size() < 2) {
      const VulnClass* c = corpus.class_by_id(class_id);
      result.warnings.push_back("class '" + (c ? c->name : std::to_string(class_id)) +
                                "' has fewer than 2 samples; kept wholly in train");
      continue;
    }
    const auto n_test = static_cast<size_t>(
        std::llround(test_fraction * static_cast<double>(indices.size())));
    Rng rng(Rng::derive(seed, static_cast<uint64_t>(class_id)));
    rng.shuffle(indices);
    for (size_t k = 0; k < n_test && k < indices.size(); ++k) in_test[indices[k]] = true;
  }

  std::vector<bool> in_train(corpus.samples.size());
  for (size_t i = 0; i < in_test.size(); ++i) in_train[i] = !in_test[i];
  result.train = subset(corpus, in_train);
  result.test = subset(corpus, in_test);
  return result;
}

// ---------------------------------------------------------------------------
// Triplets and pairs

std::vector<Triplet> sample_triplets(const Corpus& corpus, size_t count, uint64_t seed) {
  std::map<int, std::vector<size_t>> descs_by_class;
  for (size_t i = 0; i < corpus.samples.size(); ++i) {
    if (corpus.samples[i].kind == SampleKind::Description) {
      descs_by_class[corpus.samples[i].class_id].push_back(i);
    }
  }

  std::vector<int> anchor_classes;   // classes with >= 2 descriptions
  std::vector<int> negative_classes; // classes with >= 1 description
  for (const auto& [class_id, indices] : descs_by_class) {
    if (indices.size() >= 2) anchor_classes.push_back(class_id);
    if (!indices.empty()) negative_classes.push_back(class_id);
  }
  if (anchor_classes.empty() || negative_classes.size() < 2) {
    throw ValidationError(
        "sample_triplets: need >= 2 descriptions in one class and >= 1 description in another");
  }

  Rng rng(seed);
  std::vector<Triplet> out;
  out.reserve(count);
  for (size_t t = 0; t < count; ++t) {
    const int anchor_class = anchor_classes[rng.index(anchor_classes.size())];
    const auto& pool = descs_by_class[anchor_class];
    const size_t ai = rng.index(pool.size());
    size_t pi = rng.index(pool.size() - 1);
    if (pi >= ai) ++pi;

    // uniform over the other classes that have at least one description
    size_t nc = rng.index(negative_classes.size() - 1);
    const auto anchor_pos = static_cast<size_t>(
        std::find(negative_classes.begin(), negative_classes.end(), anchor_class) -
        negative_classes.begin());
    if (nc >= anchor_pos) ++nc;
    const auto& neg_pool = descs_by_class[negative_classes[nc]];
    const size_t ni = rng.index(neg_pool.size());

    out.push_back({corpus.samples[pool[ai]].id, corpus.samples[pool[pi]].id,
                   corpus.samples[neg_pool[ni]].id});
  }
  return out;
}

PairResult build_pairs(const Corpus& corpus) {
  PairResult result;
  std::unordered_map<std::string, const Sample*> desc_by_threat;
  for (const auto& s : corpus.samples) {
    if (s.kind == SampleKind::Description && !desc_by_threat.count(s.threat_id)) {
      desc_by_threat.emplace(s.threat_id, &s);
    }
  }
  for (const auto& s : corpus.samples) {
    if (s.kind != SampleKind::Payload) continue;
    auto it = desc_by_threat.find(s.threat_id);
    if (it == desc_by_threat.end()) {
      result.report.push_back({s.id, "no description for threat '" + s.threat_id + "'"});
      continue;
    }
    if (it->second->class_id != s.class_id) {
      result.report.push_back({s.id, "class mismatch with description '" + it->second->id + "'"});
      continue;
    }
    result.pairs.push_back({it->second->id, s.id});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Manifests

void write_manifest(const std::vector<std::string>& sample_ids,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (const auto& id : sample_ids) out << json(id).dump() << "\n";
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

std::vector<std::string> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::string> ids;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      ids.push_back(json::parse(line).get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return ids;
}

Corpus select_by_ids(const Corpus& corpus, const std::vector<std::string>& ids) {
  std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  std::vector<bool> keep(corpus.samples.size(), false);
  size_t found = 0;
  for (size_t i = 0; i < corpus.samples.size(); ++i) {
    if (wanted.count(corpus.samples[i].id)) {
      keep[i] = true;
      ++found;
    }
  }
  if (found != wanted.size()) {
    throw ValidationError("select_by_ids: " + std::to_string(wanted.size() - found) +
                          " manifest ids missing from the corpus");
  }
  return subset(corpus, keep);
}

}  // namespace salm
