#pragma once

// Label sets, sample manifests, prediction files and answer normalization.
//
// Manifest file (UTF-8, one JSON object per line):
//   line 1   {"kind":"classification","labelset":{"name":..,"classes":[..],"includes_no_illusion":..}}
//            or {"kind":"char"}
//   line 2+  {"id":..,"image_path":..,"variant":..,"kind":..,"true_label":..,"split":..}
// Predictions file: one {"sample_id":..,"raw_text":..} object per line.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "illusory/error.hpp"

namespace illusory {

inline constexpr std::string_view kNoIllusion = "No illusion";

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return std::string(s.substr(first, last - first + 1));
}

/// Ordered class list. When includes_no_illusion is set, "No illusion" is the last class.
class LabelSet {
 public:
  LabelSet() = default;

  LabelSet(std::string name, std::vector<std::string> base_classes, bool includes_no_illusion)
      : name_(std::move(name)), classes_(std::move(base_classes)),
        includes_no_illusion_(includes_no_illusion) {
    if (classes_.empty()) throw Error(ErrorCode::UnknownLabel, "label set has no classes");
    std::set<std::string> seen;
    for (const auto& c : classes_) {
      if (c.empty() || c == kNoIllusion || !seen.insert(c).second) {
        throw Error(ErrorCode::UnknownLabel, "invalid or duplicate class '" + c + "'");
      }
    }
    if (includes_no_illusion_) classes_.emplace_back(kNoIllusion);
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  bool includes_no_illusion() const noexcept { return includes_no_illusion_; }
  std::size_t size() const noexcept { return classes_.size(); }

  /// Classes without the trailing "No illusion".
  std::vector<std::string> base_classes() const {
    std::vector<std::string> out = classes_;
    if (includes_no_illusion_) out.pop_back();
    return out;
  }

  bool contains(std::string_view label) const {
    return std::find(classes_.begin(), classes_.end(), label) != classes_.end();
  }

  LabelSet with_no_illusion(bool flag) const { return LabelSet(name_, base_classes(), flag); }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::string name_;
  std::vector<std::string> classes_;
  bool includes_no_illusion_ = false;
};

inline std::vector<LabelSet> builtin_labelsets() {
  const std::vector<std::string> mnist = {"digit 0", "digit 1", "digit 2", "digit 3", "digit 4",
                                          "digit 5", "digit 6", "digit 7", "digit 8", "digit 9"};
  const std::vector<std::string> fashion = {"t-shirt/top", "trouser", "pullover", "dress",
                                            "coat",        "sandal",  "shirt",    "sneaker",
                                            "bag",         "ankle boot"};
  const std::vector<std::string> animals = {"cat",   "dog",  "pigeon", "butterfly", "elephant",
                                            "horse", "deer", "snake",  "fish",      "rooster"};
  std::vector<LabelSet> sets;
  for (bool flag : {false, true}) {
    sets.emplace_back("IllusionMNIST", mnist, flag);
    sets.emplace_back("IllusionFashionMNIST", fashion, flag);
    sets.emplace_back("IllusionAnimals", animals, flag);
  }
  return sets;
}

inline std::optional<LabelSet> find_builtin_labelset(std::string_view name,
                                                     bool includes_no_illusion) {
  for (auto& s : builtin_labelsets()) {
    if (s.name() == name && s.includes_no_illusion() == includes_no_illusion) return s;
  }
  return std::nullopt;
}

enum class Variant { Raw, Illusion, Filtered };
enum class TaskKind { Classification, Char };
enum class Split { Train, Test };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Raw: return "raw";
    case Variant::Illusion: return "illusion";
    case Variant::Filtered: return "filtered";
  }
  return "raw";
}
inline std::string_view to_string(TaskKind k) {
  return k == TaskKind::Classification ? "classification" : "char";
}
inline std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

inline Variant parse_variant(std::string_view s) {
  if (s == "raw") return Variant::Raw;
  if (s == "illusion") return Variant::Illusion;
  if (s == "filtered") return Variant::Filtered;
  throw Error(ErrorCode::ParseError, "unknown variant '" + std::string(s) + "'");
}
inline TaskKind parse_kind(std::string_view s) {
  if (s == "classification") return TaskKind::Classification;
  if (s == "char") return TaskKind::Char;
  throw Error(ErrorCode::ParseError, "unknown kind '" + std::string(s) + "'");
}
inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw Error(ErrorCode::ParseError, "unknown split '" + std::string(s) + "'");
}

struct SampleRecord {
  std::string id;
  std::string image_path;
  Variant variant = Variant::Illusion;
  TaskKind kind = TaskKind::Classification;
  std::string true_label;
  Split split = Split::Test;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct Manifest {
  TaskKind kind = TaskKind::Classification;
  std::optional<LabelSet> labels;  // set iff kind == Classification
  std::vector<SampleRecord> records;

  std::size_t size() const noexcept { return records.size(); }

  const SampleRecord* find(std::string_view id) const {
    for (const auto& r : records) {
      if (r.id == id) return &r;
    }
    return nullptr;
  }

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Checks one record against the manifest's kind and label set.
inline void validate_record(const SampleRecord& r, const Manifest& m) {
  if (r.id.empty()) throw Error(ErrorCode::ParseError, "record with empty id");
  if (r.kind != m.kind) {
    throw Error(ErrorCode::KindMismatch, "record '" + r.id + "' kind differs from manifest");
  }
  if (r.kind == TaskKind::Classification) {
    if (!m.labels || !m.labels->contains(r.true_label)) {
      throw Error(ErrorCode::UnknownLabel,
                  "record '" + r.id + "' label '" + r.true_label + "' not in label set");
    }
  } else if (r.true_label != kNoIllusion &&
             (r.true_label.size() < 3 || r.true_label.size() > 5)) {
    throw Error(ErrorCode::UnknownLabel, "record '" + r.id + "' char label must have 3-5 characters");
  }
}

inline nlohmann::ordered_json manifest_header_json(const Manifest& m) {
  nlohmann::ordered_json h;
  h["kind"] = to_string(m.kind);
  if (m.labels) {
    h["labelset"] = {{"name", m.labels->name()},
                     {"classes", m.labels->base_classes()},
                     {"includes_no_illusion", m.labels->includes_no_illusion()}};
  }
  return h;
}

inline nlohmann::ordered_json record_json(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["image_path"] = r.image_path;
  j["variant"] = to_string(r.variant);
  j["kind"] = to_string(r.kind);
  j["true_label"] = r.true_label;
  j["split"] = to_string(r.split);
  return j;
}

inline std::string serialize_manifest(const Manifest& m) {
  std::string out = manifest_header_json(m).dump() + "\n";
  for (const auto& r : m.records) out += record_json(r).dump() + "\n";
  return out;
}

inline void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << serialize_manifest(m);
}

namespace detail {

inline Error parse_error_at(std::size_t line, const std::string& what) {
  return Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

inline std::string required_string(const nlohmann::json& j, const char* key, std::size_t line) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw parse_error_at(line, std::string("missing string field '") + key + "'");
  }
  return it->get<std::string>();
}

/// Runs an enum parser and tags its ParseError with the line number.
template <typename F>
auto at_line(std::size_t line, F&& parse) {
  try {
    return parse();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw parse_error_at(line, e.what());
    throw;
  }
}

}  // namespace detail

inline Manifest parse_manifest(std::istream& in) {
  Manifest m;
  bool have_header = false;
  std::unordered_set<std::string> ids;
  std::string text;
  for (std::size_t line_no = 1; std::getline(in, text); ++line_no) {
    if (trim(text).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw detail::parse_error_at(line_no, e.what());
    }
    if (!j.is_object()) throw detail::parse_error_at(line_no, "expected a JSON object");

    try {
      if (!have_header) {
        const auto kind = detail::required_string(j, "kind", line_no);
        m.kind = detail::at_line(line_no, [&] { return parse_kind(kind); });
        if (m.kind == TaskKind::Classification) {
          const auto ls = j.find("labelset");
          if (ls == j.end() || !ls->is_object()) {
            throw detail::parse_error_at(line_no, "classification manifest needs a labelset");
          }
          const std::string name = detail::required_string(*ls, "name", line_no);
          const bool flag = ls->value("includes_no_illusion", false);
          std::vector<std::string> classes;
          if (const auto c = ls->find("classes"); c != ls->end()) {
            classes = c->get<std::vector<std::string>>();
          }
          if (classes.empty()) {
            const auto builtin = find_builtin_labelset(name, flag);
            if (!builtin) throw detail::parse_error_at(line_no, "unknown label set '" + name + "'");
            m.labels = *builtin;
          } else {
            m.labels = LabelSet(name, std::move(classes), flag);
          }
        }
        have_header = true;
        continue;
      }

      SampleRecord r;
      r.id = detail::required_string(j, "id", line_no);
      r.image_path = detail::required_string(j, "image_path", line_no);
      const auto variant = detail::required_string(j, "variant", line_no);
      const auto kind = detail::required_string(j, "kind", line_no);
      const auto split = detail::required_string(j, "split", line_no);
      r.variant = detail::at_line(line_no, [&] { return parse_variant(variant); });
      r.kind = detail::at_line(line_no, [&] { return parse_kind(kind); });
      r.split = detail::at_line(line_no, [&] { return parse_split(split); });
      r.true_label = detail::required_string(j, "true_label", line_no);
      validate_record(r, m);
      if (!ids.insert(r.id).second) {
        throw Error(ErrorCode::DuplicateId,
                    "line " + std::to_string(line_no) + ": duplicate id '" + r.id + "'");
      }
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw detail::parse_error_at(line_no, e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::ParseError, "line 1: empty manifest");
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path.string());
  return parse_manifest(in);
}

// ---------------------------------------------------------------------------
// Answer normalization

struct NormalizedAnswer {
  enum class Status { Answer, NotCovered, NoIllusion };

  Status status = Status::NotCovered;
  std::string value;  // class name or character string when status == Answer

  bool covered() const noexcept { return status == Status::Answer; }

  static NormalizedAnswer answer(std::string v) { return {Status::Answer, std::move(v)}; }
  static NormalizedAnswer not_covered() { return {Status::NotCovered, {}}; }
  static NormalizedAnswer no_illusion() { return {Status::NoIllusion, {}}; }

  friend bool operator==(const NormalizedAnswer&, const NormalizedAnswer&) = default;
};

namespace detail {

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

/// Position of the first whole-word occurrence of `needle` in `hay`, or npos.
inline std::size_t find_whole_word(std::string_view hay, std::string_view needle) {
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + 1)) {
    const bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == hay.size() || !is_word_char(hay[end]);
    if (left_ok && right_ok) return pos;
  }
  return std::string_view::npos;
}

}  // namespace detail

/// Maps a free-text answer onto a class. A "no illusion" phrase wins when the
/// set has that class; otherwise the longest whole-word class match wins, ties
/// going to the earliest occurrence.
inline NormalizedAnswer normalize_class_answer(std::string_view raw, const LabelSet& labels) {
  const std::string text = to_lower_ascii(raw);
  if (labels.includes_no_illusion() &&
      detail::find_whole_word(text, "no illusion") != std::string::npos) {
    return NormalizedAnswer::answer(std::string(kNoIllusion));
  }
  const std::string* best = nullptr;
  std::size_t best_len = 0, best_pos = 0;
  for (const auto& c : labels.classes()) {
    if (c == kNoIllusion) continue;
    const std::size_t pos = detail::find_whole_word(text, to_lower_ascii(c));
    if (pos == std::string::npos) continue;
    if (!best || c.size() > best_len || (c.size() == best_len && pos < best_pos)) {
      best = &c;
      best_len = c.size();
      best_pos = pos;
    }
  }
  return best ? NormalizedAnswer::answer(*best) : NormalizedAnswer::not_covered();
}

/// Extracts a character-sequence answer: the first double-quoted span, else a
/// bare 1-16 character token. "No illusion" yields the no-illusion marker.
inline NormalizedAnswer normalize_char_answer(std::string_view raw) {
  auto is_no_illusion = [](std::string_view s) { return to_lower_ascii(trim(s)) == "no illusion"; };

  std::optional<std::string> quoted;
  for (const auto& [open, close] : {std::pair<std::string_view, std::string_view>{"\"", "\""},
                                    {"\xE2\x80\x9C", "\xE2\x80\x9D"}}) {
    const auto a = raw.find(open);
    if (a == std::string_view::npos) continue;
    const auto b = raw.find(close, a + open.size());
    if (b == std::string_view::npos) continue;
    quoted = std::string(raw.substr(a + open.size(), b - a - open.size()));
    break;
  }
  if (quoted) {
    if (is_no_illusion(*quoted)) return NormalizedAnswer::no_illusion();
    if (quoted->empty()) return NormalizedAnswer::not_covered();
    return NormalizedAnswer::answer(*quoted);
  }

  std::string stripped = trim(raw);
  while (!stripped.empty() && (stripped.back() == '.' || stripped.back() == '!')) stripped.pop_back();
  if (is_no_illusion(stripped) ||
      detail::find_whole_word(to_lower_ascii(raw), "no illusion") != std::string::npos) {
    return NormalizedAnswer::no_illusion();
  }
  if (!stripped.empty() && stripped.size() <= 16 &&
      std::none_of(stripped.begin(), stripped.end(),
                   [](unsigned char c) { return std::isspace(c); })) {
    return NormalizedAnswer::answer(stripped);
  }
  return NormalizedAnswer::not_covered();
}

// ---------------------------------------------------------------------------
// Predictions

struct PredictionLine {
  std::string sample_id;
  std::string raw_text;

  friend bool operator==(const PredictionLine&, const PredictionLine&) = default;
};

struct Prediction {
  std::string sample_id;
  std::string raw_text;
  NormalizedAnswer normalized;
};

inline std::string serialize_prediction(const PredictionLine& p) {
  nlohmann::ordered_json j;
  j["sample_id"] = p.sample_id;
  j["raw_text"] = p.raw_text;
  return j.dump();
}

inline std::vector<PredictionLine> parse_predictions(std::istream& in) {
  std::vector<PredictionLine> out;
  std::string text;
  for (std::size_t line_no = 1; std::getline(in, text); ++line_no) {
    if (trim(text).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      out.push_back({j.at("sample_id").get<std::string>(), j.at("raw_text").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      // A torn final line from an interrupted run is tolerated; anything else is an error.
      if (in.peek() == std::char_traits<char>::eof() && text.back() != '}') break;
      throw detail::parse_error_at(line_no, e.what());
    }
  }
  return out;
}

inline std::vector<PredictionLine> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open predictions " + path.string());
  return parse_predictions(in);
}

}  // namespace illusory
