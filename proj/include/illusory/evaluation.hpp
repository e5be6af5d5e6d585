#pragma once

// Scores a predictions file against a manifest and renders the result as
// canonical (key-sorted) JSON and as a plain-text table.

#include <cmath>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "illusory/dataset.hpp"
#include "illusory/metrics.hpp"

namespace illusory {

/// Percent of predictions whose answer normalized to a scoreable value.
inline double coverage(std::span<const Prediction> preds) {
  if (preds.empty()) throw Error(ErrorCode::EmptyInput, "coverage of zero predictions");
  std::size_t covered = 0;
  for (const auto& p : preds) covered += p.normalized.covered() ? 1 : 0;
  return 100.0 * static_cast<double>(covered) / static_cast<double>(preds.size());
}

struct MetricsReport {
  TaskKind kind = TaskKind::Classification;
  std::string labelset;
  std::size_t manifest_samples = 0;
  std::size_t predictions = 0;
  std::size_t covered = 0;
  double coverage = 0.0;

  // Classification only.
  std::optional<ConfusionMatrix> confusion;
  std::optional<ClassificationReport> classification;

  // Char only.
  std::optional<SeqEvalReport> sequence;
  std::size_t no_illusion_answers = 0;
  std::size_t no_illusion_truths = 0;
  std::size_t no_illusion_correct = 0;
};

inline Prediction normalize_prediction(const PredictionLine& line, const Manifest& manifest) {
  Prediction p{line.sample_id, line.raw_text, {}};
  p.normalized = manifest.kind == TaskKind::Classification
                     ? normalize_class_answer(line.raw_text, *manifest.labels)
                     : normalize_char_answer(line.raw_text);
  return p;
}

/// Uncovered answers count toward coverage only; they never enter the
/// confusion matrix or the edit-distance totals. Line order does not matter.
inline MetricsReport evaluate(const Manifest& manifest, std::span<const PredictionLine> lines,
                              TaskKind kind) {
  if (kind != manifest.kind) {
    throw Error(ErrorCode::KindMismatch, "requested " + std::string(to_string(kind)) +
                                             " scoring of a " +
                                             std::string(to_string(manifest.kind)) + " manifest");
  }
  std::unordered_map<std::string, const SampleRecord*> by_id;
  for (const auto& r : manifest.records) by_id.emplace(r.id, &r);

  // Sort by id so that floating-point accumulation order is independent of file order.
  std::map<std::string, Prediction> preds;
  for (const auto& line : lines) {
    if (!by_id.contains(line.sample_id)) {
      throw Error(ErrorCode::UnknownSampleId, "prediction for unknown id '" + line.sample_id + "'");
    }
    if (!preds.emplace(line.sample_id, normalize_prediction(line, manifest)).second) {
      throw Error(ErrorCode::DuplicateId, "two predictions for '" + line.sample_id + "'");
    }
  }

  MetricsReport rep;
  rep.kind = kind;
  rep.labelset = manifest.labels ? manifest.labels->name() : std::string("char");
  rep.manifest_samples = manifest.size();
  rep.predictions = preds.size();

  std::vector<Prediction> ordered;
  for (auto& [id, p] : preds) ordered.push_back(p);
  if (!ordered.empty()) rep.coverage = coverage(ordered);

  if (kind == TaskKind::Classification) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& p : ordered) {
      if (!p.normalized.covered()) continue;
      pairs.emplace_back(by_id.at(p.sample_id)->true_label, p.normalized.value);
    }
    rep.covered = pairs.size();
    rep.confusion = build_confusion(pairs, manifest.labels->classes());
    if (!pairs.empty()) rep.classification = classification_report(*rep.confusion);
  } else {
    std::vector<std::string> refs, hyps;
    for (const auto& p : ordered) {
      const std::string& truth = by_id.at(p.sample_id)->true_label;
      const bool truth_is_none = truth == kNoIllusion;
      rep.no_illusion_truths += truth_is_none ? 1 : 0;
      if (p.normalized.status == NormalizedAnswer::Status::NoIllusion) {
        ++rep.no_illusion_answers;
        rep.no_illusion_correct += truth_is_none ? 1 : 0;
        continue;
      }
      if (!p.normalized.covered()) continue;
      ++rep.covered;
      if (truth_is_none) continue;
      refs.push_back(truth);
      hyps.push_back(p.normalized.value);
    }
    if (!refs.empty()) rep.sequence = sequence_report(refs, hyps);
  }
  return rep;
}

namespace detail {

/// Four decimals, so report bytes do not depend on the last ulp.
inline double report_round(double v) { return std::round(v * 1e4) / 1e4; }

}  // namespace detail

/// Key-sorted JSON; identical reports serialize to identical bytes.
inline nlohmann::json report_to_json(const MetricsReport& r) {
  using detail::report_round;
  nlohmann::json j;
  j["kind"] = to_string(r.kind);
  j["labelset"] = r.labelset;
  j["manifest_samples"] = r.manifest_samples;
  j["predictions"] = r.predictions;
  j["covered"] = r.covered;
  j["coverage"] = report_round(r.coverage);
  if (r.classification) {
    const auto& c = *r.classification;
    j["accuracy"] = report_round(c.accuracy);
    j["macro_precision"] = report_round(c.macro_precision);
    j["macro_recall"] = report_round(c.macro_recall);
    j["macro_f1"] = report_round(c.macro_f1);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& s : c.per_class) {
      rows.push_back({{"label", s.label},
                      {"precision", report_round(s.precision)},
                      {"recall", report_round(s.recall)},
                      {"f1", report_round(s.f1)},
                      {"support", s.support}});
    }
    j["per_class"] = rows;
  }
  if (r.confusion) {
    nlohmann::json counts = nlohmann::json::array();
    for (std::size_t i = 0; i < r.confusion->size(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t k = 0; k < r.confusion->size(); ++k) row.push_back((*r.confusion)(i, k));
      counts.push_back(row);
    }
    j["confusion"] = {{"labels", r.confusion->labels()}, {"counts", counts}};
  }
  if (r.kind == TaskKind::Char) {
    j["no_illusion_answers"] = r.no_illusion_answers;
    j["no_illusion_truths"] = r.no_illusion_truths;
    j["no_illusion_correct"] = r.no_illusion_correct;
  }
  if (r.sequence) {
    const auto& s = *r.sequence;
    j["wer"] = report_round(s.wer);
    j["cer"] = report_round(s.cer);
    j["total_ref_words"] = s.total_ref_words;
    j["total_ref_chars"] = s.total_ref_chars;
    j["total_word_edits"] = s.total_word_edits;
    j["total_char_edits"] = s.total_char_edits;
  }
  return j;
}

inline std::string canonical_report(const MetricsReport& r) {
  return report_to_json(r).dump(2) + "\n";
}

namespace detail {

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width, bool right_align) {
  if (s.size() >= width) return s;
  const std::string fill(width - s.size(), ' ');
  return right_align ? fill + s : s + fill;
}

}  // namespace detail

/// Aligned table with one row per named report. Accepts the JSON form so
/// that `report` can render files written earlier.
inline std::string render_table(const std::vector<std::pair<std::string, nlohmann::json>>& rows) {
  using detail::pad;
  auto num = [](const nlohmann::json& j, const char* key) {
    return j.contains(key) ? detail::fixed2(j.at(key).get<double>()) : std::string("-");
  };
  std::size_t name_w = 4;
  for (const auto& [name, _] : rows) name_w = std::max(name_w, name.size());

  const std::vector<std::pair<std::string, std::string>> cols = {
      {"Accuracy", "accuracy"}, {"Precision", "macro_precision"}, {"Recall", "macro_recall"},
      {"F1", "macro_f1"},       {"WER", "wer"},                   {"CER", "cer"},
      {"Coverage", "coverage"}};
  std::string out = pad("Name", name_w, false);
  for (const auto& [title, _] : cols) out += "  " + pad(title, 9, true);
  out += "\n" + std::string(name_w + cols.size() * 11, '-') + "\n";
  for (const auto& [name, j] : rows) {
    out += pad(name, name_w, false);
    for (const auto& [_, key] : cols) out += "  " + pad(num(j, key.c_str()), 9, true);
    out += "\n";
  }
  return out;
}

/// Per-class table for a single classification report.
inline std::string render_per_class(const nlohmann::json& j) {
  using detail::pad;
  if (!j.contains("per_class")) return {};
  std::size_t label_w = 5;
  for (const auto& row : j.at("per_class")) {
    label_w = std::max(label_w, row.at("label").get<std::string>().size());
  }
  std::string out = pad("Class", label_w, false) + "  " + pad("Precision", 9, true) + "  " +
                    pad("Recall", 9, true) + "  " + pad("F1", 9, true) + "  " +
                    pad("Support", 9, true) + "\n";
  for (const auto& row : j.at("per_class")) {
    out += pad(row.at("label").get<std::string>(), label_w, false) + "  " +
           pad(detail::fixed2(row.at("precision").get<double>()), 9, true) + "  " +
           pad(detail::fixed2(row.at("recall").get<double>()), 9, true) + "  " +
           pad(detail::fixed2(row.at("f1").get<double>()), 9, true) + "  " +
           pad(std::to_string(row.at("support").get<std::uint64_t>()), 9, true) + "\n";
  }
  return out;
}

}  // namespace illusory
