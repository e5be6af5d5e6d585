#pragma once

// Classification and sequence metrics. All rates are on the percent scale.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "illusory/error.hpp"

namespace illusory {

/// Unit-cost edit distance between two sequences of comparable symbols.
template <typename Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
  const std::size_t n = std::size(a), m = std::size(b);
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  auto ai = std::begin(a);
  for (std::size_t i = 1; i <= n; ++i, ++ai) {
    cur[0] = i;
    auto bj = std::begin(b);
    for (std::size_t j = 1; j <= m; ++j, ++bj) {
      const std::size_t sub = prev[j - 1] + (*ai == *bj ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

/// Splits on runs of ASCII whitespace.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

struct SeqEvalReport {
  double wer = 0.0;
  double cer = 0.0;
  std::size_t total_ref_words = 0;
  std::size_t total_ref_chars = 0;
  std::size_t total_word_edits = 0;
  std::size_t total_char_edits = 0;
};

namespace detail {

inline void check_corpus(std::span<const std::string> refs, std::span<const std::string> hyps) {
  if (refs.size() != hyps.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(refs.size()) + " references vs " +
                                               std::to_string(hyps.size()) + " hypotheses");
  }
  if (refs.empty()) throw Error(ErrorCode::EmptyReference, "no references");
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (refs[i].empty()) {
      throw Error(ErrorCode::EmptyReference, "reference " + std::to_string(i) + " is empty");
    }
  }
}

}  // namespace detail

/// Corpus CER: total character edits over total reference characters. Bytes
/// are the character unit, which is exact for the ASCII label alphabet.
inline SeqEvalReport cer_corpus(std::span<const std::string> refs,
                                std::span<const std::string> hyps) {
  detail::check_corpus(refs, hyps);
  SeqEvalReport r;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    r.total_char_edits += levenshtein(refs[i], hyps[i]);
    r.total_ref_chars += refs[i].size();
  }
  r.cer = 100.0 * static_cast<double>(r.total_char_edits) / static_cast<double>(r.total_ref_chars);
  return r;
}

inline SeqEvalReport wer_corpus(std::span<const std::string> refs,
                                std::span<const std::string> hyps) {
  detail::check_corpus(refs, hyps);
  SeqEvalReport r;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto ref_words = split_words(refs[i]);
    if (ref_words.empty()) {
      throw Error(ErrorCode::EmptyReference, "reference " + std::to_string(i) + " has no words");
    }
    r.total_word_edits += levenshtein(ref_words, split_words(hyps[i]));
    r.total_ref_words += ref_words.size();
  }
  r.wer = 100.0 * static_cast<double>(r.total_word_edits) / static_cast<double>(r.total_ref_words);
  return r;
}

/// WER and CER over the same corpus.
inline SeqEvalReport sequence_report(std::span<const std::string> refs,
                                     std::span<const std::string> hyps) {
  SeqEvalReport r = wer_corpus(refs, hyps);
  const SeqEvalReport c = cer_corpus(refs, hyps);
  r.cer = c.cer;
  r.total_ref_chars = c.total_ref_chars;
  r.total_char_edits = c.total_char_edits;
  return r;
}

/// Rows are true labels, columns predicted labels, both in `labels` order.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::string> labels)
      : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }

  std::uint64_t& operator()(std::size_t truth, std::size_t pred) {
    return counts_[truth * labels_.size() + pred];
  }
  std::uint64_t operator()(std::size_t truth, std::size_t pred) const {
    return counts_[truth * labels_.size() + pred];
  }

  std::size_t index_of(std::string_view label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) {
      throw Error(ErrorCode::UnknownLabel, "label '" + std::string(label) + "' not in label set");
    }
    return static_cast<std::size_t>(it - labels_.begin());
  }

  std::uint64_t total() const {
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
  }

  std::uint64_t trace() const {
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < size(); ++i) t += (*this)(i, i);
    return t;
  }

  std::uint64_t row_sum(std::size_t truth) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < size(); ++j) s += (*this)(truth, j);
    return s;
  }

  std::uint64_t col_sum(std::size_t pred) const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < size(); ++i) s += (*this)(i, pred);
    return s;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix build_confusion(
    std::span<const std::pair<std::string, std::string>> pairs,
    const std::vector<std::string>& labels) {
  ConfusionMatrix cm(labels);
  for (const auto& [truth, pred] : pairs) ++cm(cm.index_of(truth), cm.index_of(pred));
  return cm;
}

struct ClassStats {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;
};

struct ClassificationReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassStats> per_class;
};

/// Accuracy plus unweighted (macro) precision/recall/F1 over every label in the
/// matrix. A statistic whose denominator is zero scores 0.
inline ClassificationReport classification_report(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw Error(ErrorCode::EmptyMatrix, "no scored samples");

  ClassificationReport r;
  r.accuracy = 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
  for (std::size_t i = 0; i < cm.size(); ++i) {
    const double tp = static_cast<double>(cm(i, i));
    const std::uint64_t predicted = cm.col_sum(i);
    const std::uint64_t actual = cm.row_sum(i);
    ClassStats s;
    s.label = cm.labels()[i];
    s.support = actual;
    s.precision = predicted ? 100.0 * tp / static_cast<double>(predicted) : 0.0;
    s.recall = actual ? 100.0 * tp / static_cast<double>(actual) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    r.macro_precision += s.precision;
    r.macro_recall += s.recall;
    r.macro_f1 += s.f1;
    r.per_class.push_back(std::move(s));
  }
  const double c = static_cast<double>(cm.size());
  r.macro_precision /= c;
  r.macro_recall /= c;
  r.macro_f1 /= c;
  return r;
}

}  // namespace illusory
