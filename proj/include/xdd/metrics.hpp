#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xdd/textpipe.hpp"

namespace xdd::metrics {

/// rows = gold class, columns = predicted class
class ConfusionMatrix {
 public:
  void accumulate(text::ClassLabel gold, text::ClassLabel predicted);
  /// Entrywise sum, for combining evaluation shards.
  void merge(const ConfusionMatrix& other);

  std::uint64_t at(std::size_t gold, std::size_t predicted) const { return counts_[gold][predicted]; }
  std::uint64_t total() const;
  std::uint64_t trace() const;

  bool operator==(const ConfusionMatrix&) const = default;

  static ConfusionMatrix from_counts(
      const std::array<std::array<std::uint64_t, text::kNumClasses>, text::kNumClasses>& counts);

 private:
  std::array<std::array<std::uint64_t, text::kNumClasses>, text::kNumClasses> counts_{};
};

/// Non-negative fraction kept in lowest terms.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational of(std::int64_t num, std::int64_t den);
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

Rational operator+(Rational a, Rational b);
Rational operator/(Rational a, std::int64_t n);

struct ExactScores {
  Rational accuracy;
  Rational precision_macro;
  Rational recall_macro;
  Rational macro_f1;
};

struct Scores {
  double accuracy = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double macro_f1 = 0.0;
};

/// Per-class precision/recall/F1 with zero-denominator terms defined as 0,
/// averaged without weights. Throws DomainError on an empty matrix.
ExactScores macro_scores_exact(const ConfusionMatrix& cm);
Scores macro_scores(const ConfusionMatrix& cm);

struct NamedRun {
  std::string name;
  Scores scores;
};

/// Aligned plain-text table: rows Accuracy/Precision/Recall/Macro-F1, one
/// column per run, 3 decimals. With two or more runs the best value of each
/// row is marked with '*'; tied values are all marked.
std::string comparison_table(std::span<const NamedRun> runs);
std::string comparison_json(std::span<const NamedRun> runs);

/// For each row (Accuracy, Precision, Recall, Macro-F1), which runs hold the
/// best value. Empty rows when fewer than two runs are given.
std::array<std::vector<bool>, 4> best_marks(std::span<const NamedRun> runs);

}  // namespace xdd::metrics
