#include "xdd/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "xdd/error.hpp"

namespace xdd::metrics {

void ConfusionMatrix::accumulate(text::ClassLabel gold, text::ClassLabel predicted) {
  ++counts_[text::index_of(gold)][text::index_of(predicted)];
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  for (std::size_t g = 0; g < text::kNumClasses; ++g)
    for (std::size_t p = 0; p < text::kNumClasses; ++p) counts_[g][p] += other.counts_[g][p];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts_)
    for (auto v : row) n += v;
  return n;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t n = 0;
  for (std::size_t c = 0; c < text::kNumClasses; ++c) n += counts_[c][c];
  return n;
}

ConfusionMatrix ConfusionMatrix::from_counts(
    const std::array<std::array<std::uint64_t, text::kNumClasses>, text::kNumClasses>& counts) {
  ConfusionMatrix cm;
  cm.counts_ = counts;
  return cm;
}

Rational Rational::of(std::int64_t num, std::int64_t den) {
  if (den == 0) return {0, 1};
  const auto g = std::gcd(num, den);
  return {num / g, den / g};
}

Rational operator+(Rational a, Rational b) {
  const __int128 num = static_cast<__int128>(a.num) * b.den + static_cast<__int128>(b.num) * a.den;
  const __int128 den = static_cast<__int128>(a.den) * b.den;
  __int128 x = num, y = den;
  while (y != 0) {
    const auto t = x % y;
    x = y;
    y = t;
  }
  if (x == 0) x = 1;
  return {static_cast<std::int64_t>(num / x), static_cast<std::int64_t>(den / x)};
}

Rational operator/(Rational a, std::int64_t n) { return Rational::of(a.num, a.den * n); }

ExactScores macro_scores_exact(const ConfusionMatrix& cm) {
  const auto total = static_cast<std::int64_t>(cm.total());
  if (total == 0) throw DomainError("macro_scores: empty confusion matrix");
  ExactScores s;
  s.accuracy = Rational::of(static_cast<std::int64_t>(cm.trace()), total);
  const auto n = static_cast<std::int64_t>(text::kNumClasses);
  for (std::size_t c = 0; c < text::kNumClasses; ++c) {
    std::int64_t tp = static_cast<std::int64_t>(cm.at(c, c));
    std::int64_t predicted = 0, gold = 0;
    for (std::size_t o = 0; o < text::kNumClasses; ++o) {
      predicted += static_cast<std::int64_t>(cm.at(o, c));
      gold += static_cast<std::int64_t>(cm.at(c, o));
    }
    // F1 = 2PR/(P+R) = 2tp / (predicted + gold)
    s.precision_macro = s.precision_macro + Rational::of(tp, predicted);
    s.recall_macro = s.recall_macro + Rational::of(tp, gold);
    s.macro_f1 = s.macro_f1 + Rational::of(2 * tp, predicted + gold);
  }
  s.precision_macro = s.precision_macro / n;
  s.recall_macro = s.recall_macro / n;
  s.macro_f1 = s.macro_f1 / n;
  return s;
}

Scores macro_scores(const ConfusionMatrix& cm) {
  const auto e = macro_scores_exact(cm);
  return {e.accuracy.to_double(), e.precision_macro.to_double(), e.recall_macro.to_double(),
          e.macro_f1.to_double()};
}

namespace {

constexpr std::array<const char*, 4> kRowNames = {"Accuracy", "Precision", "Recall", "Macro-F1"};

double row_value(const Scores& s, std::size_t row) {
  switch (row) {
    case 0: return s.accuracy;
    case 1: return s.precision_macro;
    case 2: return s.recall_macro;
    default: return s.macro_f1;
  }
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

std::array<std::vector<bool>, 4> best_marks(std::span<const NamedRun> runs) {
  std::array<std::vector<bool>, 4> marks;
  if (runs.size() < 2) return marks;
  for (std::size_t row = 0; row < 4; ++row) {
    double best = row_value(runs[0].scores, row);
    for (const auto& r : runs) best = std::max(best, row_value(r.scores, row));
    for (const auto& r : runs) marks[row].push_back(row_value(r.scores, row) == best);
  }
  return marks;
}

std::string comparison_table(std::span<const NamedRun> runs) {
  const auto marks = best_marks(runs);
  std::vector<std::size_t> widths;
  for (const auto& r : runs) widths.push_back(std::max<std::size_t>(r.name.size(), 6));
  std::string out = "Metric   ";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out += " | " + runs[i].name + std::string(widths[i] - runs[i].name.size(), ' ');
  }
  out += "\n---------";
  for (auto w : widths) out += "-+-" + std::string(w, '-');
  out += "\n";
  for (std::size_t row = 0; row < 4; ++row) {
    std::string name = kRowNames[row];
    out += name + std::string(9 - name.size(), ' ');
    for (std::size_t i = 0; i < runs.size(); ++i) {
      auto cell = fixed3(row_value(runs[i].scores, row));
      if (!marks[row].empty() && marks[row][i]) cell += "*";
      out += " | " + cell + std::string(widths[i] - cell.size(), ' ');
    }
    out += "\n";
  }
  return out;
}

std::string comparison_json(std::span<const NamedRun> runs) {
  const auto marks = best_marks(runs);
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& s = runs[i].scores;
    nlohmann::ordered_json best = nlohmann::ordered_json::array();
    for (std::size_t row = 0; row < 4; ++row) {
      if (!marks[row].empty() && marks[row][i]) best.push_back(kRowNames[row]);
    }
    j.push_back({{"name", runs[i].name},
                 {"accuracy", s.accuracy},
                 {"precision_macro", s.precision_macro},
                 {"recall_macro", s.recall_macro},
                 {"macro_f1", s.macro_f1},
                 {"best", best}});
  }
  return j.dump(2);
}

}  // namespace xdd::metrics
