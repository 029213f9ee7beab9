#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sameside/corpus.hpp"
#include "sameside/eval.hpp"

namespace sameside {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

enum class PlotKind { kLine, kBar };

struct PlotLabels {
  std::string title;
  std::string x_label;
  std::string y_label;
};

// Self-contained SVG 1.1. Line plots place distinct x values at evenly
// spaced categorical positions; bar charts draw the first series only.
// Output bytes depend only on the input.
std::string emit_plot(const std::vector<Series>& series, PlotKind kind, const PlotLabels& labels = {});

// (bucket_start, count) pairs; buckets at or beyond `max_start` are dropped
// when it is non-zero.
Series histogram_series(const LengthHistogram& hist, std::size_t max_start = 0);

// Accuracy against max sequence length, one series per model kind.
std::vector<Series> accuracy_series(const ResultsTable& table);

}  // namespace sameside
