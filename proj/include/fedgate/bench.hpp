#pragma once

// Descriptive statistics, least-squares slope fits and the broker-vs-native
// overhead benchmark.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedgate/common.hpp"

namespace fedgate {

struct ClusterConfig;

using Point = std::pair<double, double>;

double mean(std::span<const double> values);
double median(std::span<const double> values);
/// n - 1 denominator; 0 for a single value.
double sample_stddev(std::span<const double> values);

/// Least-squares slope of y = kx: sum(xy) / sum(x^2). Throws DegenerateInput
/// for no points or all-zero x.
double fit_slope(std::span<const Point> points);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares with intercept; needs two distinct x values.
LinearFit fit_ols(std::span<const Point> points);

/// Uncentered R^2 of a through-origin fit: 1 - SSres / sum(y^2).
double r_squared_through_origin(std::span<const Point> points, double slope);

struct SeriesStats {
  double mean = 0.0;
  double median = 0.0;
  double ssd = 0.0;
  bool operator==(const SeriesStats&) const = default;
};

SeriesStats describe(std::span<const double> values);

struct BenchResult {
  std::vector<double> sizesMB;
  std::vector<double> nativeSeconds;
  std::vector<double> brokerSeconds;
  double slopeNative = 0.0;
  double slopeBroker = 0.0;
  SeriesStats native;
  SeriesStats broker;
  double r2Native = 0.0;
  double r2Broker = 0.0;

  [[nodiscard]] double slope_ratio() const { return slopeBroker / slopeNative; }
  bool operator==(const BenchResult&) const = default;
};

/// Fills slopes, statistics and R^2 from the three aligned series.
BenchResult summarize(std::vector<double> sizesMB, std::vector<double> nativeSeconds,
                      std::vector<double> brokerSeconds);

/// CSV with header "size,native,broker"; "#" starts a comment line.
BenchResult parse_bench_csv(std::string_view text);
BenchResult ingest_paper_table(const std::string& csvPath);

std::string to_csv(const BenchResult& result);
/// Human-readable table with slopes, statistics and the overhead ratio.
std::string format_report(const std::string& title, const BenchResult& result, bool withIntercept);

struct BenchReport {
  BenchResult read;
  BenchResult write;
};

/// One native and one brokered write then read per size, on two clusters
/// built from the same config (native with security off).
BenchReport bench_overhead(const ClusterConfig& config, std::span<const double> sizesMB);

}  // namespace fedgate
