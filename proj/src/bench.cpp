#include "fedgate/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "fedgate/config.hpp"

namespace fedgate {

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::DegenerateInput, "mean of empty series");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double median(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::DegenerateInput, "median of empty series");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

double sample_stddev(std::span<const double> values) {
  if (values.size() < 2) {
    if (values.empty()) throw Error(ErrorCode::DegenerateInput, "stddev of empty series");
    return 0.0;
  }
  const double m = mean(values);
  double ss = 0.0;
  for (double x : values) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double fit_slope(std::span<const Point> points) {
  if (points.empty()) throw Error(ErrorCode::DegenerateInput, "no points to fit");
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [x, y] : points) {
    sxy += x * y;
    sxx += x * x;
  }
  if (sxx == 0.0) throw Error(ErrorCode::DegenerateInput, "all x values are zero");
  return sxy / sxx;
}

LinearFit fit_ols(std::span<const Point> points) {
  if (points.size() < 2) throw Error(ErrorCode::DegenerateInput, "ordinary fit needs two points");
  const double n = static_cast<double>(points.size());
  double sx = 0, sy = 0;
  for (const auto& [x, y] : points) {
    sx += x;
    sy += y;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  if (sxx == 0.0) throw Error(ErrorCode::DegenerateInput, "ordinary fit needs two distinct x values");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

double r_squared_through_origin(std::span<const Point> points, double slope) {
  double res = 0, tot = 0;
  for (const auto& [x, y] : points) {
    res += (y - slope * x) * (y - slope * x);
    tot += y * y;
  }
  if (tot == 0.0) throw Error(ErrorCode::DegenerateInput, "all y values are zero");
  return 1.0 - res / tot;
}

SeriesStats describe(std::span<const double> values) {
  return {mean(values), median(values), sample_stddev(values)};
}

namespace {

std::vector<Point> zip(const std::vector<double>& xs, const std::vector<double>& ys) {
  std::vector<Point> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out.emplace_back(xs[i], ys[i]);
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& cell, std::size_t line) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": not a number '" + cell + "'");
  }
  return v;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

BenchResult summarize(std::vector<double> sizesMB, std::vector<double> nativeSeconds,
                      std::vector<double> brokerSeconds) {
  if (sizesMB.size() != nativeSeconds.size() || sizesMB.size() != brokerSeconds.size()) {
    throw Error(ErrorCode::InvalidArgument, "series lengths differ");
  }
  BenchResult r;
  r.sizesMB = std::move(sizesMB);
  r.nativeSeconds = std::move(nativeSeconds);
  r.brokerSeconds = std::move(brokerSeconds);
  const auto np = zip(r.sizesMB, r.nativeSeconds);
  const auto bp = zip(r.sizesMB, r.brokerSeconds);
  r.slopeNative = fit_slope(np);
  r.slopeBroker = fit_slope(bp);
  r.native = describe(r.nativeSeconds);
  r.broker = describe(r.brokerSeconds);
  r.r2Native = r_squared_through_origin(np, r.slopeNative);
  r.r2Broker = r_squared_through_origin(bp, r.slopeBroker);
  return r;
}

BenchResult parse_bench_csv(std::string_view text) {
  std::vector<double> sizes, native, broker;
  bool header = false;
  std::size_t lineNo = 0;
  std::istringstream in{std::string(text)};
  for (std::string raw; std::getline(in, raw);) {
    ++lineNo;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(trim(c));
    if (!header) {
      if (cells != std::vector<std::string>{"size", "native", "broker"}) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(lineNo) + ": expected header size,native,broker");
      }
      header = true;
      continue;
    }
    if (cells.size() != 3) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineNo) + ": expected 3 columns");
    }
    sizes.push_back(parse_number(cells[0], lineNo));
    native.push_back(parse_number(cells[1], lineNo));
    broker.push_back(parse_number(cells[2], lineNo));
  }
  if (!header) throw Error(ErrorCode::ParseError, "missing header size,native,broker");
  if (sizes.empty()) throw Error(ErrorCode::ParseError, "no data rows");
  return summarize(std::move(sizes), std::move(native), std::move(broker));
}

BenchResult ingest_paper_table(const std::string& csvPath) {
  std::ifstream in(csvPath);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + csvPath);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_bench_csv(buffer.str());
  } catch (const Error& e) {
    throw Error(e.code(), csvPath + ": " + e.detail());
  }
}

std::string to_csv(const BenchResult& result) {
  std::ostringstream os;
  os << "size,native,broker\n" << std::setprecision(10);
  for (std::size_t i = 0; i < result.sizesMB.size(); ++i) {
    os << result.sizesMB[i] << ',' << result.nativeSeconds[i] << ',' << result.brokerSeconds[i] << '\n';
  }
  return os.str();
}

std::string format_report(const std::string& title, const BenchResult& r, bool withIntercept) {
  std::ostringstream os;
  os << title << '\n';
  os << "  size(MB)    native(s)    broker(s)\n";
  for (std::size_t i = 0; i < r.sizesMB.size(); ++i) {
    os << "  " << std::setw(8) << fixed(r.sizesMB[i], 1) << "  " << std::setw(11) << fixed(r.nativeSeconds[i], 4)
       << "  " << std::setw(11) << fixed(r.brokerSeconds[i], 4) << '\n';
  }
  os << "  mean    native " << fixed(r.native.mean, 4) << "  broker " << fixed(r.broker.mean, 4) << '\n';
  os << "  median  native " << fixed(r.native.median, 4) << "  broker " << fixed(r.broker.median, 4) << '\n';
  os << "  ssd     native " << fixed(r.native.ssd, 4) << "  broker " << fixed(r.broker.ssd, 4) << '\n';
  os << "  slope   native " << fixed(r.slopeNative, 6) << "  broker " << fixed(r.slopeBroker, 6)
     << "  (through origin, s/MB)\n";
  os << "  r2      native " << fixed(r.r2Native, 6) << "  broker " << fixed(r.r2Broker, 6) << '\n';
  if (withIntercept && r.sizesMB.size() >= 2) {
    const auto n = fit_ols(zip(r.sizesMB, r.nativeSeconds));
    const auto b = fit_ols(zip(r.sizesMB, r.brokerSeconds));
    os << "  ols     native " << fixed(n.slope, 6) << " (intercept " << fixed(n.intercept, 4) << ")  broker "
       << fixed(b.slope, 6) << " (intercept " << fixed(b.intercept, 4) << ")\n";
  }
  const double ratio = r.slope_ratio();
  os << "  broker/native slope ratio " << fixed(ratio, 4) << " (+" << fixed((ratio - 1.0) * 100.0, 2)
     << "% per MB)\n";
  os << "  note: the published claim is +1% per MB; compare with the ratio above\n";
  return os.str();
}

BenchReport bench_overhead(const ClusterConfig& config, std::span<const double> sizesMB) {
  if (!config.bench) throw Error(ErrorCode::InvalidArgument, "config has no bench section");
  if (sizesMB.empty()) throw Error(ErrorCode::InvalidArgument, "no sizes given");
  for (std::size_t i = 0; i < sizesMB.size(); ++i) {
    if (!(sizesMB[i] > 0)) throw Error(ErrorCode::InvalidArgument, "sizes must be positive");
    if (i > 0 && !(sizesMB[i] > sizesMB[i - 1])) throw Error(ErrorCode::InvalidArgument, "sizes must ascend");
  }
  const auto& spec = *config.bench;
  auto native = build_broker(config, false);
  auto secure = build_broker(config, true);
  const auto session = secure->open_session({spec.user, spec.password, spec.source});

  auto must = [](const ServiceResult& r, const std::string& what) {
    if (!r.ok()) throw Error(r.error.value_or(ErrorCode::Unauthorized), what + ": " + r.message);
    return r.elapsedSeconds;
  };

  std::vector<double> nw, nr, bw, br;
  for (double size : sizesMB) {
    std::ostringstream name;
    name << spec.directory << "/bench-" << size;
    const std::string path = name.str();
    DirectRequest d{spec.user, spec.source, spec.nameNode, path, OpKind::Write, size, spec.clientNode};
    nw.push_back(must(native->direct_request(d), "native write " + path));
    d.op = OpKind::Read;
    nr.push_back(must(native->direct_request(d), "native read " + path));
    BrokerRequest b{session.sessionId, spec.nameNode, path, OpKind::Write, size, spec.clientNode};
    bw.push_back(must(secure->handle_request(b), "brokered write " + path));
    b.op = OpKind::Read;
    br.push_back(must(secure->handle_request(b), "brokered read " + path));
  }
  std::vector<double> sizes(sizesMB.begin(), sizesMB.end());
  return {summarize(sizes, std::move(nr), std::move(br)), summarize(sizes, std::move(nw), std::move(bw))};
}

}  // namespace fedgate
