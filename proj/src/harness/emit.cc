#include "oshield/harness/emit.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "oshield/errors.h"

namespace oshield::harness {

const char* const kSummaryHeader = "env,variant,mode,T,reward_mean,reward_se,p_safe_state,p_safe_traj,reject_rate";
const char* const kUsageHeader = "t,frac_learned,frac_recovery,frac_lqr";

namespace {

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("bad number '" + s + "' in CSV");
  }
  if (used != s.size()) throw ConfigError("bad number '" + s + "' in CSV");
  return v;
}

std::string expect_header(std::istream& is, const char* header) {
  std::string line;
  if (!std::getline(is, line) || line != header) throw ConfigError(std::string("expected CSV header ") + header);
  return line;
}

}  // namespace

std::string rollouts_header(const dyn::Environment& env) {
  std::string h = "run_id,t";
  for (const auto& s : env.state_names()) h += "," + s;
  for (const auto& a : env.action_names()) h += "," + a;
  return h + ",branch,safe,wall_ns";
}

void write_rollouts_csv(std::ostream& os, const dyn::Environment& env, const std::vector<RolloutResult>& rollouts) {
  os << rollouts_header(env) << '\n';
  std::vector<const RolloutResult*> order;
  for (const auto& r : rollouts) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->run_id < b->run_id; });
  for (const RolloutResult* r : order) {
    for (const auto& s : r->trajectory.steps) {
      os << r->run_id << ',' << s.t;
      for (int i = 0; i < s.x.size(); ++i) os << ',' << num(s.x(i));
      for (int i = 0; i < s.u.size(); ++i) os << ',' << num(s.u(i));
      os << ',' << shield::branch_name(s.branch) << ',' << (s.safe ? 1 : 0) << ',' << s.wall_ns << '\n';
    }
  }
}

void write_summary_csv(std::ostream& os, const std::vector<Metrics>& rows) {
  os << kSummaryHeader << '\n';
  for (const Metrics& m : rows) {
    os << m.env << ',' << m.variant << ',' << m.mode << ',' << m.T << ',' << num(m.reward_mean) << ','
       << num(m.reward_se) << ',' << num(m.p_safe_state) << ',' << num(m.p_safe_traj) << ','
       << num(m.reject_rate) << '\n';
  }
}

std::vector<Metrics> read_summary_csv(std::istream& is) {
  expect_header(is, kSummaryHeader);
  std::vector<Metrics> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 9) throw ConfigError("summary.csv row has " + std::to_string(c.size()) + " fields");
    Metrics m;
    m.env = c[0];
    m.variant = c[1];
    m.mode = c[2];
    m.T = static_cast<int>(parse_double(c[3]));
    m.reward_mean = parse_double(c[4]);
    m.reward_se = parse_double(c[5]);
    m.p_safe_state = parse_double(c[6]);
    m.p_safe_traj = parse_double(c[7]);
    m.reject_rate = parse_double(c[8]);
    out.push_back(std::move(m));
  }
  return out;
}

void write_usage_csv(std::ostream& os, const std::vector<std::array<double, 3>>& usage) {
  os << kUsageHeader << '\n';
  for (std::size_t t = 0; t < usage.size(); ++t) {
    os << t << ',' << num(usage[t][0]) << ',' << num(usage[t][1]) << ',' << num(usage[t][2]) << '\n';
  }
}

std::vector<std::array<double, 3>> read_usage_csv(std::istream& is) {
  expect_header(is, kUsageHeader);
  std::vector<std::array<double, 3>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 4) throw ConfigError("usage.csv row needs 4 fields");
    if (static_cast<std::size_t>(parse_double(c[0])) != out.size()) throw ConfigError("usage.csv rows out of order");
    out.push_back({parse_double(c[1]), parse_double(c[2]), parse_double(c[3])});
  }
  return out;
}

void write_latency_csv(std::ostream& os, const std::vector<LatencyPoint>& points) {
  os << "T,mean_ns,se_ns,samples\n";
  for (const auto& p : points) os << p.T << ',' << num(p.mean_ns) << ',' << num(p.se_ns) << ',' << p.samples << '\n';
}

namespace {

struct Plot {
  double x0, x1, y0, y1;
  static constexpr double kW = 640, kH = 400, kL = 70, kR = 20, kT = 40, kB = 50;

  double px(double x) const { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); }
  double py(double y) const { return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB); }

  void open(std::ostream& os, const std::string& title, const std::string& xlabel, const std::string& ylabel) const {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n"
       << "<line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\"" << kW - kR << "\" y2=\"" << kH - kB
       << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kH - kB
       << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
      os << "<text x=\"" << px(xv) << "\" y=\"" << kH - kB + 16 << "\" text-anchor=\"middle\">" << num_short(xv)
         << "</text>\n<text x=\"" << kL - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
         << num_short(yv) << "</text>\n";
    }
    os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n"
       << "<text x=\"16\" y=\"" << kH / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << kH / 2
       << ")\">" << ylabel << "</text>\n";
  }

  void line(std::ostream& os, const std::vector<std::pair<double, double>>& pts, const char* color) const {
    if (pts.empty()) return;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : pts) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
  }

  static std::string num_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }
};

void legend(std::ostream& os, const std::vector<std::pair<const char*, const char*>>& items) {
  double y = 50;
  for (const auto& [label, color] : items) {
    os << "<line x1=\"520\" y1=\"" << y << "\" x2=\"545\" y2=\"" << y << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/><text x=\"550\" y=\"" << y + 4 << "\">" << label << "</text>\n";
    y += 16;
  }
}

std::pair<double, double> padded(double lo, double hi) {
  if (!(hi > lo)) return {lo - 1.0, hi + 1.0};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

void write_usage_svg(std::ostream& os, const std::vector<std::array<double, 3>>& usage, const std::string& title) {
  Plot p{0.0, std::max<double>(1.0, static_cast<double>(usage.size()) - 1.0), 0.0, 1.0};
  p.open(os, title, "t", "fraction of rollouts");
  const char* colors[3] = {"#1f77b4", "#d62728", "#2ca02c"};
  for (int b = 0; b < 3; ++b) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t t = 0; t < usage.size(); ++t) pts.emplace_back(static_cast<double>(t), usage[t][b]);
    p.line(os, pts, colors[b]);
  }
  legend(os, {{"learned", colors[0]}, {"recovery", colors[1]}, {"lqr", colors[2]}});
  os << "</svg>\n";
}

void write_sweep_svg(std::ostream& os, const std::vector<Metrics>& rows, const std::string& title) {
  if (rows.empty()) {
    Plot{0, 1, 0, 1}.open(os, title, "T", "reward");
    os << "</svg>\n";
    return;
  }
  double lo = rows[0].reward_mean, hi = lo, tmax = 1.0;
  for (const auto& m : rows) {
    lo = std::min(lo, m.reward_mean - m.reward_se);
    hi = std::max(hi, m.reward_mean + m.reward_se);
    tmax = std::max(tmax, static_cast<double>(m.T));
  }
  const auto [y0, y1] = padded(lo, hi);
  Plot p{0.0, tmax, y0, y1};
  p.open(os, title, "T", "reward");
  std::vector<std::pair<double, double>> pts;
  for (const auto& m : rows) {
    pts.emplace_back(m.T, m.reward_mean);
    os << "<line x1=\"" << p.px(m.T) << "\" y1=\"" << p.py(m.reward_mean - m.reward_se) << "\" x2=\"" << p.px(m.T)
       << "\" y2=\"" << p.py(m.reward_mean + m.reward_se) << "\" stroke=\"gray\"/>\n";
  }
  p.line(os, pts, "gray");
  os << "</svg>\n";
}

void write_latency_svg(std::ostream& os, const std::vector<LatencyPoint>& points, const std::string& title) {
  double hi = 1.0, tmax = 1.0;
  for (const auto& q : points) {
    hi = std::max(hi, (q.mean_ns + q.se_ns) / 1e3);
    tmax = std::max(tmax, static_cast<double>(q.T));
  }
  Plot p{0.0, tmax, 0.0, hi * 1.05};
  p.open(os, title, "T", "time per action (us)");
  std::vector<std::pair<double, double>> pts;
  for (const auto& q : points) pts.emplace_back(q.T, q.mean_ns / 1e3);
  p.line(os, pts, "#1f77b4");
  os << "</svg>\n";
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& fn) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  fn(f);
  f.flush();
  if (!f) throw IoError("write failed for " + path);
}

}  // namespace oshield::harness
