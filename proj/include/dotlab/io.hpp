#pragma once

// Deterministic file emission: CSV tables, minimal SVG plots and a run
// manifest with SHA-256 checksums. Nothing here records wall-clock time, so
// identical inputs give byte-identical files.

#include "dotlab/errors.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifndef DOTLAB_VERSION
#define DOTLAB_VERSION "0.1.0"
#endif

namespace dotlab::io {

namespace fs = std::filesystem;

/// Shortest round-trip-safe text for a double; NaN is written as "nan".
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.12g}", v);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != header_.size()) throw Error("InternalError", "CSV row width differs from header");
    rows_.push_back(cells);
  }

  std::string str() const {
    std::ostringstream os;
    const auto line = [&os](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
      os << '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return os.str();
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IOError", "cannot write " + path.string());
  out << text;
  if (!out) throw Error("IOError", "write failed for " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Parses a header + numeric-or-text CSV into rows of cells.
inline std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::vector<std::string>* header = nullptr) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      first = false;
      if (header) *header = cells;
      continue;
    }
    rows.push_back(cells);
  }
  return rows;
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("InternalError", "SHA-256 digest failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

// ---------------------------------------------------------------- SVG

namespace detail {

inline std::string viridis(double t) {
  // Five-stop piecewise-linear approximation of the viridis map.
  static constexpr double stops[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int i = std::min(static_cast<int>(t), 3);
  const double f = t - i;
  int c[3];
  for (int k = 0; k < 3; ++k) c[k] = static_cast<int>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
  return fmt::format("#{:02x}{:02x}{:02x}", c[0], c[1], c[2]);
}

struct Frame {
  double x0, x1, y0, y1;  // data range
  double left = 70, right = 20, top = 30, bottom = 50, width = 640, height = 420;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline std::string axes(const Frame& f, const std::string& title, const std::string& xlabel, const std::string& ylabel,
                        bool log_y) {
  std::string s = fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", f.left, f.top,
      f.width - f.left - f.right, f.height - f.top - f.bottom);
  s += fmt::format("<text x=\"{}\" y=\"18\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n", f.width / 2, title);
  s += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
                   (f.left + f.width - f.right) / 2, f.height - 12, xlabel);
  s += fmt::format(
      "<text x=\"16\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
      (f.top + f.height - f.bottom) / 2, (f.top + f.height - f.bottom) / 2, ylabel);
  for (int k = 0; k <= 4; ++k) {
    const double xv = f.x0 + (f.x1 - f.x0) * k / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * k / 4.0;
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"middle\">{:.4g}</text>\n",
                     f.px(xv), f.height - f.bottom + 14, xv);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"10\" text-anchor=\"end\">{:.4g}</text>\n",
                     f.left - 4, f.py(yv) + 3, log_y ? std::pow(10.0, yv) : yv);
  }
  return s;
}

inline std::string open_svg(const Frame& f) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      f.width, f.height, f.width, f.height);
}

inline void pad(double& lo, double& hi) {
  if (!(hi > lo)) lo -= 0.5, hi += 0.5;
}

}  // namespace detail

/// values(i_y, i_x) rendered as colored cells, normalized to its own range.
inline std::string svg_heatmap(const std::vector<double>& xs, const std::vector<double>& ys, const Eigen::MatrixXd& values,
                               const std::string& title, const std::string& xlabel, const std::string& ylabel) {
  detail::Frame f{xs.front(), xs.back(), ys.front(), ys.back()};
  detail::pad(f.x0, f.x1);
  detail::pad(f.y0, f.y1);
  const double lo = values.minCoeff(), hi = values.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  std::string s = detail::open_svg(f);
  const double cw = (f.px(f.x1) - f.px(f.x0)) / static_cast<double>(xs.size());
  const double ch = (f.py(f.y0) - f.py(f.y1)) / static_cast<double>(ys.size());
  for (std::size_t j = 0; j < ys.size(); ++j)
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double v = (values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) - lo) / span;
      s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                       f.left + cw * static_cast<double>(i), f.py(f.y0) - ch * static_cast<double>(j + 1), cw + 0.05,
                       ch + 0.05, detail::viridis(v));
    }
  s += detail::axes(f, title, xlabel, ylabel, false);
  s += "</svg>\n";
  return s;
}

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool markers_only = false;
};

/// Line or scatter plot; with `log_y` non-positive points are dropped.
inline std::string svg_plot(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                            const std::string& ylabel, bool log_y) {
  const auto ty = [log_y](double y) { return log_y ? std::log10(y) : y; };
  const auto keep = [log_y](double y) { return std::isfinite(y) && (!log_y || y > 0.0); };
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (keep(s.y[i])) {
        x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
        y0 = std::min(y0, ty(s.y[i])), y1 = std::max(y1, ty(s.y[i]));
      }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  detail::pad(x0, x1);
  detail::pad(y0, y1);
  const double ym = 0.05 * (y1 - y0);
  detail::Frame f{x0, x1, y0 - ym, y1 + ym};
  std::string out = detail::open_svg(f);
  int legend = 0;
  for (const auto& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!keep(s.y[i])) continue;
      if (s.markers_only)
        out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.5\" fill=\"{}\"/>\n", f.px(s.x[i]),
                           f.py(ty(s.y[i])), s.color);
      else
        pts += fmt::format("{:.2f},{:.2f} ", f.px(s.x[i]), f.py(ty(s.y[i])));
    }
    if (!pts.empty())
      out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n", pts, s.color);
    if (!s.label.empty())
      out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{}\">{}</text>\n", f.left + 8,
                         f.top + 14 + 14 * legend++, s.color, s.label);
  }
  out += detail::axes(f, title, xlabel, ylabel, log_y);
  out += "</svg>\n";
  return out;
}

// ---------------------------------------------------------------- manifest

/// Collects every file written by one command and emits manifest.json.
class RunManifest {
 public:
  RunManifest(fs::path out_dir, std::string command, const nlohmann::json& config, std::uint64_t seed)
      : dir_(std::move(out_dir)), command_(std::move(command)), config_(config), seed_(seed) {
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  void write(const std::string& name, const std::string& text) {
    write_text(dir_ / name, text);
    files_.push_back({name, sha256_hex(text), text.size()});
  }

  void warn(const std::string& message) { warnings_.push_back(message); }
  std::size_t warning_count() const { return warnings_.size(); }

  nlohmann::json json() const {
    nlohmann::json j;
    j["schema"] = 1;
    j["tool"] = "dotlab";
    j["version"] = DOTLAB_VERSION;
    j["command"] = command_;
    j["seed"] = seed_;
    j["inputs_sha256"] = sha256_hex(config_.dump());
    j["warning_count"] = warnings_.size();
    j["warnings"] = warnings_;
    j["artifacts"] = nlohmann::json::array();
    for (const auto& f : files_) j["artifacts"].push_back({{"file", f.name}, {"sha256", f.sha}, {"bytes", f.bytes}});
    return j;
  }

  void finish() { write_text(dir_ / "manifest.json", json().dump(2) + "\n"); }

 private:
  struct Entry {
    std::string name;
    std::string sha;
    std::size_t bytes;
  };
  fs::path dir_;
  std::string command_;
  nlohmann::json config_;
  std::uint64_t seed_;
  std::vector<Entry> files_;
  std::vector<std::string> warnings_;
};

}  // namespace dotlab::io
