#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "graphem/errors.hpp"
#include "graphem/graph.hpp"
#include "graphem/model.hpp"
#include "graphem/types.hpp"

namespace graphem {
namespace io {

namespace detail {

// Shortest round-trip decimal representation; locale-free and exact through
// from_chars, which the graph document relies on.
inline std::string format_double(double value) {
  std::array<char, 40> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view token, double& out) {
  token = trim(token);
  if (token.empty()) return false;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), out);
  return res.ec == std::errc{} && res.ptr == token.data() + token.size();
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream stream(path, std::ios::binary);
  if (!stream) throw io_error("cannot open '" + path + "' for writing");
  return stream;
}

inline std::string read_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw io_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << stream.rdbuf();
  return buf.str();
}

template <typename LineFn>
inline void for_each_line(const std::string& text, LineFn&& fn) {
  std::size_t start = 0;
  long line_number = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_number;
    fn(line_number, std::string_view(text).substr(start, end - start));
    if (end == text.size()) break;
    start = end + 1;
  }
}

}  // namespace detail

/// Read an N x D numeric matrix from a delimited text file. D is inferred
/// from the first data row; ragged rows and non-numeric cells are rejected
/// with their file coordinates. Whitespace-only lines are skipped.
inline Matrix read_point_cloud(const std::string& path, char delimiter = ',', bool has_header = false) {
  const std::string text = detail::read_file(path);
  std::vector<std::vector<double>> rows;
  Index cols = -1;
  bool header_pending = has_header;

  detail::for_each_line(text, [&](long line_number, std::string_view line) {
    if (detail::trim(line).empty()) return;
    if (header_pending) {
      header_pending = false;
      return;
    }
    std::vector<double> row;
    std::size_t start = 0;
    long column = 0;
    while (true) {
      std::size_t end = line.find(delimiter, start);
      const std::string_view token = line.substr(start, end == std::string_view::npos
                                                             ? std::string_view::npos
                                                             : end - start);
      ++column;
      double value = 0.0;
      if (!detail::parse_double(token, value)) {
        throw io_error(path + ": non-numeric value at line " + std::to_string(line_number) +
                       ", column " + std::to_string(column));
      }
      row.push_back(value);
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
    if (cols < 0) {
      cols = static_cast<Index>(row.size());
    } else if (static_cast<Index>(row.size()) != cols) {
      throw io_error(path + ": ragged row at line " + std::to_string(line_number) + " (expected " +
                     std::to_string(cols) + " columns, got " + std::to_string(row.size()) + ")");
    }
    rows.push_back(std::move(row));
  });

  if (rows.empty()) throw io_error(path + ": no data rows");
  Matrix out(static_cast<Index>(rows.size()), cols);
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < cols; ++j) out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return out;
}

inline void write_point_cloud(const std::string& path, const Matrix& points, char delimiter = ',') {
  auto stream = detail::open_output(path);
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index j = 0; j < points.cols(); ++j) {
      if (j) stream << delimiter;
      stream << detail::format_double(points(i, j));
    }
    stream << '\n';
  }
}

inline void write_labels(const std::string& path, const std::vector<PointLabel>& labels) {
  auto stream = detail::open_output(path);
  for (PointLabel label : labels) stream << to_string(label) << '\n';
}

inline std::vector<PointLabel> read_labels(const std::string& path) {
  const std::string text = detail::read_file(path);
  std::vector<PointLabel> labels;
  detail::for_each_line(text, [&](long line_number, std::string_view line) {
    const std::string_view token = detail::trim(line);
    if (token.empty()) return;
    if (token == "pattern") {
      labels.push_back(PointLabel::pattern);
    } else if (token == "background") {
      labels.push_back(PointLabel::background);
    } else {
      throw io_error(path + ": unknown label at line " + std::to_string(line_number));
    }
  });
  return labels;
}

struct TraceSummary {
  int iterations = 0;
  bool converged = false;
  std::optional<double> final_log_posterior;
};

struct GraphDocument {
  MixtureParams params;
  Graph graph;
  TraceSummary summary;
};

/// Write the fitted model and graph as a versioned, line-oriented text
/// document. Doubles use shortest round-trip formatting, so reading the
/// document back reproduces every value bit for bit.
inline void write_graph(const MixtureParams& params, const Graph& g, const std::string& path,
                        const FitTrace* trace = nullptr) {
  if (g.node_count() != params.component_count()) {
    throw shape_error("write_graph: graph/params node count mismatch");
  }
  auto stream = detail::open_output(path);
  stream << "graphem-graph 1\n";
  stream << "K " << params.component_count() << '\n';
  stream << "D " << params.dimension() << '\n';
  stream << "alpha " << detail::format_double(params.alpha) << '\n';
  stream << "rho " << detail::format_double(params.rho) << '\n';
  if (trace) {
    stream << "iterations " << trace->iterations << '\n';
    stream << "converged " << (trace->converged ? 1 : 0) << '\n';
    if (!trace->log_posterior.empty()) {
      stream << "final_log_posterior " << detail::format_double(trace->log_posterior.back()) << '\n';
    }
  }
  stream << "nodes " << params.component_count() << '\n';
  for (int c = 0; c < params.component_count(); ++c) {
    stream << "node " << c << ' ' << detail::format_double(params.pi(c)) << ' '
           << detail::format_double(params.sigma2(c));
    for (int d = 0; d < params.dimension(); ++d) {
      stream << ' ' << detail::format_double(params.mu(c, d));
    }
    stream << '\n';
  }
  stream << "edges " << g.edge_count() << '\n';
  for (const auto& e : g.edges()) {
    stream << "edge " << e.i << ' ' << e.j << ' ' << detail::format_double(e.weight) << '\n';
  }
  if (!stream) throw io_error("write_graph: failed writing '" + path + "'");
}

inline GraphDocument read_graph(const std::string& path) {
  const std::string text = detail::read_file(path);
  std::istringstream stream(text);
  std::string keyword;

  auto fail = [&](const std::string& what) -> io_error {
    return io_error(path + ": " + what);
  };

  std::string version;
  stream >> keyword >> version;
  if (keyword != "graphem-graph" || version != "1") throw fail("not a graphem-graph v1 document");

  GraphDocument doc;
  long k = -1, d = -1;
  bool saw_alpha = false, saw_rho = false;
  while (stream >> keyword) {
    if (keyword == "nodes") break;
    std::string value;
    if (!(stream >> value)) throw fail("truncated header");
    double numeric = 0.0;
    if (!detail::parse_double(value, numeric)) throw fail("bad value for '" + keyword + "'");
    if (keyword == "K") {
      k = static_cast<long>(numeric);
    } else if (keyword == "D") {
      d = static_cast<long>(numeric);
    } else if (keyword == "alpha") {
      doc.params.alpha = numeric;
      saw_alpha = true;
    } else if (keyword == "rho") {
      doc.params.rho = numeric;
      saw_rho = true;
    } else if (keyword == "iterations") {
      doc.summary.iterations = static_cast<int>(numeric);
    } else if (keyword == "converged") {
      doc.summary.converged = numeric != 0.0;
    } else if (keyword == "final_log_posterior") {
      doc.summary.final_log_posterior = numeric;
    } else {
      throw fail("unknown header field '" + keyword + "'");
    }
  }
  if (keyword != "nodes") throw fail("missing node section");
  if (k < 1 || d < 1 || !saw_alpha || !saw_rho) throw fail("incomplete header");

  long node_count = 0;
  if (!(stream >> node_count) || node_count != k) throw fail("node count mismatch");
  doc.params.mu.resize(k, d);
  doc.params.sigma2.resize(k);
  doc.params.pi.resize(k);
  for (long c = 0; c < k; ++c) {
    long index = -1;
    std::string tok;
    if (!(stream >> tok) || tok != "node" || !(stream >> index) || index != c) {
      throw fail("malformed node record " + std::to_string(c));
    }
    std::string pi_s, s2_s;
    if (!(stream >> pi_s >> s2_s) || !detail::parse_double(pi_s, doc.params.pi(c)) ||
        !detail::parse_double(s2_s, doc.params.sigma2(c))) {
      throw fail("malformed node record " + std::to_string(c));
    }
    for (long dd = 0; dd < d; ++dd) {
      std::string v;
      if (!(stream >> v) || !detail::parse_double(v, doc.params.mu(c, dd))) {
        throw fail("malformed node record " + std::to_string(c));
      }
    }
  }

  std::string tok;
  long edge_count = 0;
  if (!(stream >> tok) || tok != "edges" || !(stream >> edge_count) || edge_count < 0) {
    throw fail("missing edge section");
  }
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(edge_count));
  for (long e = 0; e < edge_count; ++e) {
    std::string w_s;
    Edge edge;
    if (!(stream >> tok) || tok != "edge" || !(stream >> edge.i >> edge.j >> w_s) ||
        !detail::parse_double(w_s, edge.weight)) {
      throw fail("malformed edge record " + std::to_string(e));
    }
    edges.push_back(edge);
  }
  doc.graph = Graph(static_cast<int>(k), std::move(edges));
  return doc;
}

struct SvgOptions {
  double width_px = 900.0;
  double point_radius_px = 1.6;
  bool draw_points = true;
  bool draw_edges = true;
  bool draw_sigma_circles = true;
  const std::vector<PointLabel>* labels = nullptr;  // optional: gray out background points
};

/// Render a 2D dataset with the fitted graph: data points, graph edges and
/// the 1-sigma circle of every node. Output is deterministic for fixed
/// inputs.
inline void plot_svg(const Matrix& x, const MixtureParams& params, const Graph& g,
                     const std::string& path, const SvgOptions& options = {}) {
  if (x.cols() != 2 || params.dimension() != 2) {
    throw config_error("plot_svg: only D=2 datasets can be rendered");
  }
  if (options.labels && static_cast<Index>(options.labels->size()) != x.rows()) {
    throw shape_error("plot_svg: label count != point count");
  }

  double lo_x = x.col(0).minCoeff(), hi_x = x.col(0).maxCoeff();
  double lo_y = x.col(1).minCoeff(), hi_y = x.col(1).maxCoeff();
  for (int c = 0; c < params.component_count(); ++c) {
    const double r = std::sqrt(params.sigma2(c));
    lo_x = std::min(lo_x, params.mu(c, 0) - r);
    hi_x = std::max(hi_x, params.mu(c, 0) + r);
    lo_y = std::min(lo_y, params.mu(c, 1) - r);
    hi_y = std::max(hi_y, params.mu(c, 1) + r);
  }
  const double span_x = std::max(hi_x - lo_x, 1e-12);
  const double span_y = std::max(hi_y - lo_y, 1e-12);
  const double margin = 0.04 * std::max(span_x, span_y);
  const double scale = options.width_px / (span_x + 2 * margin);
  const double height_px = (span_y + 2 * margin) * scale;

  auto px = [&](double vx) { return (vx - lo_x + margin) * scale; };
  auto py = [&](double vy) { return height_px - (vy - lo_y + margin) * scale; };
  auto fmt = detail::format_double;

  auto stream = detail::open_output(path);
  stream << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  stream << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(options.width_px)
         << "\" height=\"" << fmt(height_px) << "\" viewBox=\"0 0 " << fmt(options.width_px) << ' '
         << fmt(height_px) << "\">\n";
  stream << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  if (options.draw_sigma_circles) {
    for (int c = 0; c < params.component_count(); ++c) {
      stream << "<circle cx=\"" << fmt(px(params.mu(c, 0))) << "\" cy=\"" << fmt(py(params.mu(c, 1)))
             << "\" r=\"" << fmt(std::sqrt(params.sigma2(c)) * scale)
             << "\" fill=\"#9ecae1\" fill-opacity=\"0.35\" stroke=\"none\"/>\n";
    }
  }
  if (options.draw_points) {
    for (Index i = 0; i < x.rows(); ++i) {
      const bool bkg = options.labels && (*options.labels)[static_cast<std::size_t>(i)] ==
                                             PointLabel::background;
      stream << "<circle cx=\"" << fmt(px(x(i, 0))) << "\" cy=\"" << fmt(py(x(i, 1))) << "\" r=\""
             << fmt(options.point_radius_px) << "\" fill=\"" << (bkg ? "#bbbbbb" : "#333333")
             << "\"/>\n";
    }
  }
  if (options.draw_edges) {
    for (const auto& e : g.edges()) {
      stream << "<line x1=\"" << fmt(px(params.mu(e.i, 0))) << "\" y1=\"" << fmt(py(params.mu(e.i, 1)))
             << "\" x2=\"" << fmt(px(params.mu(e.j, 0))) << "\" y2=\"" << fmt(py(params.mu(e.j, 1)))
             << "\" stroke=\"#d62728\" stroke-width=\"1.4\"/>\n";
    }
  }
  for (int c = 0; c < params.component_count(); ++c) {
    stream << "<circle cx=\"" << fmt(px(params.mu(c, 0))) << "\" cy=\"" << fmt(py(params.mu(c, 1)))
           << "\" r=\"2.2\" fill=\"#d62728\"/>\n";
  }
  stream << "</svg>\n";
  if (!stream) throw io_error("plot_svg: failed writing '" + path + "'");
}

/// Nonzero edge frequencies as CSV rows "i,j,frequency", canonical order.
inline void write_edge_frequencies(const std::string& path, const EdgeFrequencyMatrix& freq) {
  auto stream = detail::open_output(path);
  stream << "i,j,frequency\n";
  const Index k = freq.entries.rows();
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) {
      if (freq.entries(i, j) > 0.0) {
        stream << i << ',' << j << ',' << detail::format_double(freq.entries(i, j)) << '\n';
      }
    }
  }
}

/// Histogram of the nonzero frequencies over (0,1]; the counts sum to the
/// number of distinct edges observed across the ensemble.
inline void write_frequency_histogram(const std::string& path, const EdgeFrequencyMatrix& freq,
                                      int bins = 40) {
  if (bins < 1) throw config_error("write_frequency_histogram: bins must be >= 1");
  std::vector<long> counts(static_cast<std::size_t>(bins), 0);
  const Index k = freq.entries.rows();
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) {
      const double f = freq.entries(i, j);
      if (f <= 0.0) continue;
      int bin = static_cast<int>(std::ceil(f * bins)) - 1;
      bin = std::clamp(bin, 0, bins - 1);
      ++counts[static_cast<std::size_t>(bin)];
    }
  }
  auto stream = detail::open_output(path);
  stream << "bin_lo,bin_hi,count\n";
  for (int b = 0; b < bins; ++b) {
    stream << detail::format_double(static_cast<double>(b) / bins) << ','
           << detail::format_double(static_cast<double>(b + 1) / bins) << ','
           << counts[static_cast<std::size_t>(b)] << '\n';
  }
}

}  // namespace io
}  // namespace graphem
