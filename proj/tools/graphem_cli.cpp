// Command-line surface for the graphem library: fit a principal graph to a
// CSV point cloud, generate synthetic datasets, classify points against a
// fitted model, inspect bootstrap edge frequencies and render SVG plots.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "graphem/graphem.hpp"

namespace {

struct CommonIo {
  std::string delimiter = ",";
  bool has_header = false;

  char delimiter_char() const {
    if (delimiter.size() != 1) throw graphem::config_error("delimiter must be a single character");
    return delimiter[0];
  }
};

void require_input(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw CLI::ValidationError("input", "input file '" + path + "' does not exist");
  }
}

std::string stem_of(const std::string& path) {
  std::filesystem::path p(path);
  p.replace_extension();
  return p.string();
}

graphem::TopologyPolicy parse_topology(const std::string& text, graphem::GraphPrior prior) {
  if (text == "fixed") return graphem::TopologyPolicy::fixed();
  if (text.rfind("refresh:", 0) == 0) {
    const int every = std::stoi(text.substr(8));
    if (every < 1) throw CLI::ValidationError("--topology", "refresh period must be >= 1");
    return prior == graphem::GraphPrior::average_mst
               ? graphem::TopologyPolicy::refresh_average_every(every)
               : graphem::TopologyPolicy::refresh_mst_every(every);
  }
  throw CLI::ValidationError("--topology", "expected 'fixed' or 'refresh:N'");
}

struct FitArgs {
  std::string input;
  std::string output;
  std::string lambda_mu = "auto";
  double lambda_sigma = 10.0;
  double lambda_pi = 1.0;
  int k = 100;
  double sigma0 = 0.0;  // 0 = auto (mean 5-NN distance squared)
  double alpha0 = 0.10;
  double epsilon = 1e-4;
  int max_iters = 500;
  std::string prior = "mst";
  int avg_ensemble = 500;
  double avg_ratio = 0.75;
  double avg_threshold = 0.35;
  std::string topology;
  std::uint64_t seed = 0;
  std::string svg_path;
  std::string labels_path;
  std::string trace_path;
  CommonIo io;
};

int run_fit(const FitArgs& args) {
  require_input(args.input);
  const graphem::Matrix x =
      graphem::io::read_point_cloud(args.input, args.io.delimiter_char(), args.io.has_header);

  graphem::FitOptions opts;
  opts.hp.component_count = args.k;
  opts.hp.lambda_sigma = args.lambda_sigma;
  opts.hp.lambda_pi = args.lambda_pi;
  opts.hp.epsilon = args.epsilon;
  opts.hp.max_iters = args.max_iters;
  opts.init_alpha = args.alpha0;
  opts.seed = args.seed;
  opts.log = &std::cerr;
  if (args.sigma0 > 0.0) opts.init_sigma0 = args.sigma0;
  opts.graph_prior = args.prior == "avg" ? graphem::GraphPrior::average_mst : graphem::GraphPrior::mst;
  opts.avg_ensemble_size = args.avg_ensemble;
  opts.avg_subsample_ratio = args.avg_ratio;
  opts.avg_threshold = args.avg_threshold;
  if (!args.topology.empty()) opts.hp.topology = parse_topology(args.topology, opts.graph_prior);

  const double sigma0 =
      opts.init_sigma0 ? *opts.init_sigma0 : graphem::mean_knn_distance_squared(x, 5, args.seed);
  opts.init_sigma0 = sigma0;
  if (args.lambda_mu == "auto") {
    opts.hp.lambda_mu = 5.0 / sigma0;
  } else {
    opts.hp.lambda_mu = std::stod(args.lambda_mu);
    if (opts.hp.lambda_mu < 0) throw CLI::ValidationError("--lambda-mu", "must be nonnegative");
  }

  const auto result = graphem::fit(x, opts);

  const std::string output = args.output.empty() ? stem_of(args.input) + ".graph" : args.output;
  graphem::io::write_graph(result.params, result.graph, output, &result.trace);
  std::cout << "fit: K=" << result.params.component_count() << " iterations=" << result.trace.iterations
            << " converged=" << (result.trace.converged ? 1 : 0)
            << " alpha=" << graphem::io::detail::format_double(result.params.alpha)
            << " edges=" << result.graph.edge_count()
            << " cycles=" << graphem::cycle_count(result.graph) << '\n';
  std::cout << "wrote " << output << '\n';

  if (!args.labels_path.empty()) {
    graphem::io::write_labels(args.labels_path, graphem::classify_points(x, result.params));
    std::cout << "wrote " << args.labels_path << '\n';
  }
  if (!args.trace_path.empty()) {
    auto stream = graphem::io::detail::open_output(args.trace_path);
    stream << "iteration,log_posterior,increment,graph_edges\n";
    for (std::size_t t = 0; t < result.trace.log_posterior.size(); ++t) {
      stream << t << ',' << graphem::io::detail::format_double(result.trace.log_posterior[t]) << ','
             << (t > 0 ? graphem::io::detail::format_double(result.trace.increments[t - 1]) : "")
             << ',' << result.trace.graph_edge_counts[t] << '\n';
    }
    std::cout << "wrote " << args.trace_path << '\n';
  }
  if (!args.svg_path.empty()) {
    graphem::io::SvgOptions svg;
    const auto labels = graphem::classify_points(x, result.params);
    svg.labels = &labels;
    graphem::io::plot_svg(x, result.params, result.graph, args.svg_path, svg);
    std::cout << "wrote " << args.svg_path << '\n';
  }
  return 0;
}

struct GenerateArgs {
  std::string kind;
  std::string output = "data.csv";
  int n = 2400;
  double bkg_frac = 0.25;
  double sigma_lo = 0.015;
  double sigma_hi = 0.15;
  int seeds = 12;
  int samples_per_edge = 150;
  double noise_sigma = 0.01;
  double voronoi_bkg_frac = 0.10;
  std::uint64_t seed = 0;
};

int run_generate(const GenerateArgs& args) {
  graphem::SyntheticSet set;
  if (args.kind == "three-branch") {
    set = graphem::gen_three_branch(args.n, args.bkg_frac, args.sigma_lo, args.sigma_hi, args.seed);
  } else if (args.kind == "voronoi") {
    set = graphem::gen_voronoi_pattern(args.seeds, args.samples_per_edge, args.noise_sigma,
                                       args.voronoi_bkg_frac, args.seed, &std::cerr);
  } else {
    throw CLI::ValidationError("kind", "expected 'three-branch' or 'voronoi'");
  }
  graphem::io::write_point_cloud(args.output, set.points);
  const std::string labels_path = stem_of(args.output) + ".labels.csv";
  graphem::io::write_labels(labels_path, set.labels);
  std::cout << "generated " << set.points.rows() << " points -> " << args.output << ", "
            << labels_path << '\n';
  if (set.truth_cycle_count) std::cout << "truth_cycle_count " << *set.truth_cycle_count << '\n';
  return 0;
}

struct ClassifyArgs {
  std::string input;
  std::string graph_doc;
  std::string output = "labels.csv";
  CommonIo io;
};

int run_classify(const ClassifyArgs& args) {
  require_input(args.input);
  require_input(args.graph_doc);
  const graphem::Matrix x =
      graphem::io::read_point_cloud(args.input, args.io.delimiter_char(), args.io.has_header);
  const auto doc = graphem::io::read_graph(args.graph_doc);
  const auto labels = graphem::classify_points(x, doc.params);
  graphem::io::write_labels(args.output, labels);
  long background = 0;
  for (auto label : labels) background += label == graphem::PointLabel::background;
  std::cout << "classified " << labels.size() << " points (" << background << " background) -> "
            << args.output << '\n';
  return 0;
}

struct EdgeFreqArgs {
  std::string input;
  std::string prefix;
  int ensemble = 500;
  double ratio = 0.75;
  int bins = 40;
  std::uint64_t seed = 0;
  CommonIo io;
};

int run_edge_freq(const EdgeFreqArgs& args) {
  require_input(args.input);
  const graphem::Matrix positions =
      graphem::io::read_point_cloud(args.input, args.io.delimiter_char(), args.io.has_header);
  const auto freq = graphem::edge_frequencies(positions, args.ensemble, args.ratio, args.seed);
  const std::string prefix = args.prefix.empty() ? stem_of(args.input) : args.prefix;
  graphem::io::write_edge_frequencies(prefix + ".freqs.csv", freq);
  graphem::io::write_frequency_histogram(prefix + ".hist.csv", freq, args.bins);
  long distinct = 0;
  for (graphem::Index i = 0; i < freq.entries.rows(); ++i) {
    for (graphem::Index j = i + 1; j < freq.entries.cols(); ++j) distinct += freq.entries(i, j) > 0.0;
  }
  std::cout << "observed " << distinct << " distinct edges over " << args.ensemble
            << " subsamples -> " << prefix << ".freqs.csv, " << prefix << ".hist.csv\n";
  return 0;
}

struct PlotArgs {
  std::string input;
  std::string graph_doc;
  std::string output = "plot.svg";
  std::string labels_path;
  bool no_sigma = false;
  bool no_points = false;
  CommonIo io;
};

int run_plot(const PlotArgs& args) {
  require_input(args.input);
  require_input(args.graph_doc);
  const graphem::Matrix x =
      graphem::io::read_point_cloud(args.input, args.io.delimiter_char(), args.io.has_header);
  const auto doc = graphem::io::read_graph(args.graph_doc);
  graphem::io::SvgOptions options;
  options.draw_sigma_circles = !args.no_sigma;
  options.draw_points = !args.no_points;
  std::vector<graphem::PointLabel> labels;
  if (!args.labels_path.empty()) {
    require_input(args.labels_path);
    labels = graphem::io::read_labels(args.labels_path);
    options.labels = &labels;
  }
  graphem::io::plot_svg(x, doc.params, doc.graph, args.output, options);
  std::cout << "wrote " << args.output << '\n';
  return 0;
}

void add_io_flags(CLI::App* cmd, CommonIo& io) {
  cmd->add_option("--delimiter", io.delimiter, "field delimiter (single character)");
  cmd->add_flag("--header", io.has_header, "skip the first non-empty line");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphem: principal graph learning for point clouds"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "fit a principal graph to a CSV point cloud");
  fit_cmd->add_option("input", fit_args.input, "input CSV file")->required();
  fit_cmd->add_option("-o,--output", fit_args.output, "output graph document (default: <input>.graph)");
  fit_cmd->add_option("-K,--components", fit_args.k, "number of mixture components")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--lambda-mu", fit_args.lambda_mu,
                      "centroid smoothness strength, or 'auto' for 5/sigma0^2");
  fit_cmd->add_option("--lambda-sigma", fit_args.lambda_sigma, "variance smoothness strength")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--lambda-pi", fit_args.lambda_pi, "mixing weight prior strength")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--sigma0", fit_args.sigma0,
                      "initial variance sigma0^2 (default: mean 5-NN distance squared)")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--alpha0", fit_args.alpha0, "initial background weight")
      ->check(CLI::Range(0.0, 0.999999));
  fit_cmd->add_option("--epsilon", fit_args.epsilon, "convergence threshold on the increment")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--max-iters", fit_args.max_iters, "iteration cap")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--prior", fit_args.prior, "graph prior: mst or avg")
      ->check(CLI::IsMember({"mst", "avg"}));
  fit_cmd->add_option("--avg-B", fit_args.avg_ensemble, "subsampled MSTs in the average prior")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--avg-ratio", fit_args.avg_ratio, "subsample ratio K_b/K")
      ->check(CLI::Range(1e-6, 1.0));
  fit_cmd->add_option("--avg-threshold", fit_args.avg_threshold, "frequency threshold m")
      ->check(CLI::Range(0.0, 1.0));
  fit_cmd->add_option("--topology", fit_args.topology, "'fixed' or 'refresh:N' (default refresh:1)");
  fit_cmd->add_option("--seed", fit_args.seed, "random seed");
  fit_cmd->add_option("--svg", fit_args.svg_path, "also render the fit as SVG (D=2 only)");
  fit_cmd->add_option("--labels", fit_args.labels_path, "also write per-point labels");
  fit_cmd->add_option("--trace", fit_args.trace_path, "also write the per-iteration trace CSV");
  add_io_flags(fit_cmd, fit_args.io);

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic dataset with ground-truth labels");
  gen_cmd->add_option("kind", gen_args.kind, "three-branch or voronoi")->required();
  gen_cmd->add_option("-o,--output", gen_args.output, "output CSV path");
  gen_cmd->add_option("--n", gen_args.n, "total points (three-branch)")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--bkg-frac", gen_args.bkg_frac, "background fraction (three-branch)")
      ->check(CLI::Range(0.0, 0.999999));
  gen_cmd->add_option("--sigma-lo", gen_args.sigma_lo, "branch tip sigma")->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--sigma-hi", gen_args.sigma_hi, "branch center sigma")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--seeds", gen_args.seeds, "Voronoi seed count")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--samples-per-edge", gen_args.samples_per_edge, "mean samples per Voronoi edge")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--noise-sigma", gen_args.noise_sigma, "jitter around the Voronoi skeleton")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--voronoi-bkg-frac", gen_args.voronoi_bkg_frac, "background fraction (voronoi)")
      ->check(CLI::Range(0.0, 0.999999));
  gen_cmd->add_option("--seed", gen_args.seed, "random seed");

  ClassifyArgs classify_args;
  auto* classify_cmd =
      app.add_subcommand("classify", "label CSV points as pattern/background under a fitted model");
  classify_cmd->add_option("input", classify_args.input, "input CSV file")->required();
  classify_cmd->add_option("graph", classify_args.graph_doc, "graph document from fit")->required();
  classify_cmd->add_option("-o,--output", classify_args.output, "output labels file");
  add_io_flags(classify_cmd, classify_args.io);

  EdgeFreqArgs freq_args;
  auto* freq_cmd =
      app.add_subcommand("edge-freq", "bootstrap MST edge frequencies and their histogram");
  freq_cmd->add_option("input", freq_args.input, "CSV of node positions")->required();
  freq_cmd->add_option("-o,--output-prefix", freq_args.prefix, "output prefix");
  freq_cmd->add_option("--avg-B", freq_args.ensemble, "number of subsampled MSTs")
      ->check(CLI::PositiveNumber);
  freq_cmd->add_option("--avg-ratio", freq_args.ratio, "subsample ratio")->check(CLI::Range(1e-6, 1.0));
  freq_cmd->add_option("--bins", freq_args.bins, "histogram bins")->check(CLI::PositiveNumber);
  freq_cmd->add_option("--seed", freq_args.seed, "random seed");
  add_io_flags(freq_cmd, freq_args.io);

  PlotArgs plot_args;
  auto* plot_cmd = app.add_subcommand("plot", "render a dataset and fitted graph as SVG");
  plot_cmd->add_option("input", plot_args.input, "input CSV file")->required();
  plot_cmd->add_option("graph", plot_args.graph_doc, "graph document from fit")->required();
  plot_cmd->add_option("-o,--output", plot_args.output, "output SVG path");
  plot_cmd->add_option("--labels", plot_args.labels_path, "labels file for point coloring");
  plot_cmd->add_flag("--no-sigma", plot_args.no_sigma, "skip the 1-sigma circles");
  plot_cmd->add_flag("--no-points", plot_args.no_points, "skip the data points");
  add_io_flags(plot_cmd, plot_args.io);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (gen_cmd->parsed()) return run_generate(gen_args);
    if (classify_cmd->parsed()) return run_classify(classify_args);
    if (freq_cmd->parsed()) return run_edge_freq(freq_args);
    if (plot_cmd->parsed()) return run_plot(plot_args);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const graphem::config_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const graphem::error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
