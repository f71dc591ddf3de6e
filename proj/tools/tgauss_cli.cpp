// tgauss: command-line front end.
//
// Exit codes: 0 success, 1 domain error (validation, degeneracy),
// 2 format, I/O or usage error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tgauss/tgauss.hpp"

namespace fs = std::filesystem;
using namespace tgauss;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitFormat = 2;

TensorGaussianParams load_params(const std::string& path) {
  TensorGaussianParams p = params_from_json(parse_json(read_text(path)));
  require_valid(p);
  return p;
}

MultiTensorGaussianParams load_multi_params(const std::string& path) {
  MultiTensorGaussianParams p = multi_params_from_json(parse_json(read_text(path)));
  require_valid(p);
  return p;
}

// Writes to `path`, or stdout when empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_text(path, text);
  }
}

void warn_identifiability(const Shape& shape, std::size_t t) {
  if (!identifiability_check(shape, t)) std::cerr << identifiability_warning(shape, t) << "\n";
}

struct SampleOpts {
  std::string params, out;
  std::size_t count = 1;
  std::uint64_t seed = 42;
};

void run_sample(const SampleOpts& o) {
  write_dataset(o.out, sample(load_params(o.params), o.count, o.seed));
}

struct FitOpts {
  std::string dataset, out;
  bool no_bessel = false;
};

void run_fit(const FitOpts& o) {
  const SampleSet data = read_dataset(o.dataset);
  warn_identifiability(data.shape(), data.size());
  const EstimationReport r = fit(data, !o.no_bessel);
  if (r.degenerate) std::cerr << "warning: zero residual variance; theta is undefined\n";
  emit(o.out, dump_json(report_to_json(r)));
}

struct LogpdfOpts {
  std::string params, dataset, out;
};

void run_logpdf(const LogpdfOpts& o) {
  const TensorGaussian dist(load_params(o.params));
  const SampleSet data = read_dataset(o.dataset);
  std::ostringstream os;
  CsvWriter csv(os);
  csv.row("sample", "log_pdf");
  double total = 0.0;
  for (std::size_t t = 0; t < data.size(); ++t) {
    const double v = dist.log_pdf(data[t]);
    total += v;
    csv.row(t + 1, v);
  }
  csv.row("total", total);
  emit(o.out, os.str());
}

struct FlipFlopOpts {
  std::string dataset, out;
  std::size_t max_iters = 100;
  double tol = 1e-6;
};

void run_flipflop(const FlipFlopOpts& o) {
  const SampleSet data = read_dataset(o.dataset);
  warn_identifiability(data.shape(), data.size());
  FlipFlopOptions opt;
  opt.max_iters = o.max_iters;
  opt.tol = o.tol;
  const FlipFlopResult ff = flip_flop_fit(data, opt);
  const EstimationReport cf = fit(data, false);

  json j = legacy_to_json(ff.params);
  j["iterations"] = ff.iterations;
  j["converged"] = ff.converged;
  j["log_likelihood"] = legacy_log_likelihood(ff.params, data);
  if (!cf.degenerate) j["closed_form_log_likelihood"] = log_likelihood(cf.params, data);
  if (!o.out.empty()) write_text(o.out, dump_json(j));

  std::cout << "flip-flop iterations: " << ff.iterations << (ff.converged ? " (converged)\n" : " (not converged)\n");
  std::cout << "flip-flop log-likelihood: " << format_real(j["log_likelihood"].get<double>()) << "\n";
  if (!cf.degenerate)
    std::cout << "closed-form log-likelihood: "
              << format_real(j["closed_form_log_likelihood"].get<double>()) << "\n";
}

struct ConsistencyCliOpts {
  std::vector<std::size_t> shape{2, 3, 4};
  std::vector<std::size_t> sizes{10, 100, 1000, 10000};
  std::size_t trials = 200;
  std::uint64_t seed = 42;
  bool no_bessel = false;
  std::string out;
};

void run_consistency(const ConsistencyCliOpts& o) {
  ConsistencyOptions opt;
  opt.shape = o.shape;
  opt.sizes = o.sizes;
  opt.trials = o.trials;
  opt.seed = o.seed;
  opt.bessel = !o.no_bessel;
  if (opt.trials == 0) throw InvalidParameters("trials must be positive");
  for (std::size_t t : opt.sizes)
    if (t == 0) throw InvalidParameters("sample sizes must be positive");
  std::ostringstream os;
  CsvWriter csv(os);
  csv.row("parameter", "T", "trials", "variance");
  for (const auto& r : consistency_experiment(opt)) csv.row(r.parameter, r.T, r.trials, r.variance);
  emit(o.out, os.str());
}

struct CountOpts {
  std::vector<std::size_t> shape;
  std::vector<std::size_t> i_range{2, 10};
  std::vector<std::size_t> n_range{1, 8};
  std::string out;
};

void run_params_count(const CountOpts& o) {
  std::ostringstream os;
  CsvWriter csv(os);
  if (!o.shape.empty()) {
    const ParamCounts c = param_counts(o.shape);
    csv.row("shape", "K", "eta_multi", "eta_tensor", "ratio", "mean_full", "mean_rank1");
    std::string s;
    for (std::size_t i = 0; i < o.shape.size(); ++i) s += (i ? "x" : "") + std::to_string(o.shape[i]);
    csv.row(s, element_count(o.shape), c.eta_multi, c.eta_tensor, c.ratio,
            static_cast<std::size_t>(c.mean_full), static_cast<std::size_t>(c.mean_rank1));
  } else {
    if (o.i_range.size() != 2 || o.n_range.size() != 2 || o.i_range[0] == 0 || o.n_range[0] == 0 ||
        o.i_range[0] > o.i_range[1] || o.n_range[0] > o.n_range[1])
      throw InvalidParameters("--I and --N take positive ranges lo,hi");
    csv.row("I", "N", "eta_multi", "eta_tensor", "ratio");
    for (const auto& r : param_count_sweep(o.i_range[0], o.i_range[1], o.n_range[0], o.n_range[1]))
      csv.row(r.I, r.N, r.counts.eta_multi, r.counts.eta_tensor, r.counts.ratio);
  }
  emit(o.out, os.str());
}

struct AnalyzeOpts {
  std::string dataset, out;
  std::size_t topk = 0;
  bool no_bessel = false;
};

void run_analyze(const AnalyzeOpts& o) {
  const SampleSet data = read_dataset(o.dataset);
  warn_identifiability(data.shape(), data.size());
  const Analysis a = analyze(data, o.topk, !o.no_bessel);
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw FormatError("cannot create directory " + o.out + ": " + ec.message());

  std::ostringstream summary;
  CsvWriter s(summary);
  s.row("metric", "value");
  s.row("T", a.report.T);
  s.row("identifiable", a.report.identifiable ? 1 : 0);
  s.row("explained_variance", a.report.rank1_explained_variance);
  s.row("alpha", a.report.params.alpha);
  s.row("sigma2", a.report.params.sigma2);
  write_text((fs::path(o.out) / "summary.csv").string(), summary.str());

  std::ostringstream values, vectors;
  CsvWriter v(values), u(vectors);
  v.row("mode", "index", "eigenvalue");
  u.row("mode", "index", "element", "value");
  for (const auto& sp : a.spectra) {
    for (Eigen::Index i = 0; i < sp.eigenvalues.size(); ++i) {
      v.row(sp.mode + 1, static_cast<std::size_t>(i + 1), sp.eigenvalues[i]);
      for (Eigen::Index e = 0; e < sp.eigenvectors.rows(); ++e)
        u.row(sp.mode + 1, static_cast<std::size_t>(i + 1), static_cast<std::size_t>(e + 1),
              sp.eigenvectors(e, i));
    }
  }
  write_text((fs::path(o.out) / "eigenvalues.csv").string(), values.str());
  write_text((fs::path(o.out) / "eigenvectors.csv").string(), vectors.str());
  std::cout << "explained variance: " << format_real(a.report.rank1_explained_variance) << "\n";
}

struct FieldOpts {
  std::string kernels, out, params;
  std::size_t count = 1;
  std::uint64_t seed = 42;
};

void run_field_gen(const FieldOpts& o) {
  const FieldSpec field = field_spec_from_json(parse_json(read_text(o.kernels)));
  const FieldParams fp = field_to_params(field.kernels, field.grid);
  if (fp.degenerate_mean) std::cerr << "warning: an axis mean vanishes on the grid; alpha = 0\n";
  write_text(o.params, dump_json(params_to_json(fp.params)));
  write_dataset(o.out, sample(fp.params, o.count, o.seed));
}

struct MultiFitOpts {
  std::vector<std::string> datasets;
  std::string out;
  bool no_bessel = false;
};

void run_multi_fit(const MultiFitOpts& o) {
  std::vector<SampleSet> sets;
  for (const auto& d : o.datasets) sets.push_back(read_dataset(d));
  const MultiSampleSet data(std::move(sets));
  warn_identifiability(data.shape(), data.size());
  const MultiFitReport r = multi_fit(data, !o.no_bessel);
  json j = multi_params_to_json(r.params);
  j["T"] = r.T;
  j["bessel"] = r.bessel_applied;
  j["identifiable"] = r.identifiable;
  emit(o.out, dump_json(j));
}

struct MultiSampleOpts {
  std::string params;
  std::vector<std::string> out;
  std::size_t count = 1;
  std::uint64_t seed = 42;
};

void run_multi_sample(const MultiSampleOpts& o) {
  const MultiTensorGaussianParams p = load_multi_params(o.params);
  if (o.out.size() != p.variates())
    throw InvalidParameters("need one --out path per variate (" + std::to_string(p.variates()) + ")");
  const MultiSampleSet data = multi_sample(p, o.count, o.seed);
  for (std::size_t i = 0; i < p.variates(); ++i) write_dataset(o.out[i], data[i]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identifiable tensor-valued Gaussian toolkit"};
  app.require_subcommand(1);

  SampleOpts so;
  auto* sample_cmd = app.add_subcommand("sample", "Draw samples from a parameter file");
  sample_cmd->add_option("params", so.params, "Parameter JSON")->required();
  sample_cmd->add_option("--count,-T", so.count, "Number of samples")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", so.seed, "RNG seed");
  sample_cmd->add_option("--out,-o", so.out, "Output dataset")->required();

  FitOpts fo;
  auto* fit_cmd = app.add_subcommand("fit", "Closed-form ML fit of a dataset");
  fit_cmd->add_option("dataset", fo.dataset)->required();
  fit_cmd->add_flag("--no-bessel", fo.no_bessel, "Skip Bessel's correction of sigma2");
  fit_cmd->add_option("--out,-o", fo.out, "Report JSON (default stdout)");

  LogpdfOpts lo;
  auto* logpdf_cmd = app.add_subcommand("logpdf", "Log-density of every sample");
  logpdf_cmd->add_option("params", lo.params)->required();
  logpdf_cmd->add_option("dataset", lo.dataset)->required();
  logpdf_cmd->add_option("--out,-o", lo.out, "CSV (default stdout)");

  FlipFlopOpts ffo;
  auto* ff_cmd = app.add_subcommand("flipflop", "Flip-flop fit, compared with the closed form");
  ff_cmd->add_option("dataset", ffo.dataset)->required();
  ff_cmd->add_option("--max-iters", ffo.max_iters);
  ff_cmd->add_option("--tol", ffo.tol);
  ff_cmd->add_option("--out,-o", ffo.out, "Legacy parameter JSON");

  ConsistencyCliOpts co;
  auto* cons_cmd = app.add_subcommand("consistency", "Monte Carlo estimation variance versus T");
  cons_cmd->add_option("--shape", co.shape)->delimiter(',');
  cons_cmd->add_option("--T-list", co.sizes)->delimiter(',');
  cons_cmd->add_option("--trials", co.trials);
  cons_cmd->add_option("--seed", co.seed);
  cons_cmd->add_flag("--no-bessel", co.no_bessel);
  cons_cmd->add_option("--out,-o", co.out, "CSV (default stdout)");

  CountOpts pc;
  auto* count_cmd = app.add_subcommand("params-count", "Distinct parameter counts");
  count_cmd->add_option("--shape", pc.shape, "One shape; otherwise sweep I and N")->delimiter(',');
  count_cmd->add_option("--I", pc.i_range, "Range lo,hi")->delimiter(',');
  count_cmd->add_option("--N", pc.n_range, "Range lo,hi")->delimiter(',');
  count_cmd->add_option("--out,-o", pc.out, "CSV (default stdout)");

  AnalyzeOpts ao;
  auto* analyze_cmd = app.add_subcommand("analyze", "Explained variance and per-mode eigenstructure");
  analyze_cmd->add_option("dataset", ao.dataset)->required();
  analyze_cmd->add_option("--topk", ao.topk, "Eigenpairs per mode, 0 = all");
  analyze_cmd->add_flag("--no-bessel", ao.no_bessel);
  analyze_cmd->add_option("--out,-o", ao.out, "Output directory")->required();

  FieldOpts fgo;
  auto* field_cmd = app.add_subcommand("field-gen", "Sample a separable field from a kernel file");
  field_cmd->add_option("kernels", fgo.kernels)->required();
  field_cmd->add_option("--count,-T", fgo.count)->check(CLI::PositiveNumber);
  field_cmd->add_option("--seed", fgo.seed);
  field_cmd->add_option("--out,-o", fgo.out, "Output dataset")->required();
  field_cmd->add_option("--params", fgo.params, "Ground-truth parameter JSON")->required();

  MultiFitOpts mfo;
  auto* mfit_cmd = app.add_subcommand("multi-fit", "Closed-form ML fit of M aligned datasets");
  mfit_cmd->add_option("datasets", mfo.datasets)->required();
  mfit_cmd->add_flag("--no-bessel", mfo.no_bessel);
  mfit_cmd->add_option("--out,-o", mfo.out, "Parameter JSON (default stdout)");

  MultiSampleOpts mso;
  auto* msample_cmd = app.add_subcommand("multi-sample", "Draw from a multivariate parameter file");
  msample_cmd->add_option("params", mso.params)->required();
  msample_cmd->add_option("--count,-T", mso.count)->check(CLI::PositiveNumber);
  msample_cmd->add_option("--seed", mso.seed);
  msample_cmd->add_option("--out,-o", mso.out, "One dataset per variate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitFormat;
  }

  try {
    if (*sample_cmd) run_sample(so);
    else if (*fit_cmd) run_fit(fo);
    else if (*logpdf_cmd) run_logpdf(lo);
    else if (*ff_cmd) run_flipflop(ffo);
    else if (*cons_cmd) run_consistency(co);
    else if (*count_cmd) run_params_count(pc);
    else if (*analyze_cmd) run_analyze(ao);
    else if (*field_cmd) run_field_gen(fgo);
    else if (*mfit_cmd) run_multi_fit(mfo);
    else if (*msample_cmd) run_multi_sample(mso);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_format_error() ? kExitFormat : kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  }
  return 0;
}
