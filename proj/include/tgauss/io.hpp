#pragma once

// File formats.
//
// Binary tensor datasets ("TGTB", all integers and reals little-endian):
//
//   offset  size    field
//   0       4       magic "TGTB"
//   4       4       version, u32 = 1
//   8       4       order N, u32
//   12      8*N     dims I_1..I_N, u64 each
//   12+8N   8       sample count T, u64
//   20+8N   8*T*K   payload: IEEE-754 binary64, each sample mode-1 fastest,
//                   samples consecutive
//
// Parameter files are JSON documents with reals printed to 17 significant
// digits, so every value survives a write/read cycle bit-exactly.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgauss/distribution.hpp"
#include "tgauss/errors.hpp"
#include "tgauss/estimation.hpp"
#include "tgauss/fields.hpp"
#include "tgauss/multivariate.hpp"
#include "tgauss/tensor.hpp"

namespace tgauss {

using json = nlohmann::json;

inline constexpr std::uint32_t kDatasetVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xFF));
}

inline std::uint64_t get_le(std::istream& is, int bytes, const char* what) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), bytes);
  if (is.gcount() != bytes) throw FormatError(std::string("truncated dataset: missing ") + what);
  std::uint64_t v = 0;
  for (int b = bytes - 1; b >= 0; --b) v = (v << 8) | buf[b];
  return v;
}

}  // namespace detail

inline void write_dataset(std::ostream& os, const SampleSet& data) {
  os.write("TGTB", 4);
  detail::put_u32(os, kDatasetVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(data.shape().size()));
  for (std::size_t in : data.shape()) detail::put_u64(os, in);
  detail::put_u64(os, data.size());
  for (const auto& x : data)
    for (double v : x.data()) detail::put_u64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw FormatError("failed writing dataset");
}

inline SampleSet read_dataset(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() == 0) throw FormatError("empty dataset file");
  if (is.gcount() != 4 || std::string(magic, 4) != "TGTB")
    throw FormatError("not a TGTB dataset (bad magic)");
  const auto version = static_cast<std::uint32_t>(detail::get_le(is, 4, "version"));
  if (version != kDatasetVersion)
    throw FormatError("unsupported dataset version " + std::to_string(version));
  const auto order = static_cast<std::uint32_t>(detail::get_le(is, 4, "order"));
  if (order == 0) throw FormatError("dataset order must be at least 1");
  Shape shape;
  std::uint64_t k = 1;
  for (std::uint32_t n = 0; n < order; ++n) {
    const std::uint64_t d = detail::get_le(is, 8, "dimension");
    if (d == 0) throw FormatError("dataset dimension " + std::to_string(n + 1) + " is zero");
    if (k > (std::uint64_t{1} << 40) / d) throw FormatError("dataset dimensions too large");
    k *= d;
    shape.push_back(static_cast<std::size_t>(d));
  }
  const std::uint64_t t = detail::get_le(is, 8, "sample count");
  if (t == 0) throw FormatError("dataset holds no samples");
  std::vector<DenseTensor> samples;
  samples.reserve(static_cast<std::size_t>(t));
  std::vector<char> buf(static_cast<std::size_t>(8 * k));
  for (std::uint64_t s = 0; s < t; ++s) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size())
      throw FormatError("payload shorter than " + std::to_string(t) + " samples of " +
                        std::to_string(k) + " reals");
    std::vector<double> d(static_cast<std::size_t>(k));
    for (std::size_t e = 0; e < d.size(); ++e) {
      std::uint64_t v = 0;
      for (int b = 7; b >= 0; --b) v = (v << 8) | static_cast<unsigned char>(buf[8 * e + static_cast<std::size_t>(b)]);
      d[e] = std::bit_cast<double>(v);
    }
    samples.emplace_back(shape, std::move(d));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after dataset payload");
  return SampleSet(shape, std::move(samples));
}

inline void write_dataset(const std::string& path, const SampleSet& data) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  write_dataset(os, data);
}

inline SampleSet read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return read_dataset(is);
}

// ---------------------------------------------------------------------------
// JSON

inline std::string format_real(double v) {
  if (!std::isfinite(v)) throw FormatError("cannot serialize non-finite value");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void write_json(std::ostream& os, const json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      os << "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        os << pad << json(it.key()).dump() << ": ";
        write_json(os, it.value(), indent, depth + 1);
        os << (i + 1 < j.size() ? ",\n" : "\n");
      }
      os << close << "}";
      break;
    }
    case json::value_t::array: {
      // arrays of scalars stay on one line
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      os << "[";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (!flat) os << "\n" << pad;
        write_json(os, j[i], indent, depth + 1);
        if (i + 1 < j.size()) os << (flat ? ", " : ",");
      }
      if (!flat && !j.empty()) os << "\n" << close;
      os << "]";
      break;
    }
    case json::value_t::number_float:
      os << format_real(j.get<double>());
      break;
    default:
      os << j.dump();
  }
}

inline json vector_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(row);
  }
  return rows;
}

inline const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  return j.at(key);
}

inline double real_of(const json& j, const char* what) {
  if (!j.is_number()) throw FormatError(std::string("field '") + what + "' must be a number");
  return j.get<double>();
}

inline std::size_t count_of(const json& j, const char* what) {
  if (!j.is_number_unsigned()) throw FormatError(std::string("field '") + what + "' must be a nonnegative integer");
  return j.get<std::size_t>();
}

inline bool bool_of(const json& j, const char* what) {
  if (!j.is_boolean()) throw FormatError(std::string("field '") + what + "' must be true or false");
  return j.get<bool>();
}

inline std::string string_of(const json& j, const char* what) {
  if (!j.is_string()) throw FormatError(std::string("field '") + what + "' must be a string");
  return j.get<std::string>();
}

inline Vector vector_of(const json& j, const char* what) {
  if (!j.is_array()) throw FormatError(std::string("field '") + what + "' must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = real_of(j[i], what);
  return v;
}

inline Matrix matrix_of(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw FormatError(std::string("field '") + what + "' must be a nested array");
  const std::size_t rows = j.size(), cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols)
      throw FormatError(std::string("field '") + what + "' has ragged rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = real_of(j[i][c], what);
  }
  return m;
}

inline Shape shape_of(const json& j) {
  if (!j.is_array() || j.empty()) throw FormatError("field 'shape' must be a nonempty array");
  Shape s;
  for (const auto& d : j) {
    if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0)
      throw FormatError("field 'shape' must hold positive integers");
    s.push_back(d.get<std::size_t>());
  }
  return s;
}

inline json shape_json(const Shape& s) {
  json a = json::array();
  for (std::size_t d : s) a.push_back(d);
  return a;
}

}  // namespace detail

inline std::string dump_json(const json& j) {
  std::ostringstream os;
  detail::write_json(os, j, 2, 0);
  os << "\n";
  return os.str();
}

inline json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed JSON: ") + e.what());
  }
}

inline std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << text;
  if (!os) throw FormatError("failed writing " + path);
}

inline json params_to_json(const TensorGaussianParams& p) {
  json j = json::object();
  j["shape"] = detail::shape_json(p.shape);
  j["alpha"] = p.alpha;
  j["mu"] = json::array();
  for (const auto& m : p.mus) j["mu"].push_back(detail::vector_json(m));
  j["sigma2"] = p.sigma2;
  if (p.thetas.empty()) {
    j["theta"] = nullptr;
  } else {
    j["theta"] = json::array();
    for (const auto& t : p.thetas) j["theta"].push_back(detail::matrix_json(t));
  }
  return j;
}

/// Parses shape, alpha, mu, sigma2, theta. Constraint checking is left to
/// validate(); only structural problems raise FormatError.
inline TensorGaussianParams params_from_json(const json& j) {
  TensorGaussianParams p;
  p.shape = detail::shape_of(detail::field(j, "shape"));
  p.alpha = detail::real_of(detail::field(j, "alpha"), "alpha");
  p.sigma2 = detail::real_of(detail::field(j, "sigma2"), "sigma2");
  const json& mu = detail::field(j, "mu");
  if (!mu.is_array()) throw FormatError("field 'mu' must be an array of vectors");
  for (const auto& m : mu) p.mus.push_back(detail::vector_of(m, "mu"));
  const json& theta = detail::field(j, "theta");
  if (!theta.is_null()) {
    if (!theta.is_array()) throw FormatError("field 'theta' must be an array of matrices");
    for (const auto& t : theta) p.thetas.push_back(detail::matrix_of(t, "theta"));
  }
  return p;
}

inline json report_to_json(const EstimationReport& r) {
  json j = params_to_json(r.params);
  j["T"] = r.T;
  j["bessel"] = r.bessel_applied;
  j["identifiable"] = r.identifiable;
  j["explained_variance"] = r.rank1_explained_variance;
  j["sigma2_raw"] = r.sigma2_raw;
  j["degenerate"] = r.degenerate;
  return j;
}

inline EstimationReport report_from_json(const json& j) {
  EstimationReport r;
  r.params = params_from_json(j);
  r.T = detail::count_of(detail::field(j, "T"), "T");
  r.bessel_applied = detail::bool_of(detail::field(j, "bessel"), "bessel");
  r.identifiable = detail::bool_of(detail::field(j, "identifiable"), "identifiable");
  r.rank1_explained_variance = detail::real_of(detail::field(j, "explained_variance"), "explained_variance");
  if (j.contains("sigma2_raw")) r.sigma2_raw = detail::real_of(j["sigma2_raw"], "sigma2_raw");
  if (j.contains("degenerate")) r.degenerate = detail::bool_of(j["degenerate"], "degenerate");
  return r;
}

/// Multivariate parameters. `undefined` lists 1-based (i, j) pairs.
inline json multi_params_to_json(const MultiTensorGaussianParams& p) {
  json j = json::object();
  j["M"] = p.variates();
  j["shape"] = detail::shape_json(p.shape);
  j["alpha"] = json::array();
  for (double a : p.alphas) j["alpha"].push_back(a);
  j["mu"] = json::array();
  for (const auto& per_variate : p.mus) {
    json v = json::array();
    for (const auto& m : per_variate) v.push_back(detail::vector_json(m));
    j["mu"].push_back(v);
  }
  j["sigma_zz"] = detail::matrix_json(p.sigma);
  j["theta_zz"] = json::array();
  for (const auto& t : p.thetas) {
    json grid = json::array();
    for (std::size_t r = 0; r < t.partitions(); ++r) {
      json row = json::array();
      for (std::size_t c = 0; c < t.partitions(); ++c) row.push_back(detail::matrix_json(t.block(r, c)));
      grid.push_back(row);
    }
    j["theta_zz"].push_back(grid);
  }
  j["undefined"] = json::array();
  for (auto [a, b] : p.undefined) j["undefined"].push_back(json::array({a + 1, b + 1}));
  return j;
}

inline MultiTensorGaussianParams multi_params_from_json(const json& j) {
  MultiTensorGaussianParams p;
  const std::size_t m = detail::count_of(detail::field(j, "M"), "M");
  p.shape = detail::shape_of(detail::field(j, "shape"));
  const json& alpha = detail::field(j, "alpha");
  const json& mu = detail::field(j, "mu");
  if (!alpha.is_array() || alpha.size() != m) throw FormatError("field 'alpha' must hold M values");
  if (!mu.is_array() || mu.size() != m) throw FormatError("field 'mu' must hold M vector lists");
  for (std::size_t i = 0; i < m; ++i) {
    p.alphas.push_back(detail::real_of(alpha[i], "alpha"));
    std::vector<Vector> v;
    if (!mu[i].is_array()) throw FormatError("field 'mu' must hold M vector lists");
    for (const auto& e : mu[i]) v.push_back(detail::vector_of(e, "mu"));
    p.mus.push_back(std::move(v));
  }
  p.sigma = detail::matrix_of(detail::field(j, "sigma_zz"), "sigma_zz");
  const json& theta = detail::field(j, "theta_zz");
  if (!theta.is_array()) throw FormatError("field 'theta_zz' must be an array over modes");
  for (const auto& grid : theta) {
    if (!grid.is_array() || grid.size() != m) throw FormatError("theta_zz grids must be M x M");
    std::vector<std::vector<Matrix>> blocks(m);
    for (std::size_t r = 0; r < m; ++r) {
      if (!grid[r].is_array() || grid[r].size() != m) throw FormatError("theta_zz grids must be M x M");
      for (std::size_t c = 0; c < m; ++c) blocks[r].push_back(detail::matrix_of(grid[r][c], "theta_zz"));
    }
    try {
      p.thetas.push_back(BlockMatrix::from_blocks(blocks));
    } catch (const ShapeError& e) {
      throw FormatError(std::string("theta_zz: ") + e.what());
    }
  }
  if (j.contains("undefined")) {
    if (!j["undefined"].is_array()) throw FormatError("field 'undefined' must be an array");
    for (const auto& pair : j["undefined"]) {
      if (!pair.is_array() || pair.size() != 2) throw FormatError("undefined entries must be [i, j] pairs");
      const auto a = detail::count_of(pair[0], "undefined"), b = detail::count_of(pair[1], "undefined");
      if (a == 0 || b == 0) throw FormatError("undefined pairs are 1-based");
      p.undefined.emplace_back(std::min(a, b) - 1, std::max(a, b) - 1);
    }
  }
  return p;
}

inline json legacy_to_json(const LegacyKroneckerParams& p) {
  json j = json::object();
  j["shape"] = detail::shape_json(p.mean.shape());
  j["mean"] = json::array();
  for (double v : p.mean.data()) j["mean"].push_back(v);
  j["R"] = json::array();
  for (const auto& r : p.covs) j["R"].push_back(detail::matrix_json(r));
  return j;
}

inline LegacyKroneckerParams legacy_from_json(const json& j) {
  const Shape shape = detail::shape_of(detail::field(j, "shape"));
  const Vector mean = detail::vector_of(detail::field(j, "mean"), "mean");
  LegacyKroneckerParams p;
  try {
    p.mean = tensorize(mean, shape);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("mean: ") + e.what());
  }
  const json& rs = detail::field(j, "R");
  if (!rs.is_array()) throw FormatError("field 'R' must be an array of matrices");
  for (const auto& r : rs) p.covs.push_back(detail::matrix_of(r, "R"));
  return p;
}

/// Kernel/grid file:
///   {"axes": [{"coords": [...],
///              "mean": {"form": "constant|linear|gaussian-bump", "params": {...}},
///              "cov":  {"form": "squared-exponential|white", "params": {...}}}, ...]}
struct FieldSpec {
  std::vector<AxisKernel> kernels;
  CoordinateGrid grid;
};

namespace detail {

inline double param(const json& params, const char* key, double fallback, bool required) {
  if (params.is_object() && params.contains(key)) return real_of(params[key], key);
  if (required) throw FormatError(std::string("kernel parameter '") + key + "' is required");
  return fallback;
}

}  // namespace detail

inline FieldSpec field_spec_from_json(const json& j) {
  const json& axes = detail::field(j, "axes");
  if (!axes.is_array() || axes.empty()) throw FormatError("field 'axes' must be a nonempty array");
  std::vector<AxisKernel> kernels;
  std::vector<std::vector<double>> coords;
  for (const auto& a : axes) {
    const Vector c = detail::vector_of(detail::field(a, "coords"), "coords");
    coords.emplace_back(c.data(), c.data() + c.size());

    const json& mean = detail::field(a, "mean");
    const std::string mform = detail::string_of(detail::field(mean, "form"), "form");
    const json mp = mean.value("params", json::object());
    AxisKernel k;
    if (mform == "constant") {
      k.mean = ConstantMean{detail::param(mp, "value", 0.0, true)};
    } else if (mform == "linear") {
      k.mean = LinearMean{detail::param(mp, "intercept", 0.0, true), detail::param(mp, "slope", 0.0, true)};
    } else if (mform == "gaussian-bump") {
      k.mean = GaussianBumpMean{detail::param(mp, "offset", 0.0, false),
                                detail::param(mp, "amplitude", 0.0, true),
                                detail::param(mp, "center", 0.0, true),
                                detail::param(mp, "width", 0.0, true)};
    } else {
      throw FormatError("unknown mean form '" + mform + "'");
    }

    const json& cov = detail::field(a, "cov");
    const std::string cform = detail::string_of(detail::field(cov, "form"), "form");
    const json cp = cov.value("params", json::object());
    if (cform == "squared-exponential") {
      k.cov = SquaredExponentialCov{detail::param(cp, "scale", 0.0, true),
                                    detail::param(cp, "length", 0.0, true),
                                    detail::param(cp, "nugget", 0.0, false)};
    } else if (cform == "white") {
      k.cov = WhiteCov{detail::param(cp, "scale", 0.0, true)};
    } else {
      throw FormatError("unknown covariance form '" + cform + "'");
    }
    kernels.push_back(k);
  }
  return {std::move(kernels), CoordinateGrid(std::move(coords))};
}

}  // namespace tgauss

namespace tgauss {

/// Comma-separated rows with LF endings; reals at 17 significant digits.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  CsvWriter& field(const std::string& s) {
    sep();
    os_ << s;
    return *this;
  }
  CsvWriter& field(const char* s) { return field(std::string(s)); }
  CsvWriter& field(double v) { return field(format_real(v)); }
  CsvWriter& field(std::size_t v) { return field(std::to_string(v)); }
  CsvWriter& field(int v) { return field(std::to_string(v)); }

  template <typename... Ts>
  void row(const Ts&... values) {
    (field(values), ...);
    end();
  }

  void end() {
    os_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) os_ << ',';
    first_ = false;
  }

  std::ostream& os_;
  bool first_ = true;
};

}  // namespace tgauss
