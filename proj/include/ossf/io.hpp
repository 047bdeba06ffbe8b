#pragma once

// Run configuration (single structured text file), the self-describing
// sample container, and the run manifest.
//
// Sample container layout: a text header terminated by END-HEADER, then
// a flat block of IEEE-754 float64 values in little-endian byte order,
// row = replicate, column group = point (m components per point).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ossf/fields.hpp"

namespace ossf {
namespace io {

using json = nlohmann::json;

inline constexpr const char* kLibraryVersion = "0.1.0";

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// FNV-1a over bytes; used for config digests and file checksums.
inline uint64_t fnv1a(const void* data, size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct RunConfig {
  fields::FieldSpec spec;
  std::vector<Vec> points;
  int replicates = 100;
  uint64_t seed = 0;
  std::string out_dir = "out";
  bool text_export = false;
  json raw;  // canonical parsed form

  std::string digest() const {
    const std::string s = raw.dump();  // nlohmann objects iterate sorted
    return hex64(fnv1a(s.data(), s.size()));
  }
};

namespace detail {

inline Mat parse_matrix(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw std::invalid_argument(std::string(what) +
                                ": expected a nested array (row-major)");
  const int r = static_cast<int>(j.size());
  const int c = static_cast<int>(j[0].size());
  Mat m(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(j[i].size()) != c)
      throw std::invalid_argument(std::string(what) + ": ragged rows");
    for (int k = 0; k < c; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

inline Vec parse_vector(const json& j, const char* what) {
  if (!j.is_array())
    throw std::invalid_argument(std::string(what) + ": expected an array");
  Vec v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

inline json matrix_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

inline json vector_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace detail

inline RunConfig parse_config(const json& j);

namespace detail {
inline RunConfig parse_config_impl(const json& j) {
  RunConfig cfg;
  cfg.raw = j;
  const json& f = j.at("field");
  cfg.spec.E =
      linops::Operator::from_matrix(detail::parse_matrix(f.at("E"), "field.E"));
  cfg.spec.D =
      linops::Operator::from_matrix(detail::parse_matrix(f.at("D"), "field.D"));
  cfg.spec.alpha = f.at("alpha").get<double>();

  const json& k = f.at("kernel");
  const std::string kind = k.at("kind").get<std::string>();
  if (kind == "sum_powers") {
    cfg.spec.kernel = homog::KernelSpec::sum_of_powers(
        detail::parse_vector(k.at("gammas"), "kernel.gammas"));
  } else {
    throw std::invalid_argument("kernel.kind: unknown kind '" + kind + "'");
  }
  if (k.contains("beta")) cfg.spec.kernel.beta = k.at("beta").get<double>();

  const std::string variant = f.at("variant").get<std::string>();
  if (variant == "moving_average")
    cfg.spec.variant = fields::Variant::moving_average;
  else if (variant == "harmonizable")
    cfg.spec.variant = fields::Variant::harmonizable;
  else
    throw std::invalid_argument("field.variant: unknown variant '" + variant +
                                "'");

  if (j.contains("quadrature")) {
    const json& q = j.at("quadrature");
    if (q.contains("r_out")) cfg.spec.quad.r_out = q.at("r_out").get<double>();
    if (q.contains("r_in")) cfg.spec.quad.r_in = q.at("r_in").get<double>();
    if (q.contains("shells")) cfg.spec.quad.shells = q.at("shells").get<int>();
    if (q.contains("points_per_shell"))
      cfg.spec.quad.points_per_shell = q.at("points_per_shell").get<int>();
    if (q.contains("rule")) {
      const std::string rule = q.at("rule").get<std::string>();
      if (rule == "shell_product")
        cfg.spec.quad.rule = integral::QuadratureSpec::Rule::shell_product;
      else if (rule == "midpoint_lattice")
        cfg.spec.quad.rule = integral::QuadratureSpec::Rule::midpoint_lattice;
      else
        throw std::invalid_argument("quadrature.rule: unknown rule '" + rule +
                                    "'");
    }
  }

  for (const auto& p : j.at("points"))
    cfg.points.push_back(detail::parse_vector(p, "points"));
  for (const auto& p : cfg.points)
    if (p.size() != cfg.spec.d())
      throw std::invalid_argument("points: dimension mismatch with field.E");

  cfg.replicates = j.at("replicates").get<int>();
  if (cfg.replicates < 1)
    throw std::invalid_argument("replicates: must be >= 1");
  cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("output")) {
    const json& o = j.at("output");
    if (o.contains("dir")) cfg.out_dir = o.at("dir").get<std::string>();
    if (o.contains("text_export"))
      cfg.text_export = o.at("text_export").get<bool>();
  }
  return cfg;
}
}  // namespace detail

inline RunConfig parse_config(const json& j) {
  try {
    return detail::parse_config_impl(j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

/// Canonical serialized form: parse(serialize(cfg)) == cfg.raw.
inline json serialize_config(const RunConfig& cfg) { return cfg.raw; }

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config parse error: ") +
                                e.what());
  }
  return parse_config(j);
}

/// Apply "dotted.path=value" onto the raw config JSON. The value is parsed
/// as JSON when possible, otherwise taken as a string.
inline void apply_override(json& j, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override must be KEY=VALUE: " + kv);
  const std::string path = kv.substr(0, eq);
  const std::string val = kv.substr(eq + 1);
  json* node = &j;
  size_t at = 0;
  while (true) {
    const auto dot = path.find('.', at);
    const std::string key = path.substr(at, dot - at);
    if (key.empty()) throw std::invalid_argument("bad override path: " + kv);
    if (dot == std::string::npos) {
      json parsed = json::parse(val, nullptr, /*allow_exceptions=*/false);
      (*node)[key] = parsed.is_discarded() ? json(val) : parsed;
      return;
    }
    node = &(*node)[key];
    at = dot + 1;
  }
}

// ---------------------------------------------------------------------
// Sample container.

inline void write_sample(const std::string& path,
                         const fields::FieldSample& sample,
                         const std::string& digest, double alpha) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write sample: " + path);
  const int np = static_cast<int>(sample.points.size());
  const int m = np ? static_cast<int>(sample.replicates.empty()
                                          ? 0
                                          : sample.replicates[0][0].size())
                   : 0;
  const int d = np ? static_cast<int>(sample.points[0].size()) : 0;
  out << "OSSF-SAMPLE 1\n";
  out << "digest " << digest << "\n";
  out << "seed " << sample.master_seed << "\n";
  out << "alpha " << std::setprecision(17) << alpha << "\n";
  out << "d " << d << "\n";
  out << "m " << m << "\n";
  out << "points " << np << "\n";
  out << "replicates " << sample.replicates.size() << "\n";
  for (int j = 0; j < np; ++j) {
    out << "point";
    for (int i = 0; i < d; ++i)
      out << " " << std::setprecision(17) << sample.points[j](i);
    out << "\n";
  }
  out << "layout row=replicate colgroup=point float64 little-endian\n";
  out << "END-HEADER\n";
  for (const auto& row : sample.replicates)
    for (const auto& v : row)
      out.write(reinterpret_cast<const char*>(v.data()),
                sizeof(double) * v.size());
  if (!out) throw IoError("write failed: " + path);
}

struct LoadedSample {
  std::string digest;
  uint64_t seed = 0;
  double alpha = 2.0;
  int d = 0, m = 0;
  std::vector<Vec> points;
  std::vector<std::vector<Vec>> replicates;
};

inline LoadedSample read_sample(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open sample: " + path);
  LoadedSample s;
  std::string line;
  if (!std::getline(in, line) || line != "OSSF-SAMPLE 1")
    throw IoError("not a sample file: " + path);
  int np = 0;
  long n_rep = 0;
  while (std::getline(in, line)) {
    if (line == "END-HEADER") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "digest") ls >> s.digest;
    else if (key == "seed") ls >> s.seed;
    else if (key == "alpha") ls >> s.alpha;
    else if (key == "d") ls >> s.d;
    else if (key == "m") ls >> s.m;
    else if (key == "points") ls >> np;
    else if (key == "replicates") ls >> n_rep;
    else if (key == "point") {
      Vec p(s.d);
      for (int i = 0; i < s.d; ++i) ls >> p(i);
      s.points.push_back(p);
    }
    // "layout" and unknown keys are informational.
  }
  if (static_cast<int>(s.points.size()) != np)
    throw IoError("sample header inconsistent: " + path);
  s.replicates.assign(n_rep, std::vector<Vec>(np, Vec::Zero(s.m)));
  for (auto& row : s.replicates)
    for (auto& v : row) {
      in.read(reinterpret_cast<char*>(v.data()), sizeof(double) * s.m);
      if (!in) throw IoError("sample block truncated: " + path);
    }
  return s;
}

/// Pure-text export: one line per (replicate, point) with components.
inline void write_sample_tsv(const std::string& path,
                             const fields::FieldSample& sample) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write export: " + path);
  out << "replicate\tpoint";
  const int m = sample.replicates.empty() || sample.replicates[0].empty()
                    ? 0
                    : static_cast<int>(sample.replicates[0][0].size());
  for (int i = 0; i < m; ++i) out << "\tx" << i;
  out << "\n";
  out << std::setprecision(17);
  for (size_t r = 0; r < sample.replicates.size(); ++r)
    for (size_t j = 0; j < sample.replicates[r].size(); ++j) {
      out << r << "\t" << j;
      for (int i = 0; i < m; ++i) out << "\t" << sample.replicates[r][j](i);
      out << "\n";
    }
  if (!out) throw IoError("write failed: " + path);
}

inline uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot checksum: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string s = buf.str();
  return fnv1a(s.data(), s.size());
}

// ---------------------------------------------------------------------
// Run manifest.

struct RunManifest {
  std::string config_digest;
  json wall_times = json::object();   // stage -> seconds
  json error_proxies = json::object();
  json verdicts = json::object();
  std::vector<std::string> files;  // paths relative to the out dir

  void write(const std::string& out_dir) const {
    json j;
    j["config_digest"] = config_digest;
    j["library_version"] = kLibraryVersion;
    j["wall_times_sec"] = wall_times;
    j["error_proxies"] = error_proxies;
    j["verdicts"] = verdicts;
    json fj = json::object();
    for (const auto& f : files)
      fj[f] = hex64(file_checksum(out_dir + "/" + f));
    j["files"] = fj;
    const std::string path = out_dir + "/manifest.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
  }
};

}  // namespace io
}  // namespace ossf
