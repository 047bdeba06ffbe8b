#pragma once

// Subcommand implementations behind the thin CLI main: simulate,
// verification suites, and plot-data emission. Exit codes are a stable
// contract: 0 pass, 1 verification failure, 2 invalid config, 3 field
// undefined (divergent finiteness functional), 4 IO failure.

#include <chrono>
#include <iostream>
#include <optional>

#include "ossf/io.hpp"
#include "ossf/verify.hpp"

namespace ossf {
namespace cli {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  int threads = 1;
};

namespace detail {

inline io::RunConfig load(const Options& opt) {
  std::ifstream in(opt.config_path);
  if (!in) throw io::IoError("cannot open config: " + opt.config_path);
  io::json j;
  try {
    in >> j;
  } catch (const io::json::exception& e) {
    throw std::invalid_argument(std::string("config parse error: ") +
                                e.what());
  }
  for (const auto& kv : opt.overrides) io::apply_override(j, kv);
  io::RunConfig cfg = io::parse_config(j);
  if (opt.seed) {
    cfg.seed = *opt.seed;
    cfg.raw["seed"] = *opt.seed;
  }
  if (opt.out_dir) cfg.out_dir = *opt.out_dir;
  return cfg;
}

inline double seconds_since(
    const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io::IoError("cannot create output dir: " + dir);
}

}  // namespace detail

/// Map an exception escaping a subcommand onto the exit-code contract.
template <typename F>
inline int guarded(F&& body) {
  try {
    return body();
  } catch (const io::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "field undefined: " << e.what() << "\n";
    return 3;
  }
}

inline int cmd_simulate(const Options& opt) {
  return guarded([&]() -> int {
    const auto t_start = std::chrono::steady_clock::now();
    io::RunConfig cfg = detail::load(opt);
    cfg.spec.validate();
    detail::ensure_dir(cfg.out_dir);

    io::RunManifest manifest;
    manifest.config_digest = cfg.digest();

    // Finiteness gate with the ladder diagnostic; divergent -> exit 3.
    auto t0 = std::chrono::steady_clock::now();
    double worst_proxy = 0.0;
    for (const auto& x : cfg.points) {
      const auto diag = fields::upsilon(cfg.spec, x);
      if (!diag.finite)
        throw std::runtime_error(
            "finiteness functional diverges at an evaluation point");
      worst_proxy = std::max(worst_proxy, diag.last_rel_change);
    }
    manifest.wall_times["finiteness_check"] = detail::seconds_since(t0);
    manifest.error_proxies["upsilon_ladder_rel_change"] = worst_proxy;

    t0 = std::chrono::steady_clock::now();
    auto sample = fields::simulate(cfg.spec, cfg.points, cfg.replicates,
                                   cfg.seed, opt.threads,
                                   /*check_upsilon=*/false);
    manifest.wall_times["simulate"] = detail::seconds_since(t0);
    manifest.error_proxies["r_out_used"] = sample.r_out_used;
    manifest.error_proxies["n_cells"] = sample.n_cells;

    t0 = std::chrono::steady_clock::now();
    io::write_sample(cfg.out_dir + "/sample.bin", sample,
                     manifest.config_digest, cfg.spec.alpha);
    manifest.files.push_back("sample.bin");
    if (cfg.text_export) {
      io::write_sample_tsv(cfg.out_dir + "/sample.tsv", sample);
      manifest.files.push_back("sample.tsv");
    }
    manifest.wall_times["persist"] = detail::seconds_since(t0);
    manifest.wall_times["total"] = detail::seconds_since(t_start);
    manifest.verdicts["simulate"] = "ok";
    manifest.write(cfg.out_dir);
    std::cout << "wrote " << cfg.out_dir << "/sample.bin ("
              << cfg.replicates << " replicates, " << cfg.points.size()
              << " points)\n";
    return 0;
  });
}

namespace detail {

inline int finish_suite(io::RunManifest& manifest, const std::string& out_dir,
                        const std::string& suite, bool pass,
                        const std::string& fail_reason = {}) {
  manifest.verdicts[suite] = pass ? "pass" : "fail";
  if (!pass && !fail_reason.empty()) manifest.verdicts["reason"] = fail_reason;
  manifest.write(out_dir);
  if (pass) {
    std::cout << suite << ": PASS\n";
    return 0;
  }
  std::cout << suite << ": FAIL"
            << (fail_reason.empty() ? "" : " (" + fail_reason + ")") << "\n";
  return 1;
}

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw io::IoError("cannot write report: " + path);
  out << body;
}

inline std::vector<Vec> nonzero_points(const io::RunConfig& cfg) {
  std::vector<Vec> pts;
  for (const auto& p : cfg.points)
    if (p.norm() > 0.0) pts.push_back(p);
  if (pts.empty())
    throw std::invalid_argument("suite needs at least one nonzero point");
  return pts;
}

}  // namespace detail

inline int cmd_verify(const std::string& suite, const Options& opt) {
  return guarded([&]() -> int {
    io::RunConfig cfg = detail::load(opt);
    detail::ensure_dir(cfg.out_dir);
    io::RunManifest manifest;
    manifest.config_digest = cfg.digest();
    const auto t0 = std::chrono::steady_clock::now();

    if (suite == "oss" || suite == "increments") {
      cfg.spec.validate();
      const auto pts = detail::nonzero_points(cfg);
      verify::EcfReport rep =
          suite == "oss"
              ? verify::oss_mc_test(cfg.spec, 2.0, pts, cfg.replicates,
                                    cfg.seed)
              : verify::stationary_increments_mc_test(
                    cfg.spec, pts.front(), pts, cfg.replicates, cfg.seed);
      std::ostringstream body;
      body << "theta_index\tlhs_re\tlhs_im\trhs_re\trhs_im\tz\n"
           << std::setprecision(10);
      for (size_t i = 0; i < rep.rows.size(); ++i)
        body << i << "\t" << rep.rows[i].lhs.real() << "\t"
             << rep.rows[i].lhs.imag() << "\t" << rep.rows[i].rhs.real()
             << "\t" << rep.rows[i].rhs.imag() << "\t" << rep.rows[i].z
             << "\n";
      detail::write_text(cfg.out_dir + "/" + suite + "_report.tsv",
                         body.str());
      manifest.files.push_back(suite + "_report.tsv");
      manifest.error_proxies["max_abs_z"] = rep.max_abs_z;
      manifest.wall_times[suite] = detail::seconds_since(t0);
      return detail::finish_suite(manifest, cfg.out_dir, suite, rep.pass,
                                  "ECF z-score exceeds 4");
    }

    if (suite == "proper") {
      cfg.spec.validate();
      const auto pts = detail::nonzero_points(cfg);
      auto sample = fields::simulate(cfg.spec, {pts.front()}, cfg.replicates,
                                     cfg.seed, opt.threads);
      std::vector<Vec> marginals;
      marginals.reserve(sample.replicates.size());
      for (const auto& row : sample.replicates) marginals.push_back(row[0]);
      const auto rep = verify::properness_test(marginals, 16, cfg.seed);
      std::ostringstream body;
      body << "full\t" << (rep.full ? 1 : 0) << "\nmin_deficiency\t"
           << rep.min_deficiency << "\n";
      detail::write_text(cfg.out_dir + "/proper_report.tsv", body.str());
      manifest.files.push_back("proper_report.tsv");
      manifest.wall_times[suite] = detail::seconds_since(t0);
      return detail::finish_suite(manifest, cfg.out_dir, suite, rep.full,
                                  "distribution suspect: |CF| ~ 1 along a "
                                  "direction");
    }

    if (suite == "recurrence") {
      cfg.spec.validate();
      const auto pts = detail::nonzero_points(cfg);
      CounterRng rng = CounterRng::stream(cfg.seed, 0x3ECu, 0);
      fields::RecurrenceResidual worst;
      for (int trial = 0; trial < 20; ++trial) {
        const double r = std::pow(10.0, -1.0 + 2.0 * rng.next_uniform());
        std::vector<Vec> probes;
        for (int i = 0; i < 10; ++i) {
          Vec y(cfg.spec.d());
          for (int j = 0; j < cfg.spec.d(); ++j) y(j) = 3.0 * rng.next_gaussian();
          probes.push_back(y);
        }
        const auto res = fields::recurrence_residual(
            cfg.spec, r, pts[trial % pts.size()], probes);
        worst.max_residual = std::max(worst.max_residual, res.max_residual);
        worst.literal_residual =
            std::max(worst.literal_residual, res.literal_residual);
        worst.skipped += res.skipped;
      }
      std::ostringstream body;
      body << "max_residual\t" << worst.max_residual << "\n"
           << "literal_residual\t" << worst.literal_residual << "\n"
           << "skipped\t" << worst.skipped << "\n";
      detail::write_text(cfg.out_dir + "/recurrence_report.tsv", body.str());
      manifest.files.push_back("recurrence_report.tsv");
      manifest.error_proxies["max_residual"] = worst.max_residual;
      manifest.wall_times[suite] = detail::seconds_since(t0);
      return detail::finish_suite(manifest, cfg.out_dir, suite,
                                  worst.max_residual <= 1e-9,
                                  "recurrence residual exceeds 1e-9");
    }

    if (suite == "normbound") {
      const auto rep = verify::norm_bound_slopes(cfg.spec.D);
      std::ostringstream body;
      body << "regime\tslope\ttarget_lo\ttarget_hi\n" << std::setprecision(10);
      body << "small_r\t" << rep.slope_small << "\t"
           << cfg.spec.h() - 0.05 << "\tinf\n";
      body << "large_r\t" << rep.slope_large << "\t-inf\t"
           << cfg.spec.H() + 0.05 << "\n";
      detail::write_text(cfg.out_dir + "/normbound_report.tsv", body.str());
      manifest.files.push_back("normbound_report.tsv");
      manifest.wall_times[suite] = detail::seconds_since(t0);
      return detail::finish_suite(manifest, cfg.out_dir, suite, rep.pass,
                                  "norm growth slope outside [h, H] margin");
    }

    if (suite == "lebesgue") {
      bool pass = true;
      std::ostringstream body;
      body << "r\tmeasured\texpected\trel_error\n" << std::setprecision(10);
      for (double r : {0.5, 2.0}) {
        const auto rep = verify::lebesgue_scaling_check(
            cfg.spec.E, r, 1000000, cfg.seed);
        body << r << "\t" << rep.measured_ratio << "\t" << rep.expected
             << "\t" << rep.rel_error << "\n";
        pass = pass && rep.pass;
      }
      detail::write_text(cfg.out_dir + "/lebesgue_report.tsv", body.str());
      manifest.files.push_back("lebesgue_report.tsv");
      manifest.wall_times[suite] = detail::seconds_since(t0);
      return detail::finish_suite(manifest, cfg.out_dir, suite, pass,
                                  "MC volume disagrees with r^q");
    }

    if (suite == "integral_cf") {
      cfg.spec.validate();
      auto sample = fields::simulate(cfg.spec, cfg.points, cfg.replicates,
                                     cfg.seed, opt.threads);
      const auto cells =
          fields::make_field_cells(cfg.spec, cfg.points, cfg.spec.quad);
      auto panel = verify::detail::theta_panel(
          20, static_cast<int>(cfg.points.size()), cfg.spec.m(),
          cfg.seed ^ 0xECFull);
      std::ostringstream body;
      body << "theta_index\tre_emp\tim_emp\tse\ttheo\tz\n"
           << std::setprecision(10);
      double max_z = 0.0;
      for (size_t i = 0; i < panel.size(); ++i) {
        std::vector<std::pair<Vec, Vec>> pairs;
        for (size_t j = 0; j < cfg.points.size(); ++j)
          pairs.emplace_back(cfg.points[j], panel[i][j]);
        const double gamma =
            fields::joint_cf_exponent(cfg.spec, pairs, cells);
        const auto e = verify::detail::functional_ecf(sample.replicates,
                                                      panel[i]);
        const double theo = std::exp(-gamma);
        const double se = std::max(e.se_re, 1e-12);
        const double z = std::abs(e.value.real() - theo) / se;
        max_z = std::max(max_z, z);
        body << i << "\t" << e.value.real() << "\t" << e.value.imag() << "\t"
             << se << "\t" << theo << "\t" << z << "\n";
      }
      detail::write_text(cfg.out_dir + "/ecf_report.tsv", body.str());
      manifest.files.push_back("ecf_report.tsv");
      manifest.error_proxies["max_abs_z"] = max_z;
      manifest.wall_times[suite] = detail::seconds_since(t0);
      return detail::finish_suite(manifest, cfg.out_dir, suite, max_z <= 4.0,
                                  "ECF deviates from exp(-exponent)");
    }

    if (suite == "polar") {
      polar::PolarSystem ps(cfg.spec.E.entries);
      CounterRng rng = CounterRng::stream(cfg.seed, 0x901ull, 0);
      double worst_rec = 0.0, worst_scale = 0.0;
      for (int i = 0; i < 200; ++i) {
        Vec x(cfg.spec.d());
        for (int j = 0; j < cfg.spec.d(); ++j) x(j) = rng.next_gaussian();
        if (x.norm() == 0.0) continue;
        x *= std::pow(10.0, -2.0 + 4.0 * rng.next_uniform());
        const auto pc = ps.decompose(x);
        const Vec back = linops::mat_pow(pc.tau, cfg.spec.E.entries) *
                         pc.direction;
        worst_rec = std::max(worst_rec, (back - x).norm() / x.norm());
        const double r = std::pow(10.0, -1.0 + 2.0 * rng.next_uniform());
        const double lhs = ps.tau(linops::mat_pow(r, cfg.spec.E.entries) * x);
        worst_scale =
            std::max(worst_scale, std::abs(lhs - r * pc.tau) / (r * pc.tau));
      }
      std::ostringstream body;
      body << "reconstruction_residual\t" << worst_rec << "\n"
           << "tau_scaling_residual\t" << worst_scale << "\n";
      detail::write_text(cfg.out_dir + "/polar_report.tsv", body.str());
      manifest.files.push_back("polar_report.tsv");
      manifest.wall_times[suite] = detail::seconds_since(t0);
      return detail::finish_suite(
          manifest, cfg.out_dir, suite,
          worst_rec <= 1e-8 && worst_scale <= 1e-8,
          "polar decomposition residual exceeds 1e-8");
    }

    throw std::invalid_argument("unknown verify suite: " + suite);
  });
}

inline int cmd_plotdata(const std::string& input_path, const std::string& kind,
                        const Options& opt) {
  return guarded([&]() -> int {
    const std::string out_dir = opt.out_dir.value_or(".");
    detail::ensure_dir(out_dir);

    if (kind == "field_slice") {
      const auto s = io::read_sample(input_path);
      std::ostringstream body;
      body << "x0\tx1\tvalue\n" << std::setprecision(10);
      for (size_t j = 0; j < s.points.size(); ++j) {
        const double x0 = s.d > 0 ? s.points[j](0) : 0.0;
        const double x1 = s.d > 1 ? s.points[j](1) : 0.0;
        const double v =
            s.replicates.empty() ? 0.0 : s.replicates[0][j](0);
        body << x0 << "\t" << x1 << "\t" << v << "\n";
      }
      detail::write_text(out_dir + "/field_slice.tsv", body.str());
      std::cout << "wrote " << out_dir << "/field_slice.tsv\n";
      return 0;
    }

    if (kind == "ecf_panel" || kind == "slope_fit") {
      // Re-emit a verify report (ecf_report.tsv / normbound_report.tsv)
      // as a plot-ready table, validating its schema.
      std::ifstream in(input_path);
      if (!in) throw io::IoError("cannot open report: " + input_path);
      std::string header;
      if (!std::getline(in, header))
        throw io::IoError("empty report: " + input_path);
      const std::string expect = kind == "ecf_panel"
                                     ? "theta_index\tre_emp\tim_emp\tse\t"
                                       "theo\tz"
                                     : "regime\tslope\ttarget_lo\ttarget_hi";
      if (header != expect)
        throw std::invalid_argument("report schema mismatch for kind '" +
                                    kind + "'");
      std::ostringstream body;
      body << header << "\n" << in.rdbuf();
      const std::string out_name = kind + ".tsv";
      detail::write_text(out_dir + "/" + out_name, body.str());
      std::cout << "wrote " << out_dir << "/" << out_name << "\n";
      return 0;
    }

    throw std::invalid_argument("unknown plotdata kind: " + kind);
  });
}

}  // namespace cli
}  // namespace ossf
