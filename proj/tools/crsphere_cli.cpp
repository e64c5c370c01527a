// Command-line front end: harmonic decomposition, tangency-series solvers,
// the embedding flow, the slice decomposition, and the acceptance suite.
//
// Exit codes: 0 success, 2 precondition violation, 3 numerical certificate
// failure, 4 I/O or parse error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "crsphere/acceptance.hpp"
#include "crsphere/io.hpp"

namespace {

using namespace crsphere;

constexpr int kExitOk = 0;
constexpr int kExitPrecondition = 2;
constexpr int kExitCertificate = 3;
constexpr int kExitIo = 4;

json& manifest_extras() {
  static json extras = json::object();
  return extras;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void write_manifest_with_extras(const std::string& path, json config,
                                const std::vector<std::pair<std::string, double>>& timings) {
  config.update(manifest_extras());
  write_manifest(path, config, timings);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
}

// Reads a deformation tensor / function: SphereFunction JSON, or the
// polynomial fixture language in a .txt file (decomposed on load).
template <class S>
SphereFunction<S> load_function(const std::string& path, int weight, int truncation) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    json j = read_json_file(path);
    return sphere_function_from_json<S>(j);
  }
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  PolyQ poly = parse_polynomial(buf.str());
  if constexpr (scalar_traits<S>::exact)
    return harmonic_decompose(poly, weight, truncation);
  else
    return harmonic_decompose(poly.convert<std::complex<double>>(), weight, truncation);
}

// f values of a flow source at one time (the source already applies the
// realization conversion; the strict-sign predicate is conversion-invariant).
inline SphereFunctionD sphere_truncate(const FlowSource& src, double t, int N) {
  SphereFunctionD f = src.f(t);
  f.truncation = N;
  return f;
}

template <class S>
void print_block_table(std::ostream& os, const SphereFunction<S>& u) {
  os << "  (p,q)   |block|_L2\n";
  for (const auto& [pq, coeffs] : u.blocks) {
    double norm =
        std::sqrt(scalar_traits<S>::real_to_double(block_norm2(pq.first, pq.second, coeffs)));
    os << "  (" << pq.first << "," << pq.second << ")   " << norm << "\n";
  }
}

int cmd_decompose(const std::string& input, const std::string& output, int N, int weight,
                  bool float_mode) {
  Timer timer;
  json config{{"command", "decompose"}, {"input", input},   {"output", output},
              {"truncation", N},        {"weight", weight},
              {"mode", float_mode ? "float" : "exact"}};
  json out_json;
  if (float_mode) {
    auto f = load_function<std::complex<double>>(input, weight, N);
    out_json = to_json(f);
    print_block_table(std::cout, f);
  } else {
    auto f = load_function<RationalComplex>(input, weight, N);
    out_json = to_json(f);
    print_block_table(std::cout, f);
  }
  write_text(output, out_json.dump(2) + "\n");
  write_manifest_with_extras(output + ".manifest.json", config, {{"total", timer.seconds()}});
  std::cout << "wrote " << output << "\n";
  return kExitOk;
}

template <class S>
int run_tangency(const SphereFunction<S>& phidot, const std::string& mode, double lambda, int K,
                 int N, double tol, const std::string& out_series, const std::string& out_norms,
                 const json& config, const Timer& timer) {
  using Traits = scalar_traits<S>;
  typename Traits::real_type lam = Traits::real_zero();
  if constexpr (Traits::exact) {
    lam = Rational(std::lround(lambda * 1000000), 1000000);
    lam.canonicalize();
  } else {
    lam = lambda;
  }
  TangencySeries<S> series =
      (mode == "be") ? be_series(phidot, lam, K, N, tol) : formal_series(phidot, K, N, tol);
  if (mode != "be" && lambda != 0.0)
    std::cout << "note: lambda is only used by the be mode\n";

  auto est = radius_estimate(phidot, series.norm_order, N);
  series.radius = est.radius;
  series.solver_constant = est.C;
  series.series_constant = est.Cs;

  auto grid = QuadratureGrid::for_degree(2 * N + 4);
  SpectralTransform tr(grid, N);
  certify_sign(series, tr);

  auto residuals = tangency_residual_series(series, tol);
  double worst = 0.0;
  for (const auto& r : residuals) worst = std::max(worst, l2_norm(r));

  write_text(out_series, to_json(series).dump(2) + "\n");
  if (!out_norms.empty()) write_norms_csv(out_norms, series);
  write_manifest_with_extras(out_series + ".manifest.json", config, {{"total", timer.seconds()}});

  std::cout << "series order K = " << series.K << ", truncation N = " << N << "\n";
  std::cout << "radius estimate R = " << series.radius << " (C = " << est.C << ", Cs = " << est.Cs
            << ")\n";
  std::cout << "strict-sign certificate: " << (series.sign_certified ? "yes" : "no")
            << " (min |Re f| = " << series.sign_min << ")\n";
  std::cout << "max residual coefficient norm = " << worst << "\n";
  double residual_tol = Traits::exact ? 0.0 : 1e-10;
  if (worst > residual_tol) {
    std::cerr << "error: residual exceeds tolerance " << residual_tol << "\n";
    return kExitCertificate;
  }
  std::cout << "wrote " << out_series << "\n";
  return kExitOk;
}

int cmd_tangency(const std::string& input, const std::string& mode, double lambda, int K, int N,
                 double tol, bool float_mode, const std::string& out_series,
                 const std::string& out_norms) {
  Timer timer;
  json config{{"command", "tangency"},   {"input", input}, {"mode", mode},
              {"lambda", lambda},        {"K", K},         {"truncation", N},
              {"tolerance", tol},        {"float", float_mode},
              {"out_series", out_series}};
  if (float_mode) {
    auto phidot = load_function<std::complex<double>>(input, 2, N);
    return run_tangency(phidot, mode, lambda, K, N, std::max(tol, 1e-13), out_series, out_norms,
                        config, timer);
  }
  auto phidot = load_function<RationalComplex>(input, 2, N);
  return run_tangency(phidot, mode, lambda, K, N, 0.0, out_series, out_norms, config, timer);
}

int cmd_evolve(const std::string& input, double lambda, double t_end, double dt, int N,
               int sample_every, const std::string& out_json, const std::string& out_csv) {
  Timer timer;
  json config{{"command", "evolve"}, {"input", input},       {"lambda", lambda},
              {"t_end", t_end},      {"dt", dt},             {"truncation", N},
              {"sample_every", sample_every}, {"output", out_json}};
  auto phidot = load_function<std::complex<double>>(input, 2, N);
  auto grid = QuadratureGrid::for_degree(4 * N + 4);
  SpectralTransform tr(grid, N);
  EvolveOptions opts;
  opts.dt = dt;
  opts.t_end = t_end;
  opts.sample_every = sample_every;
  auto traj = evolve_general(phidot, lambda, N, tr, opts);
  write_text(out_json, to_json(traj).dump(2) + "\n");
  if (!out_csv.empty()) write_trajectory_csv(out_csv, traj);
  write_manifest_with_extras(out_json + ".manifest.json", config, {{"total", timer.seconds()}});
  SphereFunctionD psi_final = project(traj.phi.back(), Region::QIn01);
  std::cout << "evolved to t = " << t_end << "; ||psi(t_end)|| = " << l2_norm(psi_final)
            << ", worst fixed-point contraction = " << traj.max_contraction << "\n";
  std::cout << "wrote " << out_json << "\n";
  return kExitOk;
}

int cmd_flow(const std::string& series_path, double t_end, double dt, int N, int sample_every,
             const std::string& out_csv, const std::string& out_states) {
  Timer timer;
  json config{{"command", "flow"}, {"series", series_path}, {"t_end", t_end},
              {"dt", dt},          {"truncation", N},       {"sample_every", sample_every},
              {"out_csv", out_csv}};
  json sj = read_json_file(series_path);
  FlowSource src;
  auto grid = QuadratureGrid::for_degree(2 * N + 4);
  SpectralTransform tr(grid, N);
  if (sj.contains("times")) {
    // trajectory source: certify the strict sign over its samples up front
    auto traj = trajectory_from_json(sj);
    src = FlowSource::from_trajectory(traj);
    double min_re = std::numeric_limits<double>::infinity();
    int sign = 0;
    bool consistent = true;
    for (double t : traj.times) {
      auto fv = tr.evaluate(sphere_truncate(src, t, N));
      for (auto& v : fv) {
        int s = v.real() > 0 ? 1 : (v.real() < 0 ? -1 : 0);
        if (sign == 0) sign = s;
        if (s == 0 || s != sign) consistent = false;
        min_re = std::min(min_re, std::abs(v.real()));
      }
    }
    src.sign_certified = consistent && min_re > 0.0;
    src.sign_min = min_re;
  } else {
    auto series = series_from_json<std::complex<double>>(sj);
    src = FlowSource::from_series(series);
  }
  if (!src.sign_certified) {
    std::cerr << "error: source carries no strict-sign certificate; rerun the tangency solver "
                 "(the certificate is required to integrate the embedding flow)\n";
    return kExitPrecondition;
  }
  FlowOptions opts;
  opts.dt = dt;
  opts.t_end = t_end;
  opts.sample_every = sample_every;
  auto result = integrate(src, N, tr, opts);

  write_flow_csv(out_csv, result);
  if (!out_states.empty()) {
    json states = json::array();
    for (const auto& state : result.states)
      states.push_back(json{{"t", state.t},
                            {"psi1", to_json(state.psi1)},
                            {"psi2", to_json(state.psi2)},
                            {"gamma", to_json(state.gamma)}});
    write_text(out_states, states.dump(2) + "\n");
  }
  write_manifest_with_extras(out_csv + ".manifest.json", config, {{"total", timer.seconds()}});

  double max_res = 0.0;
  for (const auto& s : result.samples) max_res = std::max(max_res, s.cr_residual);
  std::cout << "integrated to t = " << t_end << " at dt = " << result.dt_final
            << (result.halvings ? " (after " + std::to_string(result.halvings) + " halvings)" : "")
            << "\n";
  std::cout << "max cr_residual over samples = " << max_res << "\n";
  std::cout << "wrote " << out_csv << "\n";
  return kExitOk;
}

int cmd_slice(const std::string& input, int N, bool float_mode, const std::string& out_json_path,
              const std::string& out_report) {
  Timer timer;
  json config{{"command", "slice"},  {"input", input},          {"truncation", N},
              {"float", float_mode}, {"output", out_json_path}};
  json dec, rep;
  if (float_mode) {
    auto phidot = load_function<std::complex<double>>(input, 2, N);
    dec = to_json(slice_decompose(phidot, 1e-13));
    rep = to_json(cone_report(phidot, 1e-13));
  } else {
    auto phidot = load_function<RationalComplex>(input, 2, N);
    dec = to_json(slice_decompose(phidot));
    rep = to_json(cone_report(phidot));
  }
  write_text(out_json_path, dec.dump(2) + "\n");
  if (!out_report.empty()) write_text(out_report, rep.dump(2) + "\n");
  write_manifest_with_extras(out_json_path + ".manifest.json", config, {{"total", timer.seconds()}});
  std::cout << "cone report: " << rep.dump() << "\n";
  std::cout << "wrote " << out_json_path << "\n";
  return kExitOk;
}

int cmd_verify() {
  auto results = run_acceptance(&std::cout);
  int failures = 0;
  for (const auto& r : results)
    if (!r.pass) ++failures;
  if (failures) {
    std::cout << failures << " criterion(s) failed\n";
    return kExitCertificate;
  }
  std::cout << "all acceptance criteria passed\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral toolkit for CR deformation families on the 3-sphere"};
  app.require_subcommand(1);

  std::string input, output = "out.json", out_norms, out_states, out_report;
  std::string mode = "formal";
  int N = 12, K = 8, weight = 0, sample_every = 50;
  unsigned seed = 0;
  double lambda = 0.0, dt = 1e-3, t_end = 1.0, tol = 0.0;
  bool float_mode = false;

  app.add_option("--seed", seed, "RNG seed recorded in the manifest (no command draws "
                                 "randomness today; reserved for sampling diagnostics)");

  auto* dec = app.add_subcommand("decompose", "harmonic decomposition of a polynomial fixture");
  dec->add_option("input", input, "polynomial .txt or SphereFunction .json")->required();
  dec->add_option("-o,--output", output, "output JSON path");
  dec->add_option("-N,--truncation", N, "max total degree")->check(CLI::NonNegativeNumber);
  dec->add_option("-w,--weight", weight, "tensor weight")->check(CLI::NonNegativeNumber);
  dec->add_flag("--float", float_mode, "double-precision scalars");

  auto* tan = app.add_subcommand("tangency", "formal or Burns-Epstein tangency series");
  tan->add_option("input", input, "deformation tensor (.txt polynomial or .json)")->required();
  tan->add_option("-m,--mode", mode, "formal | be")->check(CLI::IsMember({"formal", "be"}));
  tan->add_option("-l,--lambda", lambda, "constant offset for the be mode");
  tan->add_option("-K,--order", K, "series order")->check(CLI::NonNegativeNumber);
  tan->add_option("-N,--truncation", N, "max total degree")->check(CLI::NonNegativeNumber);
  tan->add_option("--tolerance", tol, "zero tolerance (float mode)");
  tan->add_flag("--float", float_mode, "double-precision scalars");
  tan->add_option("-o,--output", output, "series JSON path");
  tan->add_option("--norms-csv", out_norms, "per-order Folland-Stein norm CSV");

  auto* evo = app.add_subcommand("evolve", "parabolic solver for general embeddable data");
  evo->add_option("input", input, "deformation tensor (.txt polynomial or .json)")->required();
  evo->add_option("-l,--lambda", lambda, "negative constant offset")->required();
  evo->add_option("-T,--t-end", t_end, "final time")->check(CLI::NonNegativeNumber);
  evo->add_option("--dt", dt, "time step")->check(CLI::PositiveNumber);
  evo->add_option("-N,--truncation", N, "spatial truncation")->check(CLI::NonNegativeNumber);
  evo->add_option("--sample-every", sample_every, "steps between samples")
      ->check(CLI::PositiveNumber);
  evo->add_option("-o,--output", output, "trajectory JSON path");
  evo->add_option("--csv", out_norms, "per-sample norm CSV path");

  auto* flow = app.add_subcommand("flow", "integrate the embedding transport flow");
  flow->add_option("series", input, "TangencySeries JSON from the tangency command")->required();
  flow->add_option("-T,--t-end", t_end, "final time")->check(CLI::NonNegativeNumber);
  flow->add_option("--dt", dt, "time step")->check(CLI::PositiveNumber);
  flow->add_option("-N,--truncation", N, "spatial truncation")->check(CLI::NonNegativeNumber);
  flow->add_option("--sample-every", sample_every, "steps between samples")
      ->check(CLI::PositiveNumber);
  flow->add_option("-o,--output", output, "trajectory CSV path");
  flow->add_option("--states", out_states, "full embedding states JSON path");

  auto* slice = app.add_subcommand("slice", "linearized slice decomposition and cone report");
  slice->add_option("input", input, "deformation tensor (.txt polynomial or .json)")->required();
  slice->add_option("-N,--truncation", N, "max total degree")->check(CLI::NonNegativeNumber);
  slice->add_flag("--float", float_mode, "double-precision scalars");
  slice->add_option("-o,--output", output, "decomposition JSON path");
  slice->add_option("--report", out_report, "cone report JSON path");

  app.add_subcommand("verify", "run the acceptance suite and print a pass/fail table");

  CLI11_PARSE(app, argc, argv);

  manifest_extras()["seed"] = seed;
  if (const char* cache = std::getenv("CRSPHERE_CACHE_DIR"); cache != nullptr)
    manifest_extras()["cache_dir"] = cache;

  try {
    if (dec->parsed()) return cmd_decompose(input, output, N, weight, float_mode);
    if (tan->parsed())
      return cmd_tangency(input, mode, lambda, K, N, tol, float_mode, output, out_norms);
    if (evo->parsed())
      return cmd_evolve(input, lambda, t_end, dt, N, sample_every, output, out_norms);
    if (flow->parsed()) return cmd_flow(input, t_end, dt, N, sample_every, output, out_states);
    if (slice->parsed()) return cmd_slice(input, N, float_mode, output, out_report);
    return cmd_verify();
  } catch (const NotInfinitesimallyEmbeddable& e) {
    std::cerr << "precondition violation: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const NotBurnsEpstein& e) {
    std::cerr << "precondition violation: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const NotInImage& e) {
    std::cerr << "precondition violation: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const DeformationTooLarge& e) {
    std::cerr << "precondition violation: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const GridTooCoarse& e) {
    std::cerr << "precondition violation: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const SignLost& e) {
    std::cerr << "certificate failure: " << e.what() << "\n";
    return kExitCertificate;
  } catch (const FixedPointDiverged& e) {
    std::cerr << "certificate failure: " << e.what() << "\n";
    return kExitCertificate;
  } catch (const StepRejected& e) {
    std::cerr << "certificate failure: " << e.what() << "\n";
    return kExitCertificate;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "precondition violation: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
}
