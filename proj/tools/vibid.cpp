// vibid: fit AR/ARMA models to vibration records, synthesize spectra, compare
// healthy and test conditions, and report resource estimates.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O or parse error,
// 4 numerical failure. Errors are also printed to stderr as one JSON line.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vibid/vibid.hpp"

namespace {

using namespace vibid;
namespace fs = std::filesystem;

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

int exit_code_for(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return kExitConfig;
    case ErrorCategory::Io: return kExitIo;
    case ErrorCategory::Numerical: return kExitNumerical;
  }
  return kExitConfig;
}

std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Numerical: return "numerical";
  }
  return "config";
}

int report_error(std::string_view code, std::string_view category, const std::string& message, int exit_code) {
  const nlohmann::json j = {{"error", {{"code", code}, {"category", category}, {"message", message}}},
                            {"exit_code", exit_code}};
  std::cerr << j.dump() << '\n';
  return exit_code;
}

struct CommonOptions {
  std::size_t threads = 0;  // 0: VIBID_THREADS or 1
  std::string precision = "f32";
  std::string qr = "gs";
  std::uint64_t seed = 1;
};

struct ModelOptions {
  std::string kind = "ar";
  std::optional<std::size_t> q;
  std::optional<std::size_t> p;
  std::size_t stage1_order = 0;
  std::size_t n_rows = 480;
};

struct InputOptions {
  std::string format = "text";
  std::optional<double> rate;
};

struct SpectrumOptions {
  std::size_t l_points = 2048;
  std::string trig = "linear";
};

struct DetectOptions {
  double threshold = 2.0;
  double max_rel_shift = 0.25;
  double min_prominence = 0.05;
  std::size_t max_peaks = 8;
  std::string policy = "shift-or-missing";
};

std::size_t resolve_threads(std::size_t flag) {
  if (flag != 0) return flag;
  if (const char* env = std::getenv("VIBID_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0' || v == 0)
      throw Error(ErrorCode::InvalidArgument, std::string("VIBID_THREADS must be a positive integer, got '") + env + "'");
    return v;
  }
  return 1;
}

QrMethod parse_qr(const std::string& s) {
  if (s == "givens") return QrMethod::Givens;
  if (s == "gs") return QrMethod::GramSchmidt;
  if (s == "hh") return QrMethod::Householder;
  throw Error(ErrorCode::InvalidArgument, "unknown QR method '" + s + "'");
}

TrigMode parse_trig(const std::string& s) {
  if (s == "none") return TrigMode::Reference;
  if (s == "nearest") return TrigMode::Nearest;
  if (s == "linear") return TrigMode::Linear;
  throw Error(ErrorCode::InvalidArgument, "unknown trig mode '" + s + "'");
}

ModelSpec make_spec(const ModelOptions& m) {
  if (m.kind == "ar") {
    if (m.p && *m.p != 0) throw Error(ErrorCode::InvalidArgument, "AR model requires p = 0");
    return ModelSpec::ar(m.q.value_or(15), m.n_rows);
  }
  if (m.kind == "arma") {
    const std::size_t q = m.q.value_or(12);
    const std::size_t p = m.p.value_or(3);
    if (p == 0) throw Error(ErrorCode::InvalidArgument, "ARMA model requires p >= 1; use --kind ar instead");
    if (q < 1) throw Error(ErrorCode::InvalidArgument, "model order q must be >= 1");
    return ModelSpec::arma(q, p, m.n_rows, m.stage1_order);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + m.kind + "'");
}

TimeSeries load_series(const fs::path& path, const InputOptions& in) {
  if (in.format == "text") return io::to_time_series(io::read_series_text(path), in.rate);
  if (in.format == "f32le") {
    if (!in.rate) throw Error(ErrorCode::InvalidArgument, "--format f32le requires --rate");
    return io::to_time_series(io::read_series_f32le(path), in.rate);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown input format '" + in.format + "'");
}

void add_common(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--threads", c.threads, "Worker threads (default: $VIBID_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--precision", c.precision, "Element type")->check(CLI::IsMember({"f32", "f64"}));
  cmd->add_option("--qr", c.qr, "QR method")->check(CLI::IsMember({"givens", "gs", "hh"}));
  cmd->add_option("--seed", c.seed, "Random seed");
}

void add_model(CLI::App* cmd, ModelOptions& m) {
  cmd->add_option("--kind", m.kind, "Model kind")->check(CLI::IsMember({"ar", "arma"}));
  cmd->add_option("--q", m.q, "AR order (default 15 for AR, 12 for ARMA)");
  cmd->add_option("--p", m.p, "MA order (ARMA only, default 3)");
  cmd->add_option("--stage1-order", m.stage1_order, "Auxiliary AR order for ARMA (0: automatic)");
  cmd->add_option("--n-rows", m.n_rows, "Regression rows N");
}

void add_input(CLI::App* cmd, InputOptions& in) {
  cmd->add_option("--format", in.format, "Input format")->check(CLI::IsMember({"text", "f32le"}));
  cmd->add_option("--rate", in.rate, "Sample rate in Hz (overrides the file header)");
}

void add_spectrum(CLI::App* cmd, SpectrumOptions& s) {
  cmd->add_option("--l-points", s.l_points, "Frequency grid points");
  cmd->add_option("--trig", s.trig, "Trig evaluation")->check(CLI::IsMember({"none", "nearest", "linear"}));
}

// fit ---------------------------------------------------------------------

struct FitArgs {
  CommonOptions common;
  ModelOptions model;
  InputOptions input;
  fs::path in_path;
  fs::path out_path;
};

int cmd_fit(const FitArgs& a) {
  const ExecContext ctx(resolve_threads(a.common.threads));
  const QrMethod method = parse_qr(a.common.qr);
  const ModelSpec spec = make_spec(a.model);
  spec.validate();
  const TimeSeries ts = load_series(a.in_path, a.input);
  const nlohmann::ordered_json j =
      a.common.precision == "f64" ? io::model_to_json(fit<double>(ts, spec, method, ctx), ts.sample_rate_hz())
                                  : io::model_to_json(fit<float>(ts, spec, method, ctx), ts.sample_rate_hz());
  if (a.out_path.empty() || a.out_path == "-")
    std::cout << j.dump(2) << '\n';
  else
    io::write_json(a.out_path, j);
  return 0;
}

// assess ------------------------------------------------------------------

struct AssessArgs {
  CommonOptions common;
  ModelOptions model;
  InputOptions input;
  SpectrumOptions spectrum;
  DetectOptions detect;
  fs::path healthy_path;
  fs::path test_path;
  fs::path out_path;
  fs::path healthy_spectrum;
  fs::path test_spectrum;
};

struct LoadedModel {
  io::ModelRecord record;
  double sample_rate_hz;
};

LoadedModel load_or_fit(const fs::path& path, const AssessArgs& a, const ExecContext& ctx) {
  if (io::looks_like_json(path)) {
    io::ModelRecord r = io::read_model(path);
    return {r, r.sample_rate_hz};
  }
  const TimeSeries ts = load_series(path, a.input);
  const ModelSpec spec = make_spec(a.model);
  spec.validate();
  const QrMethod method = parse_qr(a.common.qr);
  const nlohmann::ordered_json j = a.common.precision == "f64"
                                       ? io::model_to_json(fit<double>(ts, spec, method, ctx), ts.sample_rate_hz())
                                       : io::model_to_json(fit<float>(ts, spec, method, ctx), ts.sample_rate_hz());
  io::ModelRecord r = io::model_from_json(nlohmann::json::parse(j.dump()));
  return {r, r.sample_rate_hz};
}

template <std::floating_point T>
nlohmann::ordered_json assess_typed(const LoadedModel& h, const LoadedModel& t, const AssessArgs& a,
                                    const AssessConfig& cfg, const ExecContext& ctx) {
  const SysIdModel<T> hm = h.record.as_model<T>();
  const SysIdModel<T> tm = t.record.as_model<T>();
  if (hm.spec.kind != tm.spec.kind) throw Error(ErrorCode::InvalidArgument, "assess: models must be of the same kind");
  const Spectrum<T> hs = model_psd(hm, h.sample_rate_hz, cfg.psd, nullptr, ctx);
  const Spectrum<T> ts = model_psd(tm, t.sample_rate_hz, cfg.psd, nullptr, ctx);
  const DamageReport rep = assess_spectra(hs, ts, cfg);
  if (!a.healthy_spectrum.empty()) io::write_spectrum(a.healthy_spectrum, hs);
  if (!a.test_spectrum.empty()) io::write_spectrum(a.test_spectrum, ts);
  nlohmann::ordered_json j = io::report_to_json(rep);
  j["saturated_bins"] = {{"healthy", hs.saturated_bins}, {"test", ts.saturated_bins}};
  try {
    j["isd"] = isd(hs, ts);
  } catch (const Error&) {
    j["isd"] = nullptr;
  }
  return j;
}

int cmd_assess(const AssessArgs& a) {
  const ExecContext ctx(resolve_threads(a.common.threads));
  AssessConfig cfg;
  cfg.threshold_percent = a.detect.threshold;
  cfg.max_rel_shift = a.detect.max_rel_shift;
  cfg.peaks.min_prominence_ratio = a.detect.min_prominence;
  cfg.peaks.max_peaks = a.detect.max_peaks;
  cfg.policy = a.detect.policy == "shift-only" ? AlarmPolicy::ShiftOnly : AlarmPolicy::ShiftOrMissing;
  cfg.psd.l_points = a.spectrum.l_points;
  cfg.psd.trig = parse_trig(a.spectrum.trig);
  if (cfg.psd.l_points < 2) throw Error(ErrorCode::InvalidArgument, "--l-points must be >= 2");

  const LoadedModel h = load_or_fit(a.healthy_path, a, ctx);
  const LoadedModel t = load_or_fit(a.test_path, a, ctx);
  if (h.sample_rate_hz != t.sample_rate_hz)
    throw Error(ErrorCode::GridMismatch, "assess: healthy and test sample rates differ");
  // A model file keeps its own precision; both sides must agree to share a grid type.
  const bool f64 = h.record.precision == Precision::F64 && t.record.precision == Precision::F64;
  const nlohmann::ordered_json j =
      f64 ? assess_typed<double>(h, t, a, cfg, ctx) : assess_typed<float>(h, t, a, cfg, ctx);
  if (a.out_path.empty() || a.out_path == "-")
    std::cout << j.dump(2) << '\n';
  else
    io::write_json(a.out_path, j);
  return 0;
}

// bench -------------------------------------------------------------------

struct BenchArgs {
  CommonOptions common;
  bench::Options opt;
  bool json = false;
  bool all_methods = false;
  std::vector<std::size_t> scaling_threads;
};

int cmd_bench(const BenchArgs& a) {
  const std::size_t threads = resolve_threads(a.common.threads);
  const ExecContext ctx(threads);
  std::vector<bench::Row> rows;
  std::vector<QrMethod> methods;
  if (a.all_methods)
    methods = {QrMethod::Givens, QrMethod::GramSchmidt, QrMethod::Householder};
  else
    methods = {parse_qr(a.common.qr)};
  bench::Options opt = a.opt;
  opt.seed = a.common.seed;
  for (bench::Size size : bench::kStandardSizes) {
    for (QrMethod m : methods) {
      const auto r = a.common.precision == "f64" ? bench::run_pipeline<double>(size, m, ctx, opt)
                                                 : bench::run_pipeline<float>(size, m, ctx, opt);
      rows.insert(rows.end(), r.begin(), r.end());
    }
  }
  for (std::size_t t : a.scaling_threads) {
    if (t == 0) throw Error(ErrorCode::InvalidArgument, "--scaling thread counts must be >= 1");
    const ExecContext sctx(t);
    rows.push_back(a.common.precision == "f64" ? bench::run_psd_scaling<double>(8 * opt.l_points, 16, sctx, opt)
                                               : bench::run_psd_scaling<float>(8 * opt.l_points, 16, sctx, opt));
  }

  if (a.json) {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : rows)
      j.push_back({{"component", r.component},
                   {"method", r.method},
                   {"size", r.size},
                   {"threads", r.threads},
                   {"wall_ns", r.wall_ns},
                   {"flops", r.flops}});
    std::cout << j.dump(2) << '\n';
  } else {
    std::printf("%-8s %-7s %-10s %7s %14s %14s\n", "component", "method", "size", "threads", "wall_ns", "flops");
    for (const auto& r : rows)
      std::printf("%-8s %-7s %-10s %7zu %14llu %14llu\n", r.component.c_str(), r.method.c_str(), r.size.c_str(),
                  r.threads, static_cast<unsigned long long>(r.wall_ns), static_cast<unsigned long long>(r.flops));
  }
  return 0;
}

// footprint ---------------------------------------------------------------

struct FootprintArgs {
  CommonOptions common;
  bool qr_given = false;
  std::uint64_t n = 480;
  std::uint64_t np = 16;
  std::optional<std::uint64_t> elem_bytes;
  bool json = false;
};

int cmd_footprint(FootprintArgs a) {
  std::vector<QrMethod> methods;
  if (a.qr_given)
    methods = {parse_qr(a.common.qr)};
  else
    methods = {QrMethod::Givens, QrMethod::GramSchmidt, QrMethod::Householder};
  if (!a.elem_bytes) a.elem_bytes = a.common.precision == "f64" ? 8 : 4;
  const std::uint64_t elem_bytes = *a.elem_bytes;
  nlohmann::ordered_json j;
  j["n"] = a.n;
  j["np"] = a.np;
  j["elem_bytes"] = elem_bytes;
  j["pipeline_bytes"] = estimate_pipeline_bytes(a.n, a.np, elem_bytes);
  auto arr = nlohmann::ordered_json::array();
  for (QrMethod m : methods) {
    const ResourceEstimate e = estimate_qr_footprint(m, a.n, a.np, elem_bytes);
    arr.push_back({{"method", to_string(m)},
                   {"working_words", e.working_words},
                   {"working_bytes", e.working_words * elem_bytes},
                   {"flops_estimate", e.flops_estimate}});
  }
  j["qr"] = std::move(arr);
  if (a.json) {
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  std::printf("pipeline_bytes %llu (%.3f kB) for %llux%llu at %llu-byte elements\n",
              static_cast<unsigned long long>(j["pipeline_bytes"].get<std::uint64_t>()),
              static_cast<double>(j["pipeline_bytes"].get<std::uint64_t>()) / 1000.0,
              static_cast<unsigned long long>(a.n), static_cast<unsigned long long>(a.np),
              static_cast<unsigned long long>(elem_bytes));
  for (const auto& e : j["qr"])
    std::printf("%-7s working_words %-12llu flops_estimate %.6g\n", e["method"].get<std::string>().c_str(),
                static_cast<unsigned long long>(e["working_words"].get<std::uint64_t>()),
                e["flops_estimate"].get<double>());
  return 0;
}

// gen ---------------------------------------------------------------------

struct GenArgs {
  CommonOptions common;
  std::vector<double> beta;
  std::vector<double> ma;
  std::optional<double> pole_freq;
  double pole_radius = 0.98;
  double rate = 100.0;
  double sigma = 1.0;
  std::size_t n = 8192;
  fs::path out_path;
};

std::string join(const std::vector<double>& v) {
  std::ostringstream ss;
  ss.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? "," : "") << v[i];
  return ss.str();
}

int cmd_gen(const GenArgs& a) {
  std::vector<double> beta = a.beta;
  std::map<std::string, std::string> meta;
  if (a.pole_freq) {
    if (!beta.empty()) throw Error(ErrorCode::InvalidArgument, "--beta and --pole-freq are mutually exclusive");
    beta = oracle::ar2_from_pole(*a.pole_freq, a.pole_radius, a.rate);
    std::ostringstream f, r;
    f.precision(17);
    r.precision(17);
    f << *a.pole_freq;
    r << a.pole_radius;
    meta["pole_freq_hz"] = f.str();
    meta["pole_radius"] = r.str();
  }
  const TimeSeries ts = oracle::gen_arma_process(beta, a.ma, a.sigma, a.n, a.common.seed, a.rate);
  meta["beta"] = join(beta);
  if (!a.ma.empty()) meta["ma"] = join(a.ma);
  meta["sigma"] = join({a.sigma});
  meta["seed"] = std::to_string(a.common.seed);
  meta["rng"] = std::string(oracle::Rng::kAlgorithm);
  if (a.out_path.empty() || a.out_path == "-") {
    std::cout << "# sample_rate_hz=" << ts.sample_rate_hz() << '\n';
    for (const auto& [k, v] : meta) std::cout << "# " << k << '=' << v << '\n';
    std::cout.precision(17);
    for (double s : ts.samples()) std::cout << s << '\n';
  } else {
    io::write_series_text(a.out_path, ts, meta);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Output-only AR/ARMA identification, spectra and damage indicators"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vibid 1.0.0");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a time series and write it as JSON");
  add_common(fit_cmd, fit_args.common);
  add_model(fit_cmd, fit_args.model);
  add_input(fit_cmd, fit_args.input);
  fit_cmd->add_option("input", fit_args.in_path, "Time-series file")->required();
  fit_cmd->add_option("-o,--output", fit_args.out_path, "Model output (default: stdout)");

  AssessArgs assess_args;
  auto* assess_cmd = app.add_subcommand("assess", "Compare a healthy and a test record (series or model files)");
  add_common(assess_cmd, assess_args.common);
  add_model(assess_cmd, assess_args.model);
  add_input(assess_cmd, assess_args.input);
  add_spectrum(assess_cmd, assess_args.spectrum);
  assess_cmd->add_option("healthy", assess_args.healthy_path, "Healthy series or model")->required();
  assess_cmd->add_option("test", assess_args.test_path, "Test series or model")->required();
  assess_cmd->add_option("-o,--output", assess_args.out_path, "Report output (default: stdout)");
  assess_cmd->add_option("--healthy-spectrum", assess_args.healthy_spectrum, "Write healthy PSD as freq_hz/psd");
  assess_cmd->add_option("--test-spectrum", assess_args.test_spectrum, "Write test PSD as freq_hz/psd");
  assess_cmd->add_option("--threshold", assess_args.detect.threshold, "Alarm threshold on |dF| in percent");
  assess_cmd->add_option("--max-rel-shift", assess_args.detect.max_rel_shift, "Peak matching window");
  assess_cmd->add_option("--min-prominence", assess_args.detect.min_prominence, "Prominence ratio to global max");
  assess_cmd->add_option("--max-peaks", assess_args.detect.max_peaks, "Peaks kept per spectrum");
  assess_cmd->add_option("--policy", assess_args.detect.policy, "Alarm policy")
      ->check(CLI::IsMember({"shift-only", "shift-or-missing"}));

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Time each pipeline stage at the standard sizes");
  add_common(bench_cmd, bench_args.common);
  bench_cmd->add_option("--repeats", bench_args.opt.repeats, "Runs per measurement (minimum is reported)");
  bench_cmd->add_option("--l-points", bench_args.opt.l_points, "PSD grid points");
  bench_cmd->add_flag("--all-methods", bench_args.all_methods, "Run every QR method");
  bench_cmd->add_option("--scaling", bench_args.scaling_threads, "Thread counts for the PSD scaling run");
  bench_cmd->add_flag("--json", bench_args.json, "Machine-readable output");

  FootprintArgs fp_args;
  auto* fp_cmd = app.add_subcommand("footprint", "Print memory and flop estimates");
  fp_cmd->add_option("--n", fp_args.n, "Regression rows N");
  fp_cmd->add_option("--np", fp_args.np, "Parameter count Np");
  add_common(fp_cmd, fp_args.common);
  fp_cmd->add_option("--elem-bytes", fp_args.elem_bytes, "Bytes per element (default: from --precision)");
  fp_cmd->add_flag("--json", fp_args.json, "Machine-readable output");

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic AR/ARMA record");
  add_common(gen_cmd, gen_args.common);
  gen_cmd->add_option("--beta", gen_args.beta, "AR polynomial coefficients beta_1..beta_q")->delimiter(',');
  gen_cmd->add_option("--ma", gen_args.ma, "MA coefficients for e[k-1]..e[k-p]")->delimiter(',');
  gen_cmd->add_option("--pole-freq", gen_args.pole_freq, "Resonance of an AR(2) pole pair in Hz");
  gen_cmd->add_option("--pole-radius", gen_args.pole_radius, "Radius of the AR(2) pole pair");
  gen_cmd->add_option("--rate", gen_args.rate, "Sample rate in Hz");
  gen_cmd->add_option("--sigma", gen_args.sigma, "Driving noise standard deviation");
  gen_cmd->add_option("--n", gen_args.n, "Number of samples");
  gen_cmd->add_option("-o,--output", gen_args.out_path, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("invalid_argument", "config", e.what(), kExitConfig);
  }

  try {
    if (*fit_cmd) return cmd_fit(fit_args);
    if (*assess_cmd) return cmd_assess(assess_args);
    if (*bench_cmd) return cmd_bench(bench_args);
    if (*fp_cmd) {
      fp_args.qr_given = fp_cmd->count("--qr") > 0;
      return cmd_footprint(fp_args);
    }
    if (*gen_cmd) return cmd_gen(gen_args);
  } catch (const Error& e) {
    return report_error(to_string(e.code()), to_string(e.category()), e.what(), exit_code_for(e.category()));
  } catch (const std::bad_alloc&) {
    return report_error("out_of_memory", "numerical", "allocation failed", kExitNumerical);
  }
  return kExitConfig;
}
