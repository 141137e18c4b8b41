#pragma once

// File formats used by the command-line front end.
//
// Time series (text): optional comment lines starting with '#', one of which
// may be "# sample_rate_hz=<value>"; other "# key=value" lines are kept as
// metadata. Then one sample per line.
// Time series (f32le): raw little-endian IEEE-754 single-precision samples.
// Model: a JSON object with a mandatory "format" and "version" field.
// Spectrum: two tab-separated columns, freq_hz and psd, one bin per line.

#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vibid/detect.hpp"
#include "vibid/error.hpp"
#include "vibid/model.hpp"
#include "vibid/spectrum.hpp"
#include "vibid/sysid.hpp"

namespace vibid::io {

inline constexpr std::string_view kModelFormat = "vibid-model";
inline constexpr int kModelVersion = 1;
inline constexpr std::string_view kReportFormat = "vibid-damage-report";
inline constexpr int kReportVersion = 1;

struct SeriesFile {
  std::vector<double> samples;
  std::optional<double> sample_rate_hz;
  std::map<std::string, std::string> metadata;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) throw Error(ErrorCode::Parse, where + ": cannot parse number '" + text + "'");
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

}  // namespace detail

inline SeriesFile parse_series_text(std::string_view text, const std::string& name = "<input>") {
  SeriesFile out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    if (line.front() == '#') {
      const std::string body = detail::trim(std::string_view(line).substr(1));
      const auto eq = body.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = detail::trim(std::string_view(body).substr(0, eq));
      const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
      if (key == "sample_rate_hz")
        out.sample_rate_hz = detail::parse_double(value, where);
      else
        out.metadata[key] = value;
      continue;
    }
    out.samples.push_back(detail::parse_double(line, where));
  }
  return out;
}

inline SeriesFile read_series_text(const std::filesystem::path& path) {
  return parse_series_text(detail::read_file(path), path.string());
}

inline SeriesFile read_series_f32le(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  if (bytes.size() % 4 != 0)
    throw Error(ErrorCode::Parse, path.string() + ": f32le input length is not a multiple of 4 bytes");
  SeriesFile out;
  out.samples.reserve(bytes.size() / 4);
  for (std::size_t off = 0; off < bytes.size(); off += 4) {
    std::uint32_t word = 0;
    std::memcpy(&word, bytes.data() + off, 4);
    if constexpr (std::endian::native == std::endian::big) word = __builtin_bswap32(word);
    out.samples.push_back(static_cast<double>(std::bit_cast<float>(word)));
  }
  return out;
}

/// Resolves the sample rate (explicit value wins over the file header) and
/// validates the samples.
inline TimeSeries to_time_series(SeriesFile file, std::optional<double> rate_override) {
  const std::optional<double> rate = rate_override ? rate_override : file.sample_rate_hz;
  if (!rate) throw Error(ErrorCode::InvalidArgument, "sample rate unknown: add a '# sample_rate_hz=' header or --rate");
  return TimeSeries(std::move(file.samples), *rate);
}

inline void write_series_text(const std::filesystem::path& path, const TimeSeries& ts,
                              const std::map<std::string, std::string>& metadata = {}) {
  auto out = detail::open_output(path);
  out << "# sample_rate_hz=" << ts.sample_rate_hz() << '\n';
  for (const auto& [k, v] : metadata) out << "# " << k << '=' << v << '\n';
  out.precision(17);
  for (double s : ts.samples()) out << s << '\n';
  detail::finish(out, path);
}

template <std::floating_point T>
nlohmann::ordered_json model_to_json(const SysIdModel<T>& m, double sample_rate_hz) {
  nlohmann::ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["kind"] = to_string(m.spec.kind);
  j["q"] = m.spec.q;
  j["p"] = m.spec.p;
  j["stage1_order"] = m.spec.stage1_order;
  j["n_rows"] = m.spec.n_rows;
  j["sample_rate_hz"] = sample_rate_hz;
  j["precision"] = to_string(m.diagnostics.precision);
  j["qr_method"] = to_string(m.diagnostics.qr_method);
  auto theta = nlohmann::ordered_json::array();
  for (T v : m.theta) theta.push_back(static_cast<double>(v));
  j["theta"] = std::move(theta);
  j["sigma2"] = static_cast<double>(m.sigma2);
  j["diagnostics"] = {{"residual_norm", m.diagnostics.residual_norm},
                      {"qr_flops", m.diagnostics.qr_stats.flops},
                      {"barriers", m.diagnostics.qr_stats.barriers}};
  return j;
}

struct ModelRecord {
  ModelSpec spec;
  double sample_rate_hz = 0.0;
  Precision precision = Precision::F32;
  QrMethod qr_method = QrMethod::GramSchmidt;
  std::vector<double> theta;
  double sigma2 = 0.0;
  double residual_norm = 0.0;

  template <std::floating_point T>
  SysIdModel<T> as_model() const {
    SysIdModel<T> m;
    m.spec = spec;
    m.theta.reserve(theta.size());
    for (double v : theta) m.theta.push_back(static_cast<T>(v));
    m.sigma2 = static_cast<T>(sigma2);
    m.diagnostics.precision = precision;
    m.diagnostics.qr_method = qr_method;
    m.diagnostics.residual_norm = residual_norm;
    return m;
  }
};

inline ModelRecord model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat)
      throw Error(ErrorCode::Parse, "model file: unexpected format tag");
    if (j.at("version").get<int>() != kModelVersion) throw Error(ErrorCode::Parse, "model file: unsupported version");
    ModelRecord r;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "ar" && kind != "arma") throw Error(ErrorCode::Parse, "model file: unknown kind '" + kind + "'");
    r.spec.kind = kind == "ar" ? ModelKind::AR : ModelKind::ARMA;
    r.spec.q = j.at("q").get<std::size_t>();
    r.spec.p = j.at("p").get<std::size_t>();
    r.spec.stage1_order = j.at("stage1_order").get<std::size_t>();
    r.spec.n_rows = j.at("n_rows").get<std::size_t>();
    r.sample_rate_hz = j.at("sample_rate_hz").get<double>();
    r.precision = j.at("precision").get<std::string>() == "f64" ? Precision::F64 : Precision::F32;
    const std::string qr = j.at("qr_method").get<std::string>();
    r.qr_method = qr == "givens" ? QrMethod::Givens : qr == "hh" ? QrMethod::Householder : QrMethod::GramSchmidt;
    r.theta = j.at("theta").get<std::vector<double>>();
    r.sigma2 = j.at("sigma2").get<double>();
    if (j.contains("diagnostics")) r.residual_norm = j["diagnostics"].value("residual_norm", 0.0);
    r.spec.validate();
    if (r.theta.size() != r.spec.param_count())
      throw Error(ErrorCode::Parse, "model file: theta length does not match the model orders");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("model file: ") + e.what());
  }
}

inline ModelRecord read_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

/// True when the file content starts with a JSON object.
inline bool looks_like_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
  char c = 0;
  while (in.get(c))
    if (!std::isspace(static_cast<unsigned char>(c))) return c == '{';
  return false;
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
  detail::finish(out, path);
}

template <std::floating_point T>
void write_spectrum(std::ostream& out, const Spectrum<T>& spec) {
  out << "# freq_hz\tpsd\n";
  char buf[64];
  for (std::size_t i = 0; i < spec.psd.size(); ++i) {
    const int n = std::snprintf(buf, sizeof buf, "%.17g\t%.9g\n", spec.freqs[i], static_cast<double>(spec.psd[i]));
    out.write(buf, n);
  }
}

template <std::floating_point T>
void write_spectrum(const std::filesystem::path& path, const Spectrum<T>& spec) {
  auto out = detail::open_output(path);
  write_spectrum(out, spec);
  detail::finish(out, path);
}

inline nlohmann::ordered_json peak_to_json(const Peak& p) {
  return {{"bin", p.bin}, {"freq_hz", p.freq_hz}, {"magnitude", p.magnitude}, {"prominence", p.prominence}};
}

inline nlohmann::ordered_json report_to_json(const DamageReport& r) {
  nlohmann::ordered_json j;
  j["format"] = kReportFormat;
  j["version"] = kReportVersion;
  auto pairs = nlohmann::ordered_json::array();
  for (const PeakPair& p : r.matching.pairs)
    pairs.push_back({{"f_safe", p.healthy.freq_hz}, {"f_def", p.test.freq_hz}, {"delta_f_percent", p.delta_f_percent}});
  j["matched_pairs"] = std::move(pairs);
  auto uh = nlohmann::ordered_json::array();
  for (const Peak& p : r.matching.unmatched_healthy) uh.push_back(peak_to_json(p));
  auto ut = nlohmann::ordered_json::array();
  for (const Peak& p : r.matching.unmatched_test) ut.push_back(peak_to_json(p));
  j["unmatched_healthy"] = std::move(uh);
  j["unmatched_test"] = std::move(ut);
  j["min_delta_f"] = r.min_delta_f;
  j["max_delta_f"] = r.max_delta_f;
  j["dominant_delta_f"] = r.dominant_delta_f;
  j["threshold_percent"] = r.threshold_percent;
  j["alarm"] = r.alarm;
  return j;
}

}  // namespace vibid::io
