#include "csiadv/eval/report.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "csiadv/binary_io.hpp"

namespace csiadv::eval {

namespace {

constexpr std::string_view kHeader = "gamma,scenario,train_snr_db,isr_db,attack,nmse_db,n_samples";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t line, const char* column) {
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(FormatErrorKind::kShapeMismatch, "csv line " + std::to_string(line) + ": bad " +
                                                           column + " \"" + s + "\"");
  }
  return v;
}

}  // namespace

std::string format_number(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string format_csv(const SweepReport& report) {
  std::string out(kHeader);
  out += '\n';
  for (const auto& p : report.points) {
    out += format_number(p.model.gamma) + ',';
    out += std::string(channel::scenario_name(p.model.scenario)) + ',';
    out += (p.model.train_snr_db ? format_number(*p.model.train_snr_db) : "") + ',';
    out += (p.isr_db ? format_number(*p.isr_db) : "") + ',';
    out += std::string(attack_name(p.kind)) + ',';
    out += format_number(p.nmse_db) + ',';
    out += std::to_string(p.n_samples) + '\n';
  }
  return out;
}

SweepReport parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw FormatError(FormatErrorKind::kBadMagic, "csv: missing or unexpected header");
  }
  SweepReport report;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) {
      throw FormatError(FormatErrorKind::kShapeMismatch,
                        "csv line " + std::to_string(number) + ": expected 7 fields, got " +
                            std::to_string(f.size()));
    }
    EvalPoint p;
    p.model.gamma = parse_number(f[0], number, "gamma");
    p.model.scenario = channel::parse_scenario(f[1]);
    if (!f[2].empty()) p.model.train_snr_db = parse_number(f[2], number, "train_snr_db");
    if (!f[3].empty()) p.isr_db = parse_number(f[3], number, "isr_db");
    p.kind = parse_attack(f[4]);
    p.nmse_db = parse_number(f[5], number, "nmse_db");
    p.n_samples = static_cast<std::size_t>(parse_number(f[6], number, "n_samples"));
    report.points.push_back(p);
  }
  return report;
}

void write_csv(const SweepReport& report, const std::filesystem::path& path) {
  const std::string text = format_csv(report);
  io::write_file(path, std::span<const char>(text.data(), text.size()));
}

SweepReport read_csv(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return parse_csv(std::string(bytes.begin(), bytes.end()));
}

}  // namespace csiadv::eval
