#pragma once

#include <filesystem>
#include <string>

#include "csiadv/eval/sweep.hpp"

namespace csiadv::eval {

/// Columns gamma,scenario,train_snr_db,isr_db,attack,nmse_db,n_samples. An
/// empty train_snr_db means noiseless training; the baseline row has an empty
/// isr_db and attack=none. Numbers use shortest round-trip formatting.
std::string format_csv(const SweepReport& report);
SweepReport parse_csv(const std::string& text);

void write_csv(const SweepReport& report, const std::filesystem::path& path);
SweepReport read_csv(const std::filesystem::path& path);

/// Shortest decimal that parses back to the same double; "-inf"/"inf" literal.
std::string format_number(double v);

struct PlotOptions {
  std::string title;
  int width = 720;
  int height = 480;
};

/// Standalone SVG: NMSE (dB) against ISR (dB), one polyline per (model,
/// attack kind), one dashed horizontal baseline per model, 5% axis margins.
std::string render_svg(const SweepReport& report, const PlotOptions& options = {});
void render_plot(const SweepReport& report, const std::filesystem::path& path,
                 const PlotOptions& options = {});

}  // namespace csiadv::eval
