#include "steer/recon/run_output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "steer/error.hpp"
#include "steer/imaging/image_io.hpp"

namespace steer::recon {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
}

std::string shortest(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_image(const fs::path& dir, const std::string& stem, const ad::Tensor& image, const ImageFormats& formats) {
  ensure_dir(dir);
  imaging::write_flat(dir / (stem + ".bin"), image);
  if (formats.pgm) imaging::write_pgm16(dir / (stem + ".pgm"), image);
  if (formats.csv) imaging::write_csv(dir / (stem + ".csv"), image);
}

void write_metrics_json(const fs::path& path, const std::map<std::string, double>& values,
                        const std::map<std::string, std::string>& labels) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : labels) j[k] = v;
  for (const auto& [k, v] : values) {
    if (std::isfinite(v)) j[k] = v;
    else j[k] = nullptr;
  }
  write_text(path, j.dump(2) + "\n");
}

void write_run(const fs::path& dir, const TrainingRun& run, const std::map<std::string, double>& extra,
               const ImageFormats& formats) {
  ensure_dir(dir);
  const bool with_truth = !run.mse_vs_truth.empty();
  std::string csv = with_truth ? "epoch,loss,mse_vs_truth,ssim_vs_truth\n" : "epoch,loss\n";
  for (std::size_t e = 0; e < run.loss.size(); ++e) {
    csv += std::to_string(e + 1) + "," + shortest(run.loss[e]);
    if (with_truth) csv += "," + shortest(run.mse_vs_truth[e]) + "," + shortest(run.ssim_vs_truth[e]);
    csv += "\n";
  }
  write_text(dir / "loss.csv", csv);

  for (const auto& cp : run.checkpoints) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "epoch_%05zu", cp.epoch);
    write_image(dir / "checkpoints", stem, cp.image, formats);
  }
  if (run.output.defined()) write_image(dir, "final", run.output, formats);

  std::map<std::string, double> values = extra;
  values["epochs"] = static_cast<double>(run.epochs);
  values["seed"] = static_cast<double>(run.seed);
  if (!run.loss.empty()) values["final_loss"] = run.loss.back();
  if (with_truth) {
    values["final_mse"] = run.mse_vs_truth.back();
    values["final_ssim"] = run.ssim_vs_truth.back();
  }
  write_metrics_json(dir / "metrics.json", values, {{"network", run.label}});
}

}  // namespace steer::recon
