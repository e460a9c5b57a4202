#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "steer/recon/training.hpp"

namespace steer::recon {

struct ImageFormats {
  bool pgm = true;
  bool csv = false;
};

/// Writes `stem`.bin (flat binary) plus the optional `stem`.pgm (16-bit
/// preview) and `stem`.csv.
void write_image(const std::filesystem::path& dir, const std::string& stem, const ad::Tensor& image,
                 const ImageFormats& formats = {});

/// Run directory layout:
///   loss.csv                      epoch,loss[,mse_vs_truth,ssim_vs_truth]
///   checkpoints/epoch_XXXXX.{bin,pgm,csv}
///   final.{bin,pgm,csv}
///   metrics.json                  run summary plus `extra`
/// Contents depend only on the run, so equal runs give equal bytes.
void write_run(const std::filesystem::path& dir, const TrainingRun& run,
               const std::map<std::string, double>& extra = {}, const ImageFormats& formats = {});

/// Writes a flat summary object with sorted keys.
void write_metrics_json(const std::filesystem::path& path, const std::map<std::string, double>& values,
                        const std::map<std::string, std::string>& labels = {});

}  // namespace steer::recon
