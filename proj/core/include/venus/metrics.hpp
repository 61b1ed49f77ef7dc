#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "venus/image.hpp"

namespace venus::metrics {

/// PSNR in dB, or the identical-image sentinel when MSE is zero.
struct Psnr {
  bool identical = false;
  double db = 0.0;
};

/// 10·log10(255² / MSE) over all RGB samples. Throws DimensionError on size
/// mismatch.
Psnr psnr(const ImageBuffer& a, const ImageBuffer& b);

struct SsimConstants {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

inline constexpr SsimConstants kSsim{};

/// Single-scale SSIM with a normalized Gaussian window, evaluated at every
/// position where the window fits entirely inside the image, averaged over
/// positions and then over the three channels. Throws DimensionError on size
/// mismatch or when either side is smaller than the window.
double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimConstants& constants = kSsim);

struct EvalEntry {
  std::string id;
  std::filesystem::path source_image;
  std::filesystem::path edited_image;
  std::optional<std::string> gttp;
};

struct EvalManifest {
  std::vector<EvalEntry> entries;
};

/// Accepts {"entries": [{"id", "source_image_path", "edited_image_path"}]} or
/// entries with "run_dir" instead of the two paths. Relative paths resolve
/// against `base_dir`. Throws ParseError / ValidationError.
EvalManifest parse_eval_manifest(std::string_view bytes, const std::filesystem::path& base_dir = {});

struct ItemScore {
  std::string id;
  std::optional<Psnr> psnr;
  std::optional<double> ssim;
};

struct SkippedItem {
  std::string id;
  std::string reason;
};

struct MetricReport {
  std::vector<ItemScore> items;
  std::vector<SkippedItem> skipped;
  std::optional<double> psnr_mean;  // over non-identical items
  std::size_t psnr_identical = 0;
  std::optional<double> ssim_mean;
  std::set<std::string> metrics;

  std::size_t count() const { return items.size(); }
};

/// Known names: "psnr", "ssim". Throws ConfigError on an unknown name before
/// touching any file. Unreadable pairs are skipped with a reason.
MetricReport evaluate(const EvalManifest& manifest, const std::set<std::string>& metrics);

std::set<std::string> parse_metric_list(std::string_view csv);

nlohmann::ordered_json report_to_json(const MetricReport& report);

}  // namespace venus::metrics
