#include "venus/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "venus/error.hpp"
#include "venus/text.hpp"

namespace venus::metrics {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void require_same_size(const ImageBuffer& a, const ImageBuffer& b) {
  a.validate();
  b.validate();
  if (a.width != b.width || a.height != b.height) {
    throw DimensionError("image sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                         std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

std::vector<double> gaussian_1d(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const int r = size / 2;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - r;
    k[static_cast<std::size_t>(i)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// "Valid" separable filtering: out has (w - n + 1) x (h - n + 1) samples.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[static_cast<std::size_t>(i)] * src[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

double ssim_channel(const ImageBuffer& a, const ImageBuffer& b, int c, const SsimConstants& k,
                    const std::vector<double>& kernel) {
  const int w = a.width;
  const int h = a.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) {
      const std::size_t p = static_cast<std::size_t>(j) * w + i;
      x[p] = a.at(i, j, c);
      y[p] = b.at(i, j, c);
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
  }
  const auto mx = filter_valid(x, w, h, kernel);
  const auto my = filter_valid(y, w, h, kernel);
  const auto sxx = filter_valid(xx, w, h, kernel);
  const auto syy = filter_valid(yy, w, h, kernel);
  const auto sxy = filter_valid(xy, w, h, kernel);

  const double c1 = (k.k1 * k.dynamic_range) * (k.k1 * k.dynamic_range);
  const double c2 = (k.k2 * k.dynamic_range) * (k.k2 * k.dynamic_range);
  double total = 0.0;
  for (std::size_t p = 0; p < mx.size(); ++p) {
    const double vx = sxx[p] - mx[p] * mx[p];
    const double vy = syy[p] - my[p] * my[p];
    const double cov = sxy[p] - mx[p] * my[p];
    const double num = (2.0 * mx[p] * my[p] + c1) * (2.0 * cov + c2);
    const double den = (mx[p] * mx[p] + my[p] * my[p] + c1) * (vx + vy + c2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace

Psnr psnr(const ImageBuffer& a, const ImageBuffer& b) {
  require_same_size(a, b);
  // Integer sum of squared errors keeps the MSE exact for 8-bit inputs.
  std::uint64_t sse = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const int d = static_cast<int>(a.data[i]) - static_cast<int>(b.data[i]);
    sse += static_cast<std::uint64_t>(d * d);
  }
  if (sse == 0) return {true, 0.0};
  const double mse = static_cast<double>(sse) / static_cast<double>(a.data.size());
  return {false, 10.0 * std::log10(255.0 * 255.0 / mse)};
}

double ssim(const ImageBuffer& a, const ImageBuffer& b, const SsimConstants& constants) {
  require_same_size(a, b);
  if (a.width < constants.window || a.height < constants.window) {
    throw DimensionError("image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                         " is smaller than the " + std::to_string(constants.window) + "x" +
                         std::to_string(constants.window) + " SSIM window");
  }
  const auto kernel = gaussian_1d(constants.window, constants.sigma);
  double sum = 0.0;
  for (int c = 0; c < 3; ++c) sum += ssim_channel(a, b, c, constants, kernel);
  return sum / 3.0;
}

// ---------------------------------------------------------------------------

EvalManifest parse_eval_manifest(std::string_view bytes, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ParseError("malformed eval manifest at byte " + std::to_string(e.byte), e.byte);
  }
  const json* entries = &doc;
  if (doc.is_object()) {
    auto it = doc.find("entries");
    if (it == doc.end()) throw ValidationError("eval manifest needs an \"entries\" array");
    entries = &*it;
  }
  if (!entries->is_array()) throw ValidationError("eval manifest entries must be an array");

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  auto str = [](const json& e, const char* field) -> std::optional<std::string> {
    auto it = e.find(field);
    if (it == e.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ValidationError(std::string("eval entry field \"") + field + "\" must be a string");
    return it->get<std::string>();
  };

  EvalManifest m;
  std::set<std::string> seen;
  for (const auto& e : *entries) {
    if (!e.is_object()) throw ValidationError("eval entry must be an object");
    auto id = str(e, "id");
    if (!id || id->empty()) throw ValidationError("eval entry without an id");
    if (!seen.insert(*id).second) throw ValidationError("duplicate eval entry id \"" + *id + "\"");
    EvalEntry entry{*id, {}, {}, str(e, "gttp")};
    if (auto run = str(e, "run_dir")) {
      entry.source_image = resolve(*run) / "input.png";
      entry.edited_image = resolve(*run) / "output.png";
    } else {
      auto src = str(e, "source_image_path");
      auto dst = str(e, "edited_image_path");
      if (!src || !dst) {
        throw ValidationError("eval entry \"" + *id + "\" needs source_image_path and edited_image_path or run_dir");
      }
      entry.source_image = resolve(*src);
      entry.edited_image = resolve(*dst);
    }
    m.entries.push_back(std::move(entry));
  }
  return m;
}

std::set<std::string> parse_metric_list(std::string_view csv) {
  std::set<std::string> out;
  for (auto& w : split_words(std::string(csv))) out.insert(canonicalize_text(w));
  return out;
}

MetricReport evaluate(const EvalManifest& manifest, const std::set<std::string>& metrics) {
  for (const auto& m : metrics) {
    if (m != "psnr" && m != "ssim") throw ConfigError("unknown metric \"" + m + "\"");
  }
  if (metrics.empty()) throw ConfigError("no metrics requested");

  std::vector<const EvalEntry*> order;
  for (const auto& e : manifest.entries) order.push_back(&e);
  std::sort(order.begin(), order.end(), [](const EvalEntry* l, const EvalEntry* r) { return l->id < r->id; });

  MetricReport report;
  report.metrics = metrics;
  double psnr_sum = 0.0;
  std::size_t psnr_n = 0;
  double ssim_sum = 0.0;
  std::size_t ssim_n = 0;

  for (const auto* e : order) {
    ImageBuffer src, dst;
    try {
      for (const auto* p : {&e->source_image, &e->edited_image}) {
        if (!std::filesystem::exists(*p)) throw IoError("file not found");
      }
      src = decode_png(read_file(e->source_image));
      dst = decode_png(read_file(e->edited_image));
    } catch (const IoError& err) {
      report.skipped.push_back({e->id, err.what()});
      continue;
    } catch (const ProtocolError& err) {
      report.skipped.push_back({e->id, std::string("decode error: ") + err.what()});
      continue;
    }
    ItemScore score{e->id, std::nullopt, std::nullopt};
    try {
      if (metrics.contains("psnr")) score.psnr = psnr(src, dst);
      if (metrics.contains("ssim")) score.ssim = ssim(src, dst);
    } catch (const DimensionError& err) {
      report.skipped.push_back({e->id, err.what()});
      continue;
    }
    if (score.psnr) {
      if (score.psnr->identical) {
        ++report.psnr_identical;
      } else {
        psnr_sum += score.psnr->db;
        ++psnr_n;
      }
    }
    if (score.ssim) {
      ssim_sum += *score.ssim;
      ++ssim_n;
    }
    report.items.push_back(std::move(score));
  }
  if (psnr_n) report.psnr_mean = psnr_sum / static_cast<double>(psnr_n);
  if (ssim_n) report.ssim_mean = ssim_sum / static_cast<double>(ssim_n);
  return report;
}

ordered_json report_to_json(const MetricReport& r) {
  ordered_json doc;
  doc["metrics"] = std::vector<std::string>(r.metrics.begin(), r.metrics.end());
  doc["constants"] = {{"ssim",
                       {{"window", kSsim.window},
                        {"sigma", kSsim.sigma},
                        {"k1", kSsim.k1},
                        {"k2", kSsim.k2},
                        {"dynamic_range", kSsim.dynamic_range},
                        {"channels", "rgb_mean"}}},
                      {"psnr", {{"peak", 255}, {"identical_sentinel", "inf"}}}};
  doc["count"] = r.count();
  auto items = ordered_json::array();
  for (const auto& it : r.items) {
    ordered_json o;
    o["id"] = it.id;
    if (it.psnr) {
      if (it.psnr->identical) {
        o["psnr_db"] = "inf";
      } else {
        o["psnr_db"] = it.psnr->db;
      }
    }
    if (it.ssim) o["ssim"] = *it.ssim;
    items.push_back(std::move(o));
  }
  doc["items"] = std::move(items);
  ordered_json agg;
  agg["psnr_db_mean"] = r.psnr_mean ? ordered_json(*r.psnr_mean) : ordered_json(nullptr);
  agg["psnr_identical_count"] = r.psnr_identical;
  agg["ssim_mean"] = r.ssim_mean ? ordered_json(*r.ssim_mean) : ordered_json(nullptr);
  if (r.psnr_identical) {
    agg["note"] = std::to_string(r.psnr_identical) + " identical pair(s) excluded from the PSNR mean";
  }
  doc["aggregate"] = std::move(agg);
  auto skipped = ordered_json::array();
  for (const auto& s : r.skipped) skipped.push_back({{"id", s.id}, {"reason", s.reason}});
  doc["skipped"] = std::move(skipped);
  return doc;
}

}  // namespace venus::metrics
