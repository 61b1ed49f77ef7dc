#include "venus/toy_inversion.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "venus/error.hpp"
#include "venus/text.hpp"

namespace venus::toy {
namespace {

constexpr std::uint64_t kEmbedSeed = 0x9e3779b97f4a7c15ULL;

std::set<std::string> word_set(std::string_view caption) {
  auto words = split_words(canonicalize_text(caption));
  return {words.begin(), words.end()};
}

void check_finite(const Vector& v, int step) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(step, "non-finite latent value");
  }
}

// z_{t+1} = a·z_t + b·ε(z_t) is the DDIM update written in coefficient form.
struct StepCoefficients {
  double a;
  double b;
};

StepCoefficients coefficients(const NoiseSchedule& s, int t) {
  const double from = s.alpha_bar(t);
  const double to = s.alpha_bar(t + 1);
  const double a = std::sqrt(to / from);
  return {a, std::sqrt(1.0 - to) - a * std::sqrt(1.0 - from)};
}

}  // namespace

// ---------------------------------------------------------------------------

NoiseSchedule NoiseSchedule::from_alphas(std::vector<double> a, int skip) {
  if (a.size() < 2) throw ConfigError("schedule needs at least one step");
  const int steps = static_cast<int>(a.size()) - 1;
  if (skip < 0 || skip >= steps) {
    throw ConfigError("skip must be in [0, " + std::to_string(steps) + "), got " + std::to_string(skip));
  }
  if (a[0] != 1.0) throw ConfigError("alpha_bar[0] must be 1");
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (!(a[i] > 0.0 && a[i] < a[i - 1])) {
      throw ConfigError("alpha_bar must be strictly decreasing in (0, 1]; fails at t=" + std::to_string(i));
    }
  }
  return NoiseSchedule(std::move(a), skip);
}

NoiseSchedule NoiseSchedule::cosine(int steps, int skip) {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  constexpr double offset = 0.008;
  auto f = [&](double t) {
    const double c = std::cos((t / steps + offset) / (1.0 + offset) * std::numbers::pi / 2.0);
    return c * c;
  };
  std::vector<double> a(static_cast<std::size_t>(steps) + 1);
  const double f0 = f(0.0);
  for (int t = 0; t <= steps; ++t) a[static_cast<std::size_t>(t)] = std::clamp(f(t) / f0, kAlphaBarFloor, 1.0);
  a[0] = 1.0;
  return from_alphas(std::move(a), skip);
}

// ---------------------------------------------------------------------------

ToyDenoiser ToyDenoiser::random(int dim, std::uint64_t seed, bool diagonal, double gain) {
  if (dim < 1) throw ConfigError("dim must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<double> a(static_cast<std::size_t>(dim) * dim, 0.0);
  if (diagonal) {
    std::uniform_real_distribution<double> u(-gain, gain);
    for (int i = 0; i < dim; ++i) a[static_cast<std::size_t>(i) * dim + i] = u(rng);
  } else {
    std::normal_distribution<double> n(0.0, gain / std::sqrt(static_cast<double>(dim)));
    for (auto& x : a) x = n(rng);
  }
  return ToyDenoiser(dim, std::move(a));
}

ToyDenoiser ToyDenoiser::from_matrix(int dim, std::vector<double> a) {
  if (dim < 1 || a.size() != static_cast<std::size_t>(dim) * dim) {
    throw DimensionError("denoiser matrix must be dim x dim");
  }
  return ToyDenoiser(dim, std::move(a));
}

bool ToyDenoiser::is_diagonal() const {
  for (int r = 0; r < dim_; ++r) {
    for (int c = 0; c < dim_; ++c) {
      if (r != c && a_[static_cast<std::size_t>(r) * dim_ + c] != 0.0) return false;
    }
  }
  return true;
}

std::vector<std::size_t> ToyDenoiser::word_indices(std::string_view word) const {
  std::vector<std::size_t> out;
  const std::uint64_t h = fnv1a64(word, kEmbedSeed);
  for (int j = 0; j < kIndicesPerWord; ++j) {
    out.push_back(static_cast<std::size_t>(splitmix64(h + static_cast<std::uint64_t>(j)) % dim_));
  }
  return out;
}

Vector ToyDenoiser::prompt_embed(std::string_view caption) const {
  Vector e(static_cast<std::size_t>(dim_), 0.0);
  for (const auto& w : word_set(caption)) {
    const std::uint64_t h = fnv1a64(w, kEmbedSeed);
    for (int j = 0; j < kIndicesPerWord; ++j) {
      const std::uint64_t mix = splitmix64(h + static_cast<std::uint64_t>(j));
      e[mix % dim_] += (mix >> 63) ? -1.0 : 1.0;
    }
  }
  return e;
}

std::vector<std::size_t> caption_diff_dims(const ToyDenoiser& d, std::string_view a, std::string_view b) {
  const auto wa = word_set(a);
  const auto wb = word_set(b);
  std::vector<std::string> diff;
  std::set_symmetric_difference(wa.begin(), wa.end(), wb.begin(), wb.end(), std::back_inserter(diff));
  std::set<std::size_t> dims;
  for (const auto& w : diff) {
    for (auto i : d.word_indices(w)) dims.insert(i);
  }
  return {dims.begin(), dims.end()};
}

// ---------------------------------------------------------------------------

Vector cfg_combine(std::span<const double> eps_null, std::span<const double> eps_text, double s) {
  if (eps_null.size() != eps_text.size()) {
    throw DimensionError("cfg_combine: " + std::to_string(eps_null.size()) + " vs " +
                         std::to_string(eps_text.size()));
  }
  Vector out(eps_null.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = eps_null[i] + s * (eps_text[i] - eps_null[i]);
  return out;
}

Vector predict_noise(const ToyDenoiser& d, const LatentState& z, std::string_view caption) {
  if (static_cast<int>(z.values.size()) != d.dim()) {
    throw DimensionError("latent has " + std::to_string(z.values.size()) + " values, denoiser expects " +
                         std::to_string(d.dim()));
  }
  const auto n = static_cast<Eigen::Index>(d.dim());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(d.matrix().data(), n, n);
  Eigen::Map<const Eigen::VectorXd> zv(z.values.data(), n);
  Vector out = d.prompt_embed(caption);
  Eigen::Map<Eigen::VectorXd>(out.data(), n) += a * zv;
  return out;
}

namespace {

Vector guided_noise(const ToyDenoiser& d, const LatentState& z, std::string_view caption, double s) {
  return cfg_combine(predict_noise(d, z, ""), predict_noise(d, z, caption), s);
}

}  // namespace

std::vector<LatentState> invert(const ToyDenoiser& d, const NoiseSchedule& schedule, const LatentState& z0,
                                std::string_view src_caption, double s) {
  if (z0.step != 0) throw ConfigError("inversion must start from step 0");
  if (static_cast<int>(z0.values.size()) != d.dim()) throw DimensionError("latent dimension mismatch");
  check_finite(z0.values, 0);

  std::vector<LatentState> traj;
  traj.reserve(static_cast<std::size_t>(schedule.steps()) + 1);
  traj.push_back(z0);
  for (int t = 0; t < schedule.steps(); ++t) {
    const auto& z = traj.back();
    const auto eps = guided_noise(d, z, src_caption, s);
    const double ab_t = schedule.alpha_bar(t);
    const double ab_next = schedule.alpha_bar(t + 1);
    LatentState next{Vector(z.values.size()), t + 1};
    for (std::size_t i = 0; i < eps.size(); ++i) {
      const double x0 = (z.values[i] - std::sqrt(1.0 - ab_t) * eps[i]) / std::sqrt(ab_t);
      next.values[i] = std::sqrt(ab_next) * x0 + std::sqrt(1.0 - ab_next) * eps[i];
    }
    check_finite(next.values, t + 1);
    traj.push_back(std::move(next));
  }
  return traj;
}

LatentState edit(const ToyDenoiser& d, const NoiseSchedule& schedule, std::span<const LatentState> trajectory,
                 const GuidanceConfig& cfg) {
  if (static_cast<int>(trajectory.size()) != schedule.steps() + 1) {
    throw DimensionError("trajectory has " + std::to_string(trajectory.size()) + " states, schedule needs " +
                         std::to_string(schedule.steps() + 1));
  }
  const int start = schedule.steps() - schedule.skip();
  const auto n = static_cast<Eigen::Index>(d.dim());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(d.matrix().data(), n, n);

  // ε is affine in z: ε(z) = A z + c with c the guided noise at z = 0.
  const LatentState origin{Vector(static_cast<std::size_t>(n), 0.0), 0};
  const auto c_vec = guided_noise(d, origin, cfg.tgt_caption, cfg.scale);
  Eigen::Map<const Eigen::VectorXd> c(c_vec.data(), n);
  const bool diagonal = d.is_diagonal();

  Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(trajectory[static_cast<std::size_t>(start)].values.data(), n);
  for (int t = start; t > 0; --t) {
    // Solve z_t = a·z_{t-1} + b·(A z_{t-1} + c) for z_{t-1}.
    const auto [ca, cb] = coefficients(schedule, t - 1);
    const Eigen::VectorXd rhs = z - cb * c;
    if (diagonal) {
      z = (rhs.array() / (ca + cb * a.diagonal().array())).matrix();
    } else {
      const Eigen::MatrixXd m = ca * Eigen::MatrixXd::Identity(n, n) + cb * a;
      z = m.partialPivLu().solve(rhs);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(z[i])) throw NumericError(t - 1, "non-finite latent value");
    }
  }
  return {Vector(z.data(), z.data() + n), 0};
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("max_abs_diff size mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

LatentState random_latent(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  LatentState z{Vector(static_cast<std::size_t>(dim)), 0};
  for (auto& v : z.values) v = n(rng);
  return z;
}

nlohmann::ordered_json run_demo(const DemoOptions& o) {
  const auto schedule = NoiseSchedule::cosine(o.steps, o.skip);
  const auto denoiser = ToyDenoiser::random(o.dim, o.seed, o.diagonal);
  const auto z0 = random_latent(o.dim, splitmix64(o.seed));

  auto run = [&](double scale, const std::string& tgt) {
    const auto traj = invert(denoiser, schedule, z0, o.src, scale);
    return edit(denoiser, schedule, traj, {scale, o.src, tgt});
  };

  const auto recon = run(o.scale, o.src);
  const auto edited = run(o.scale, o.tgt);

  nlohmann::ordered_json report;
  report["recon_error"] = max_abs_diff(recon.values, z0.values);
  std::vector<std::size_t> changed;
  double max_change = 0.0;
  for (std::size_t i = 0; i < z0.values.size(); ++i) {
    const double delta = std::abs(edited.values[i] - recon.values[i]);
    max_change = std::max(max_change, delta);
    if (delta > kChangeThreshold) changed.push_back(i);
  }
  report["changed_dims"] = changed;
  report["expected_dims"] = caption_diff_dims(denoiser, o.src, o.tgt);
  report["max_change"] = max_change;
  auto per_scale = nlohmann::ordered_json::array();
  for (double s : kDemoScales) {
    const auto e = run(s, o.tgt);
    per_scale.push_back({{"scale", s}, {"deviation", max_abs_diff(e.values, z0.values)}});
  }
  report["per_scale_deviation"] = std::move(per_scale);
  report["params"] = {{"dim", o.dim},     {"steps", o.steps}, {"skip", o.skip},        {"scale", o.scale},
                      {"src", o.src},     {"tgt", o.tgt},     {"seed", o.seed},       {"diagonal", o.diagonal}};
  return report;
}

}  // namespace venus::toy
