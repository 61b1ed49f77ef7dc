#pragma once

// Closed-form diffusion sandbox: a linear-plus-embedding noise predictor, a
// deterministic DDIM trajectory, classifier-free guidance and a skip-aware
// editing pass. Small enough that reconstruction, locality and guidance
// monotonicity can be checked to machine precision.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace venus::toy {

inline constexpr int kDefaultDim = 64;
inline constexpr int kDefaultSteps = 50;
inline constexpr int kDefaultSkip = 25;
inline constexpr double kDefaultScale = 7.5;
inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr double kAlphaBarFloor = 1e-4;

using Vector = std::vector<double>;

struct LatentState {
  Vector values;
  int step = 0;
};

/// ᾱ_0 … ᾱ_T, strictly decreasing in (0, 1] with ᾱ_0 = 1.
class NoiseSchedule {
 public:
  /// Cosine schedule (offset 0.008) clipped to [1e-4, 1]. Throws ConfigError
  /// if `skip` is outside [0, steps) or clipping flattens the tail.
  static NoiseSchedule cosine(int steps = kDefaultSteps, int skip = kDefaultSkip);
  static NoiseSchedule from_alphas(std::vector<double> alphas_bar, int skip);

  int steps() const { return static_cast<int>(alphas_bar_.size()) - 1; }
  int skip() const { return skip_; }
  double alpha_bar(int t) const { return alphas_bar_.at(static_cast<std::size_t>(t)); }
  std::span<const double> alphas_bar() const { return alphas_bar_; }

 private:
  NoiseSchedule(std::vector<double> a, int skip) : alphas_bar_(std::move(a)), skip_(skip) {}
  std::vector<double> alphas_bar_;
  int skip_;
};

/// ε(z, c) = A z + embed(c). `a` is row-major dim × dim.
class ToyDenoiser {
 public:
  /// Seeded random A with spectral radius about `gain`: diagonal entries drawn
  /// from U(-gain, gain), or a dense gain·G/√dim Gaussian matrix.
  static ToyDenoiser random(int dim, std::uint64_t seed, bool diagonal, double gain = 0.2);
  /// Throws DimensionError unless `a.size() == dim * dim`.
  static ToyDenoiser from_matrix(int dim, std::vector<double> a);

  int dim() const { return dim_; }
  std::span<const double> matrix() const { return a_; }
  bool is_diagonal() const;

  /// Each distinct canonical word adds ±1 at `kIndicesPerWord` hashed
  /// positions. Empty caption → zero vector.
  Vector prompt_embed(std::string_view caption) const;
  /// Hashed positions a single word activates.
  std::vector<std::size_t> word_indices(std::string_view word) const;

  static constexpr int kIndicesPerWord = 2;

 private:
  ToyDenoiser(int dim, std::vector<double> a) : dim_(dim), a_(std::move(a)) {}
  int dim_;
  std::vector<double> a_;
};

/// Positions activated by words present in exactly one of the two captions.
/// With a diagonal A these are the only dimensions an edit may move.
std::vector<std::size_t> caption_diff_dims(const ToyDenoiser& d, std::string_view a, std::string_view b);

struct GuidanceConfig {
  double scale = kDefaultScale;
  std::string src_caption;
  std::string tgt_caption;
};

/// eps_null + s · (eps_text − eps_null). Throws DimensionError on size mismatch.
Vector cfg_combine(std::span<const double> eps_null, std::span<const double> eps_text, double s);

Vector predict_noise(const ToyDenoiser& d, const LatentState& z, std::string_view caption);

/// Deterministic forward DDIM pass z_0 → z_T under guided noise for
/// `src_caption`. Returns all T + 1 states. Throws NumericError on overflow.
std::vector<LatentState> invert(const ToyDenoiser& d, const NoiseSchedule& schedule, const LatentState& z0,
                                std::string_view src_caption, double s);

/// Starts at trajectory[T − skip] and walks back to step 0 under guidance for
/// cfg.tgt_caption. Each reverse step solves the forward update for its
/// input exactly, so tgt == src reproduces z_0.
LatentState edit(const ToyDenoiser& d, const NoiseSchedule& schedule, std::span<const LatentState> trajectory,
                 const GuidanceConfig& cfg);

double max_abs_diff(std::span<const double> a, std::span<const double> b);

struct DemoOptions {
  int dim = kDefaultDim;
  int steps = kDefaultSteps;
  int skip = kDefaultSkip;
  double scale = kDefaultScale;
  std::string src = "horse standing on field";
  std::string tgt = "zebra standing on field";
  std::uint64_t seed = kDefaultSeed;
  bool diagonal = true;
};

inline constexpr double kChangeThreshold = 1e-5;
inline constexpr double kDemoScales[] = {0.0, 1.0, 2.5, 5.0, 7.5};

/// {recon_error, changed_dims, expected_dims, max_change, per_scale_deviation, params}.
nlohmann::ordered_json run_demo(const DemoOptions& options);

/// Seeded N(0, 1) latent at step 0.
LatentState random_latent(int dim, std::uint64_t seed);

}  // namespace venus::toy
