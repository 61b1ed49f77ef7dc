#pragma once

// Seeded random inputs for property tests.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "venus/image.hpp"
#include "venus/scene_graph.hpp"

namespace venus::testing {

using Rng = std::mt19937_64;

struct GraphGenOptions {
  int max_relations = 10;
  int max_nodes = 7;
  int max_orphans = 2;
  double attribute_prob = 0.4;
  /// Sprinkle upper case and extra blanks into names so canonicalization is
  /// exercised on the way in.
  bool noisy_text = true;
};

int uniform_int(Rng& rng, int lo, int hi);
bool coin(Rng& rng, double p);

SceneGraph random_graph(Rng& rng, const GraphGenOptions& options = {});

/// Target derived from the source by renames, attribute edits, dropped and
/// added relations, with node ids reshuffled so identity must come from
/// rendered text rather than ids.
std::pair<SceneGraph, SceneGraph> random_graph_pair(Rng& rng, const GraphGenOptions& options = {});

ImageBuffer uniform_image(int w, int h, std::uint8_t value);
ImageBuffer noise_image(Rng& rng, int w, int h);
/// Smooth diagonal gradient with a checker overlay; mid contrast.
ImageBuffer pattern_image(int w, int h);
/// Adds clamped Gaussian noise of the given sigma.
ImageBuffer add_noise(const ImageBuffer& img, Rng& rng, double sigma);
/// Shifts content right by `dx` pixels, repeating the left column.
ImageBuffer shift_right(const ImageBuffer& img, int dx);
ImageBuffer invert(const ImageBuffer& img);

/// Ten fixed image pairs covering noise, structure, shifts, inversion and
/// flat regions; used to compare SSIM implementations.
std::vector<std::pair<ImageBuffer, ImageBuffer>> ssim_fixture_pairs();

}  // namespace venus::testing
