#pragma once

// Bag-of-visual-words retrieval of non-consecutive overlapping frames:
// dense gradient-histogram descriptors, a k-means vocabulary, per-frame word
// counts and their cosine similarity matrix.

#include <Eigen/Dense>

#include <cstdint>
#include <utility>
#include <vector>

#include "fetomosaic/geometry.hpp"
#include "fetomosaic/imageproc.hpp"

namespace fetomosaic {

constexpr int kDescriptorSize = 128;
constexpr int kDescriptorPatch = 32;

struct Descriptor {
  Eigen::Matrix<double, kDescriptorSize, 1> vector;
  Point2 keypoint;
};

// Keypoints every `step` px whose 32x32 patch lies inside the image and the
// mask. Each patch is pooled into 4x4 cells of 8 orientation bins (magnitude
// weighted), normalized, clamped at 0.2 and renormalized. Flat patches are
// dropped.
std::vector<Descriptor> extract_descriptors(const Image& gray, const Mask& mask, int step = 16);

// Row-stacked descriptor vectors.
Eigen::MatrixXd descriptor_matrix(const std::vector<Descriptor>& descriptors);

struct Vocabulary {
  Eigen::MatrixXd centroids;  // K x D
  std::uint64_t kmeans_seed = 0;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // after each Lloyd iteration
  int iterations = 0;

  int size() const { return static_cast<int>(centroids.rows()); }
};

// k-means++ seeding then Lloyd iterations until assignments stop changing
// (at most max_iterations). Empty clusters are re-seeded with the point
// farthest from its centroid.
Vocabulary build_vocabulary(const Eigen::MatrixXd& data, int k, std::uint64_t seed,
                            int max_iterations = 100);

// Nearest centroid by L2 distance, ties to the lowest index.
int nearest_word(const Vocabulary& vocab, const Eigen::Ref<const Eigen::VectorXd>& x);

struct Signature {
  Eigen::VectorXi counts;

  int total() const { return counts.sum(); }
};

Signature compute_signature(const std::vector<Descriptor>& descriptors, const Vocabulary& vocab);

// Cosine of the angle between two count vectors; 0 if either is all-zero.
double cosine_similarity(const Signature& u, const Signature& v);

Eigen::MatrixXd build_similarity_matrix(const std::vector<Signature>& signatures);

// Pairs (i < j) with j - i >= min_gap and similarity >= threshold, most
// similar first, at most `budget` of them.
std::vector<std::pair<int, int>> select_pairs(const Eigen::MatrixXd& sim, double threshold,
                                              int budget, int min_gap);

}  // namespace fetomosaic
