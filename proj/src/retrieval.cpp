#include "fetomosaic/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "fetomosaic/error.hpp"

namespace fetomosaic {

namespace {

constexpr int kCells = 4;
constexpr int kBins = 8;
constexpr int kCellSize = kDescriptorPatch / kCells;
constexpr double kClamp = 0.2;

bool patch_inside(const Mask& mask, int x0, int y0) {
  for (int y = y0; y < y0 + kDescriptorPatch; ++y) {
    for (int x = x0; x < x0 + kDescriptorPatch; ++x) {
      if (!mask(y, x)) return false;
    }
  }
  return true;
}

// Squared distances from every row of `data` to every centroid (n x k).
Eigen::MatrixXd pairwise_sq(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centroids) {
  Eigen::MatrixXd d = -2.0 * data * centroids.transpose();
  d.colwise() += data.rowwise().squaredNorm();
  d.rowwise() += centroids.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

// Index of the smallest entry, first one on ties.
Eigen::Index argmin(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < row.size(); ++k) {
    if (row(k) < row(best)) best = k;
  }
  return best;
}

Eigen::MatrixXd kmeanspp(const Eigen::MatrixXd& data, int k, std::mt19937_64& rng) {
  const Eigen::Index n = data.rows();
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Eigen::MatrixXd centroids(k, data.cols());
  auto first = static_cast<Eigen::Index>(uni(rng) * static_cast<double>(n));
  first = std::min(first, n - 1);
  centroids.row(0) = data.row(first);
  Eigen::VectorXd d2 = (data.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    if (!(total > 0.0)) {
      throw Error(ErrorCode::TooFewDescriptors,
                  "only " + std::to_string(c) + " distinct descriptors for " + std::to_string(k) +
                      " words");
    }
    const double target = uni(rng) * total;
    double acc = 0.0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2(i) <= 0.0) continue;
      acc += d2(i);
      pick = i;
      if (acc > target) break;
    }
    centroids.row(c) = data.row(pick);
    d2 = d2.cwiseMin((data.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

}  // namespace

std::vector<Descriptor> extract_descriptors(const Image& gray, const Mask& mask, int step) {
  if (step < 4) throw Error(ErrorCode::InvalidArgument, "descriptor step must be >= 4");
  if (gray.rows() != mask.rows() || gray.cols() != mask.cols()) {
    throw Error(ErrorCode::InvalidArgument, "image and mask sizes differ");
  }
  const int h = static_cast<int>(gray.rows());
  const int w = static_cast<int>(gray.cols());
  const Mask inner = erode(mask, 1);
  Image mag = Image::Zero(h, w);
  Image ang = Image::Zero(h, w);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      if (!inner(y, x)) continue;
      const double gx = 0.5 * (gray(y, x + 1) - gray(y, x - 1));
      const double gy = 0.5 * (gray(y + 1, x) - gray(y - 1, x));
      mag(y, x) = std::hypot(gx, gy);
      ang(y, x) = std::atan2(gy, gx);
    }
  }

  const int half = kDescriptorPatch / 2;
  const double sigma = 0.5 * kDescriptorPatch;
  std::vector<Descriptor> out;
  for (int cy = step; cy + half <= h; cy += step) {
    if (cy - half < 0) continue;
    for (int cx = step; cx + half <= w; cx += step) {
      if (cx - half < 0) continue;
      const int x0 = cx - half;
      const int y0 = cy - half;
      if (!patch_inside(mask, x0, y0)) continue;
      Descriptor d;
      d.vector.setZero();
      d.keypoint = Point2(cx, cy);
      for (int py = 0; py < kDescriptorPatch; ++py) {
        for (int px = 0; px < kDescriptorPatch; ++px) {
          const double m = mag(y0 + py, x0 + px);
          if (m == 0.0) continue;
          const double dx = px + 0.5 - half;
          const double dy = py + 0.5 - half;
          const double weight = m * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
          double a = ang(y0 + py, x0 + px);
          if (a < 0.0) a += 2.0 * std::numbers::pi;
          const double pos = a / (2.0 * std::numbers::pi) * kBins;
          const int b0 = static_cast<int>(std::floor(pos)) % kBins;
          const int b1 = (b0 + 1) % kBins;
          const double t = pos - std::floor(pos);
          // Bilinear spread over the neighboring cells.
          const double cxf = (px + 0.5) / kCellSize - 0.5;
          const double cyf = (py + 0.5) / kCellSize - 0.5;
          const int ci = static_cast<int>(std::floor(cxf));
          const int cj = static_cast<int>(std::floor(cyf));
          const double u = cxf - ci;
          const double v = cyf - cj;
          for (int dj = 0; dj < 2; ++dj) {
            const int row = cj + dj;
            if (row < 0 || row >= kCells) continue;
            for (int di = 0; di < 2; ++di) {
              const int col = ci + di;
              if (col < 0 || col >= kCells) continue;
              const double ws = weight * (di ? u : 1.0 - u) * (dj ? v : 1.0 - v);
              const int cell = row * kCells + col;
              d.vector(cell * kBins + b0) += ws * (1.0 - t);
              d.vector(cell * kBins + b1) += ws * t;
            }
          }
        }
      }
      double norm = d.vector.norm();
      if (!(norm > 0.0)) continue;
      d.vector /= norm;
      d.vector = d.vector.cwiseMin(kClamp);
      norm = d.vector.norm();
      d.vector /= norm;
      out.push_back(d);
    }
  }
  return out;
}

Eigen::MatrixXd descriptor_matrix(const std::vector<Descriptor>& descriptors) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(descriptors.size()), kDescriptorSize);
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = descriptors[i].vector.transpose();
  }
  return m;
}

Vocabulary build_vocabulary(const Eigen::MatrixXd& data, int k, std::uint64_t seed,
                            int max_iterations) {
  if (k < 1 || max_iterations < 1) {
    throw Error(ErrorCode::InvalidArgument, "vocabulary needs k >= 1 and iterations >= 1");
  }
  if (data.rows() < k) {
    throw Error(ErrorCode::TooFewDescriptors, std::to_string(data.rows()) +
                                                  " descriptors for " + std::to_string(k) +
                                                  " words");
  }
  std::mt19937_64 rng(seed);
  Vocabulary vocab;
  vocab.kmeans_seed = seed;
  vocab.centroids = kmeanspp(data, k, rng);

  const Eigen::Index n = data.rows();
  std::vector<Eigen::Index> assign(n, -1);
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::MatrixXd d2 = pairwise_sq(data, vocab.centroids);
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index a = argmin(d2.row(i));
      changed |= a != assign[i];
      assign[i] = a;
    }
    vocab.iterations = it + 1;
    if (!changed && it > 0) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, data.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[i]) += data.row(i);
      ++counts(assign[i]);
    }
    std::vector<bool> taken(n, false);
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0) {
        vocab.centroids.row(c) = sums.row(c) / counts(c);
        continue;
      }
      // Farthest point from its own centroid that has not been used yet.
      Eigen::Index far = -1;
      double best = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (taken[i]) continue;
        const double d = d2(i, assign[i]);
        if (d > best) {
          best = d;
          far = i;
        }
      }
      taken[far] = true;
      vocab.centroids.row(c) = data.row(far);
      assign[far] = c;
    }
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      inertia += (data.row(i) - vocab.centroids.row(assign[i])).squaredNorm();
    }
    vocab.inertia_history.push_back(inertia);
  }
  vocab.inertia = vocab.inertia_history.back();
  return vocab;
}

int nearest_word(const Vocabulary& vocab, const Eigen::Ref<const Eigen::VectorXd>& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < vocab.size(); ++c) {
    const double d = (vocab.centroids.row(c).transpose() - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Signature compute_signature(const std::vector<Descriptor>& descriptors, const Vocabulary& vocab) {
  Signature s;
  s.counts = Eigen::VectorXi::Zero(vocab.size());
  for (const auto& d : descriptors) ++s.counts(nearest_word(vocab, d.vector));
  return s;
}

double cosine_similarity(const Signature& u, const Signature& v) {
  if (u.counts.size() != v.counts.size()) {
    throw Error(ErrorCode::LengthMismatch, "signatures have different vocabulary sizes");
  }
  const Eigen::VectorXd a = u.counts.cast<double>();
  const Eigen::VectorXd b = v.counts.cast<double>();
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), 0.0, 1.0);
}

Eigen::MatrixXd build_similarity_matrix(const std::vector<Signature>& signatures) {
  const auto n = static_cast<Eigen::Index>(signatures.size());
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "similarity needs at least two frames");
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, i) = signatures[i].total() > 0 ? 1.0 : 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      s(i, j) = cosine_similarity(signatures[i], signatures[j]);
      s(j, i) = s(i, j);
    }
  }
  return s;
}

std::vector<std::pair<int, int>> select_pairs(const Eigen::MatrixXd& sim, double threshold,
                                              int budget, int min_gap) {
  if (!(threshold >= 0.0) || budget < 0 || min_gap < 2 ||
      sim.rows() != sim.cols()) {
    throw Error(ErrorCode::InvalidArgument, "invalid pair selection arguments");
  }
  std::vector<std::pair<int, int>> pairs;
  const auto n = static_cast<int>(sim.rows());
  for (int i = 0; i < n; ++i) {
    for (int j = i + min_gap; j < n; ++j) {
      if (sim(i, j) >= threshold) pairs.emplace_back(i, j);
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
    return sim(a.first, a.second) > sim(b.first, b.second);
  });
  if (static_cast<int>(pairs.size()) > budget) pairs.resize(budget);
  return pairs;
}

}  // namespace fetomosaic
