#pragma once

// Dense alignment objectives evaluated between a fixed and a moving pyramid
// level under a warp mapping fixed-image points into the moving image.
//
// All objectives are posed as minimizations and normalized by the number of
// contributing pixels:
//   SinSqOrientation  mean sin^2(dtheta)            residual sin(dtheta)
//   CosCorrelation    -mean cos(dtheta)             residual g_m/|g_m| - g_f
//   NCC               -normalized cross-correlation residual f_hat - m_hat
// Residuals are chosen so that Gauss-Newton on the sum of squares minimizes
// the reported cost.

#include <Eigen/Dense>

#include <string_view>
#include <vector>

#include "fetomosaic/geometry.hpp"
#include "fetomosaic/imageproc.hpp"

namespace fetomosaic {

enum class Objective { SinSqOrientation, CosCorrelation, NCC };

std::string_view to_string(Objective objective);
Objective objective_from_string(std::string_view name);

struct CostOptions {
  double grad_eps = kDefaultGradEps;
  // The interpolated unit gradient shrinks where the four surrounding
  // orientations disagree (ridges, saddles); such samples are dropped.
  // 0 keeps every sample above grad_eps.
  double min_coherence = 0.8;
  // Minimum overlap as a fraction of the fixed level's valid pixels.
  double min_overlap_fraction = 0.25;
};

struct CostValue {
  double cost = 0.0;
  Eigen::Index n_valid = 0;
};

struct Linearization {
  double cost = 0.0;
  Eigen::Index n_valid = 0;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;  // rows match residuals, one column per warp dof
  // Linear index (y * width + x) of the fixed pixel behind each sample.
  std::vector<Eigen::Index> pixels;
};

CostValue orientation_cost(const GradientField& fixed, const GradientField& moving,
                           const WarpParams& w, const CostOptions& opts = {});

CostValue correlation_cost(const GradientField& fixed, const GradientField& moving,
                           const WarpParams& w, const CostOptions& opts = {});

CostValue ncc_cost(const Image& fixed_gray, const Mask& fixed_mask, const Image& moving_gray,
                   const Mask& moving_mask, const WarpParams& w, const CostOptions& opts = {});

CostValue objective_cost(const PyramidLevel& fixed, const PyramidLevel& moving,
                         const WarpParams& w, Objective objective,
                         const CostOptions& opts = {});

// Residual vector and analytic Jacobian with respect to the warp's free
// coefficients (6 for affine, 8 for homography). The moving gradient of the
// warped image is obtained by the chain rule from the unwarped moving
// gradient field: g_m(x) = A(x)^T G(w(x)), A = dw/dx.
Linearization linearize(const PyramidLevel& fixed, const PyramidLevel& moving,
                        const WarpParams& w, Objective objective, const CostOptions& opts = {},
                        bool with_jacobian = true);

}  // namespace fetomosaic
