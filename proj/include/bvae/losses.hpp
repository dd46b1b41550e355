#pragma once

#include <span>
#include <vector>

#include "bvae/gaussian.hpp"
#include "bvae/voxel.hpp"

namespace bvae {

// Dice smoothing term, in voxel-count units. Keeps the loss defined on empty
// masks; recorded in run configs.
inline constexpr double kDiceSmooth = 1.0;

struct ElboTerms {
    double reconstruction_loss = 0.0; // soft Dice loss, in [0,1]
    double kld = 0.0;                 // nats, summed over latent dims
    double beta = 0.0;
    double total = 0.0;               // reconstruction_loss + beta * kld
};

// 1 - (2 sum(pred*target) + eps) / (sum(pred) + sum(target) + eps).
// pred in [0,1], target binary, equal shapes.
double soft_dice_loss(const VoxelGrid& pred, const VoxelGrid& target);
double soft_dice_loss(std::span<const float> pred, std::span<const float> target);

// d(soft dice loss)/d(pred), written into grad (same length as pred).
// Accumulation happens in double regardless of the float storage.
void soft_dice_loss_grad(std::span<const float> pred,
                         std::span<const float> target,
                         std::span<double> grad);

ElboTerms beta_elbo(const VoxelGrid& pred, const VoxelGrid& target,
                    const DiagonalGaussian& posterior, double beta);

} // namespace bvae
