#include "bvae/losses.hpp"

#include <stdexcept>

namespace bvae {

double soft_dice_loss(std::span<const float> pred, std::span<const float> target) {
    if (pred.size() != target.size())
        throw std::invalid_argument("soft_dice_loss: shape mismatch");
    double inter = 0.0, psum = 0.0, tsum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        inter += static_cast<double>(pred[i]) * target[i];
        psum += pred[i];
        tsum += target[i];
    }
    return 1.0 - (2.0 * inter + kDiceSmooth) / (psum + tsum + kDiceSmooth);
}

double soft_dice_loss(const VoxelGrid& pred, const VoxelGrid& target) {
    if (!pred.same_shape(target))
        throw std::invalid_argument("soft_dice_loss: shape mismatch");
    return soft_dice_loss(std::span<const float>(pred.values),
                          std::span<const float>(target.values));
}

void soft_dice_loss_grad(std::span<const float> pred,
                         std::span<const float> target,
                         std::span<double> grad) {
    if (pred.size() != target.size() || grad.size() != pred.size())
        throw std::invalid_argument("soft_dice_loss_grad: shape mismatch");
    double inter = 0.0, psum = 0.0, tsum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        inter += static_cast<double>(pred[i]) * target[i];
        psum += pred[i];
        tsum += target[i];
    }
    const double denom = psum + tsum + kDiceSmooth;
    const double numer = 2.0 * inter + kDiceSmooth;
    // d/dp_v [1 - numer/denom] = -(2 t_v * denom - numer) / denom^2
    const double inv_d2 = 1.0 / (denom * denom);
    for (std::size_t i = 0; i < pred.size(); ++i)
        grad[i] = -(2.0 * target[i] * denom - numer) * inv_d2;
}

ElboTerms beta_elbo(const VoxelGrid& pred, const VoxelGrid& target,
                    const DiagonalGaussian& posterior, double beta) {
    if (beta < 0.0) throw std::invalid_argument("beta_elbo: beta must be >= 0");
    ElboTerms terms;
    terms.reconstruction_loss = soft_dice_loss(pred, target);
    terms.kld = kld_reverse_closed_form(posterior);
    terms.beta = beta;
    terms.total = terms.reconstruction_loss + beta * terms.kld;
    return terms;
}

} // namespace bvae
