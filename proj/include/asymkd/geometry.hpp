#pragma once

#include <span>
#include <vector>

#include "asymkd/errors.hpp"

namespace asymkd {

using Vec = std::vector<double>;

enum class SimilarityMode { Symmetric, Asymmetric };

double dot(std::span<const double> u, std::span<const double> v);
double norm(std::span<const double> u);

/// Cosine similarity in [-1, 1]. Throws DegenerateInputError on zero-norm input.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Cosine similarity together with its gradient w.r.t. both arguments.
struct CosineGrad {
    double value;
    Vec du;
    Vec dv;
};
CosineGrad cosine_with_grad(std::span<const double> u, std::span<const double> v);

/// Generalized-mean pooling: ((1/n) sum clamp(v_i)^p)^(1/p), elementwise.
/// Entries are clamped to >= kGemClamp before exponentiation so the power is
/// defined for negative inputs. p = 1 is the mean, p -> inf the elementwise max.
inline constexpr double kGemClamp = 1e-6;
Vec gem_pool(const std::vector<Vec>& vectors, double p);

}  // namespace asymkd
