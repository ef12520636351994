#include "asymkd/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace asymkd {

double dot(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw ConfigError("dot: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

double norm(std::span<const double> u) {
    return std::sqrt(dot(u, u));
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0 || nv == 0.0)
        throw DegenerateInputError("cosine_similarity: zero-norm input");
    return dot(u, v) / (nu * nv);
}

CosineGrad cosine_with_grad(std::span<const double> u, std::span<const double> v) {
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0 || nv == 0.0)
        throw DegenerateInputError("cosine_with_grad: zero-norm input");
    const double c = dot(u, v) / (nu * nv);
    CosineGrad g;
    g.value = c;
    g.du.resize(u.size());
    g.dv.resize(v.size());
    // d cos / du = v/(|u||v|) - cos * u/|u|^2
    for (size_t i = 0; i < u.size(); ++i) {
        g.du[i] = v[i] / (nu * nv) - c * u[i] / (nu * nu);
        g.dv[i] = u[i] / (nu * nv) - c * v[i] / (nv * nv);
    }
    return g;
}

Vec gem_pool(const std::vector<Vec>& vectors, double p) {
    if (vectors.empty()) throw ConfigError("gem_pool: empty input list");
    if (p < 1.0) throw ConfigError("gem_pool: p must be >= 1");
    const size_t d = vectors.front().size();
    for (const auto& v : vectors)
        if (v.size() != d) throw ConfigError("gem_pool: dimension mismatch");

    Vec out(d, 0.0);
    for (const auto& v : vectors)
        for (size_t i = 0; i < d; ++i)
            out[i] += std::pow(std::max(v[i], kGemClamp), p);
    const double n = static_cast<double>(vectors.size());
    for (size_t i = 0; i < d; ++i) out[i] = std::pow(out[i] / n, 1.0 / p);
    return out;
}

}  // namespace asymkd
