#pragma once
// Scalar loss family l(z, y) with subderivatives in the model output z.
// Kink conventions: hinge and eps-insensitive subgradients are 0 exactly at
// their kinks (strict indicators), so a satisfied margin contributes nothing.

#include <cmath>
#include <cstddef>
#include <string>

#include "ntkeq/util.hpp"

namespace ntkeq {

enum class LossKind { hinge, hinge_squared, squared, logistic, eps_insensitive };
enum class SumMode { sum, mean };

struct LossSpec {
    LossKind kind = LossKind::hinge;
    double C = 1.0;    // hinge scale
    double eps = 0.0;  // eps-insensitive half-width
    SumMode mode = SumMode::sum;

    // Per-sample weight of the data term: sum -> 1, mean -> 1/n.
    double scale(std::size_t n) const {
        return mode == SumMode::mean ? 1.0 / static_cast<double>(n) : 1.0;
    }

    void validate() const {
        if (!(C > 0.0)) throw Error("loss: C must be > 0");
        if (!(eps >= 0.0)) throw Error("loss: eps must be >= 0");
    }

    std::string kind_name() const {
        switch (kind) {
            case LossKind::hinge: return "hinge";
            case LossKind::hinge_squared: return "hinge-squared";
            case LossKind::squared: return "squared";
            case LossKind::logistic: return "logistic";
            case LossKind::eps_insensitive: return "eps-insensitive";
        }
        return "?";
    }

    static LossKind kind_from_name(const std::string& s) {
        if (s == "hinge") return LossKind::hinge;
        if (s == "hinge-squared") return LossKind::hinge_squared;
        if (s == "squared") return LossKind::squared;
        if (s == "logistic") return LossKind::logistic;
        if (s == "eps-insensitive") return LossKind::eps_insensitive;
        throw Error("loss: unknown kind '" + s + "'");
    }
};

inline double loss(const LossSpec& spec, double z, double y) {
    switch (spec.kind) {
        case LossKind::hinge:
            return spec.C * std::max(0.0, 1.0 - y * z);
        case LossKind::hinge_squared: {
            const double m = std::max(0.0, 1.0 - y * z);
            return m * m;
        }
        case LossKind::squared: {
            const double r = y - z;
            return r * r;
        }
        case LossKind::logistic: {
            const double yz = y * z;
            // stable log(1 + exp(-yz))
            return yz >= 0.0 ? std::log1p(std::exp(-yz)) : -yz + std::log1p(std::exp(yz));
        }
        case LossKind::eps_insensitive:
            return std::max(0.0, std::fabs(y - z) - spec.eps);
    }
    return 0.0;
}

inline double dloss(const LossSpec& spec, double z, double y) {
    switch (spec.kind) {
        case LossKind::hinge:
            return (y * z < 1.0) ? -spec.C * y : 0.0;
        case LossKind::hinge_squared:
            return -2.0 * y * std::max(0.0, 1.0 - y * z);
        case LossKind::squared:
            return -2.0 * (y - z);
        case LossKind::logistic:
            return -y / (1.0 + std::exp(y * z));
        case LossKind::eps_insensitive: {
            const double r = z - y;
            if (std::fabs(r) <= spec.eps) return 0.0;
            return r > 0.0 ? 1.0 : -1.0;
        }
    }
    return 0.0;
}

// Lipschitz constant of z -> l(z, y) on all of R where one exists; squared
// loss takes the bound over |y - z| <= range.
inline double loss_lipschitz(const LossSpec& spec, double range = 1.0) {
    switch (spec.kind) {
        case LossKind::hinge: return spec.C;
        case LossKind::hinge_squared: return 2.0 * (1.0 + range);
        case LossKind::squared: return 2.0 * range;
        case LossKind::logistic: return 1.0;
        case LossKind::eps_insensitive: return 1.0;
    }
    return 0.0;
}

}  // namespace ntkeq
