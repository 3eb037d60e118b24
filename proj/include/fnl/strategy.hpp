#pragma once

#include <cstddef>

#include "fnl/coeffs.hpp"
#include "fnl/errors.hpp"
#include "fnl/weights.hpp"

namespace fnl {

// A portfolio rule bound to a game. Equilibrium kinds read the current
// weights; ConstantOverride ignores them; PerturbedEquilibrium shifts the
// equilibrium strategy by a fixed offset for one agent (unilateral
// deviation) or for everyone.
struct StrategyClosure {
    enum class Kind {
        CaraEquilibrium,
        CrraEquilibrium,
        ConstantOverride,
        PerturbedEquilibrium,
    };
    enum class Scope { Single, All };

    Kind kind = Kind::CaraEquilibrium;
    Game base_game = Game::Cara;     // game of the (perturbed) equilibrium rule
    double constant_value = 0.0;     // ConstantOverride
    double offset = 0.0;             // PerturbedEquilibrium
    Scope scope = Scope::Single;     // PerturbedEquilibrium
    std::size_t perturbed_agent = 0; // PerturbedEquilibrium, Scope::Single

    static StrategyClosure equilibrium(Game g) {
        StrategyClosure s;
        s.kind = g == Game::Cara ? Kind::CaraEquilibrium : Kind::CrraEquilibrium;
        s.base_game = g;
        return s;
    }
    static StrategyClosure constant(double value) {
        StrategyClosure s;
        s.kind = Kind::ConstantOverride;
        s.constant_value = value;
        return s;
    }
    static StrategyClosure perturbed(Game g, double offset, Scope scope,
                                     std::size_t agent = 0) {
        StrategyClosure s;
        s.kind = Kind::PerturbedEquilibrium;
        s.base_game = g;
        s.offset = offset;
        s.scope = scope;
        s.perturbed_agent = agent;
        return s;
    }

    bool needs_weights() const { return kind != Kind::ConstantOverride; }

    // pi for one agent given its sampled coefficients and current weights.
    double evaluate(const CoefficientValues& v, const EquilibriumWeights& w,
                    std::size_t agent) const {
        switch (kind) {
            case Kind::CaraEquilibrium:
                return cara_strategy(v, w);
            case Kind::CrraEquilibrium:
                return crra_strategy(v, w);
            case Kind::ConstantOverride:
                return constant_value;
            case Kind::PerturbedEquilibrium: {
                const double base = equilibrium_strategy(base_game, v, w);
                if (scope == Scope::All || agent == perturbed_agent)
                    return base + offset;
                return base;
            }
        }
        throw DomainError("unknown strategy kind");
    }
};

} // namespace fnl
