#include "gluscope/activation_math.hpp"

#include <cmath>
#include <numbers>

#include "gluscope/errors.hpp"

namespace gluscope {

namespace {

void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) {
        throw DomainError(std::string(what) + ": non-finite input");
    }
}

} // namespace

std::string_view to_string(ActivationKind kind) {
    return kind == ActivationKind::SwiGLU ? "swiglu" : "geglu";
}

std::string_view to_string(SignCombo combo) {
    switch (combo) {
    case SignCombo::PP: return "gate+_in+";
    case SignCombo::PN: return "gate+_in-";
    case SignCombo::NP: return "gate-_in+";
    case SignCombo::NN: return "gate-_in-";
    }
    return "";
}

std::string_view to_string(IntermediateKind kind) {
    switch (kind) {
    case IntermediateKind::HookPre: return "hook_pre";
    case IntermediateKind::Swish: return "swish";
    case IntermediateKind::HookPreLinear: return "hook_pre_linear";
    case IntermediateKind::HookPost: return "hook_post";
    }
    return "";
}

std::optional<ActivationKind> parse_activation_kind(std::string_view s) {
    if (s == "swiglu") return ActivationKind::SwiGLU;
    if (s == "geglu") return ActivationKind::GeGLU;
    return std::nullopt;
}

std::optional<SignCombo> parse_sign_combo(std::string_view s) {
    for (auto c : kAllCombos) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

std::optional<IntermediateKind> parse_intermediate_kind(std::string_view s) {
    for (auto k : kAllIntermediates) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

double swish(double x) {
    require_finite(x, "swish");
    return x / (1.0 + std::exp(-x));
}

double gelu(double x) {
    require_finite(x, "gelu");
    // erfc keeps full relative accuracy in the left tail where 1 + erf cancels.
    return 0.5 * x * std::erfc(-x / std::numbers::sqrt2);
}

double gate_fn(ActivationKind kind, double x) {
    return kind == ActivationKind::SwiGLU ? swish(x) : gelu(x);
}

NeuronActivation glu_activation(ActivationKind kind, double x_gate, double x_in) {
    require_finite(x_gate, "glu_activation");
    require_finite(x_in, "glu_activation");
    NeuronActivation a;
    a.x_gate = x_gate;
    a.x_in = x_in;
    a.gated = gate_fn(kind, x_gate);
    a.post = a.gated * x_in;
    return a;
}

SignCombo classify_signs(double x_gate, double x_in) {
    require_finite(x_gate, "classify_signs");
    require_finite(x_in, "classify_signs");
    const bool g = x_gate >= 0.0;
    const bool i = x_in >= 0.0;
    if (g) return i ? SignCombo::PP : SignCombo::PN;
    return i ? SignCombo::NP : SignCombo::NN;
}

} // namespace gluscope
