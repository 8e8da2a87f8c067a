#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace gluscope {

enum class ActivationKind : std::uint8_t { SwiGLU = 0, GeGLU = 1 };

// Sign class of a (x_gate, x_in) pair. The order matches the column order of
// the summary table: gate+_in+, gate+_in-, gate-_in+, gate-_in-.
enum class SignCombo : std::uint8_t { PP = 0, PN = 1, NP = 2, NN = 3 };

enum class IntermediateKind : std::uint8_t { HookPre = 0, Swish = 1, HookPreLinear = 2, HookPost = 3 };

inline constexpr std::array<SignCombo, 4> kAllCombos{SignCombo::PP, SignCombo::PN, SignCombo::NP, SignCombo::NN};
inline constexpr std::array<IntermediateKind, 4> kAllIntermediates{
    IntermediateKind::HookPre, IntermediateKind::Swish, IntermediateKind::HookPreLinear, IntermediateKind::HookPost};
// Display/serialization order used by the dataset and neuron pages.
inline constexpr std::array<IntermediateKind, 4> kDisplayIntermediates{
    IntermediateKind::HookPost, IntermediateKind::HookPreLinear, IntermediateKind::HookPre, IntermediateKind::Swish};

std::string_view to_string(ActivationKind kind);
std::string_view to_string(SignCombo combo);
std::string_view to_string(IntermediateKind kind);

std::optional<ActivationKind> parse_activation_kind(std::string_view s);
std::optional<SignCombo> parse_sign_combo(std::string_view s);
std::optional<IntermediateKind> parse_intermediate_kind(std::string_view s);

constexpr std::size_t index_of(SignCombo c) { return static_cast<std::size_t>(c); }
constexpr std::size_t index_of(IntermediateKind k) { return static_cast<std::size_t>(k); }

constexpr bool gate_positive(SignCombo c) { return c == SignCombo::PP || c == SignCombo::PN; }
constexpr bool in_positive(SignCombo c) { return c == SignCombo::PP || c == SignCombo::NP; }

// Within a combo every intermediate has a fixed sign; true means values are
// >= 0 there, so "most extreme" means largest, otherwise smallest.
constexpr bool extreme_is_max(SignCombo c, IntermediateKind k) {
    switch (k) {
    case IntermediateKind::HookPre:
    case IntermediateKind::Swish:
        return gate_positive(c);
    case IntermediateKind::HookPreLinear:
        return in_positive(c);
    case IntermediateKind::HookPost:
        return gate_positive(c) == in_positive(c);
    }
    return true;
}

/// One observation of a neuron: both pre-activations and the derived
/// intermediates, all in 64-bit.
struct NeuronActivation {
    double x_gate = 0.0;
    double x_in = 0.0;
    double gated = 0.0;
    double post = 0.0;

    double get(IntermediateKind k) const {
        switch (k) {
        case IntermediateKind::HookPre: return x_gate;
        case IntermediateKind::Swish: return gated;
        case IntermediateKind::HookPreLinear: return x_in;
        case IntermediateKind::HookPost: return post;
        }
        return 0.0;
    }
};

/// x * sigmoid(x). Throws DomainError on non-finite input.
double swish(double x);

/// x * Phi(x) using the exact erf form. Throws DomainError on non-finite input.
double gelu(double x);

/// Gate function selected by `kind`.
double gate_fn(ActivationKind kind, double x);

NeuronActivation glu_activation(ActivationKind kind, double x_gate, double x_in);

// Zero counts as positive, so the four classes partition every finite pair.
SignCombo classify_signs(double x_gate, double x_in);

} // namespace gluscope
