#include "gluscope/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gluscope/errors.hpp"

namespace gluscope {

namespace {

// Continued fraction for I_x(a, b), modified Lentz. Converges fast for
// x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 10000;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw DomainError("incomplete beta: continued fraction did not converge");
}

} // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw ContractError("cosine: length mismatch");
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) throw DomainError("cosine: zero vector");
    const double c = uv / (std::sqrt(uu) * std::sqrt(vv));
    return std::clamp(c, -1.0, 1.0);
}

std::vector<double> neuron_in_out_cosines(const WeightSet& ws, std::size_t layer) {
    if (layer >= ws.layers.size()) {
        throw ContractError("layer " + std::to_string(layer) + " out of range (model has " +
                            std::to_string(ws.layers.size()) + ")");
    }
    const auto& lw = ws.layers[layer];
    std::vector<double> out(lw.w_in.rows());
    for (std::size_t n = 0; n < out.size(); ++n) {
        try {
            out[n] = cosine(lw.w_in.row(n), lw.w_out.column(n));
        } catch (const DomainError& e) {
            throw DomainError("neuron " + std::to_string(layer) + "." + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

double gate_positive_freq(const NeuronRecord& record) {
    if (record.total_observations == 0) {
        throw DomainError("neuron " + std::to_string(record.layer) + "." + std::to_string(record.neuron) +
                          ": no observations");
    }
    const auto pos = record.at(SignCombo::PP).count + record.at(SignCombo::PN).count;
    return static_cast<double>(pos) / static_cast<double>(record.total_observations);
}

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete beta: a and b must be positive");
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta: x outside [0, 1]");
    if (x == 0.0 || x == 1.0) return x;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

CorrelationResult pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw ContractError("pearson: length mismatch");
    const std::size_t n = xs.size();
    if (n < 3) throw ContractError("pearson: need at least 3 samples, got " + std::to_string(n));

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: constant input");

    CorrelationResult res;
    res.n = n;
    res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double df = static_cast<double>(n - 2);
    const double one_minus_r2 = (1.0 - res.r) * (1.0 + res.r);
    if (one_minus_r2 <= 0.0) {
        res.p = 0.0;
    } else {
        // P(|T| > t) = I_{df / (df + t^2)}(df / 2, 1 / 2); with t^2 = df r^2 / (1 - r^2)
        // the argument reduces to 1 - r^2.
        res.p = std::clamp(regularized_incomplete_beta(df / 2.0, 0.5, one_minus_r2), 0.0, 1.0);
    }
    return res;
}

CorrelationResult correlate_layer(std::span<const NeuronRecord> dataset, const WeightSet& ws, std::size_t layer) {
    const auto cosines = neuron_in_out_cosines(ws, layer);
    std::vector<const NeuronRecord*> by_neuron(cosines.size(), nullptr);
    for (const auto& r : dataset) {
        if (r.layer == layer && r.neuron < by_neuron.size()) by_neuron[r.neuron] = &r;
    }
    std::vector<double> freqs(cosines.size());
    for (std::size_t n = 0; n < by_neuron.size(); ++n) {
        if (!by_neuron[n]) {
            throw ContractError("dataset has no record for neuron " + std::to_string(layer) + "." + std::to_string(n));
        }
        freqs[n] = gate_positive_freq(*by_neuron[n]);
    }
    return pearson(cosines, freqs);
}

} // namespace gluscope
