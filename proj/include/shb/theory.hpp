#pragma once

#include <cstddef>
#include <string_view>

namespace shb {

/// Constants of the L2 linear rate for given (ω, β, λmin⁺, λmax).
struct L2Rate {
    double a1 = 0.0;
    double a2 = 0.0;
    double q = 0.0;
    double delta = 0.0;
    bool admissible = false;  // a1 + a2 < 1
};

/// Requires 0 < ω < 2, β ≥ 0, 0 < λmin⁺ ≤ λmax ≤ 1; throws OutOfRange otherwise.
L2Rate l2_rate(double omega, double beta, double lambda_min, double lambda_max);

/// Largest β keeping a1 + a2 < 1 for the given stepsize.
double beta_upper_bound(double omega, double lambda_min, double lambda_max);

struct L2Envelope {
    double l2_bound = 0.0;  // q^k (1+δ) ‖x0 − x*‖²
    double f_bound = 0.0;   // (λmax/2) · l2_bound
};

/// Throws NotAdmissible unless rate.admissible.
L2Envelope l2_envelope(const L2Rate& rate, std::size_t k, double init_sq_dist,
                       double lambda_max);

/// Bound on E[f(x̂_k)]:
///   ((1−β)²‖x0 − x*‖² + 2ωβ f(x0)) / (2ω(2 − 2β − ω) k).
/// Requires 0 ≤ β < 1, ω > 0, ω + 2β < 2, k ≥ 1.
double cesaro_bound(double omega, double beta, std::size_t k, double init_sq_dist,
                    double f0);

/// a1 + a2 written as 1 + 4β + 4β² + ωβ(λmax − λmin⁺) − ω(2−ω)λmin⁺.
double q_lower_bound(double omega, double beta, double lambda_min, double lambda_max);

enum class L1Choice { Custom, UnitStepsize, InverseLambdaMax };

std::string_view to_string(L1Choice choice) noexcept;
L1Choice parse_l1_choice(std::string_view text);

struct L1Params {
    L1Choice choice = L1Choice::Custom;
    double omega = 0.0;
    double beta = 0.0;
    double rate_factor = 0.0;  // equals beta
};

/// Accelerated-rate parameters with the 0.99 safety factor:
///   unit stepsize:      ω = 1,      β = (1 − √(0.99 λmin⁺))²
///   inverse λmax:       ω = 1/λmax, β = (1 − √(0.99 λmin⁺/λmax))²
L1Params l1_params(L1Choice choice, double lambda_min, double lambda_max);

/// Checks 0 < ω ≤ 1/λmax and (1 − √(ωλmin⁺))² < β < 1; throws OutOfRange.
L1Params validate_l1(double omega, double beta, double lambda_min, double lambda_max);

/// True when validate_l1 would accept (ω, β).
bool l1_admissible(double omega, double beta, double lambda_min, double lambda_max);

/// True when the Cesàro bound's hypotheses hold: 0 ≤ β < 1, ω > 0, ω + 2β < 2.
bool cesaro_admissible(double omega, double beta) noexcept;

/// Smallest k with factor^k · scale ≤ target; SIZE_MAX when factor ≥ 1.
std::size_t iterations_to_reach(double factor, double scale, double target);

}  // namespace shb
