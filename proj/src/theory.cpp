#include "shb/theory.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "shb/error.hpp"

namespace shb {

namespace {

void require_spectrum(double lambda_min, double lambda_max) {
    if (!(lambda_min > 0.0 && lambda_min <= lambda_max && lambda_max <= 1.0)) {
        throw Error(Errc::OutOfRange, "need 0 < lambda_min <= lambda_max <= 1, got (" +
                                          std::to_string(lambda_min) + ", " +
                                          std::to_string(lambda_max) + ")");
    }
}

void require_l2_inputs(double omega, double beta, double lambda_min, double lambda_max) {
    if (!(omega > 0.0 && omega < 2.0)) {
        throw Error(Errc::OutOfRange, "need 0 < omega < 2, got " + std::to_string(omega));
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw Error(Errc::OutOfRange, "need beta >= 0, got " + std::to_string(beta));
    }
    require_spectrum(lambda_min, lambda_max);
}

}  // namespace

L2Rate l2_rate(double omega, double beta, double lambda_min, double lambda_max) {
    require_l2_inputs(omega, beta, lambda_min, lambda_max);
    L2Rate r;
    r.a1 = 1.0 + 3.0 * beta + 2.0 * beta * beta -
           (omega * (2.0 - omega) + omega * beta) * lambda_min;
    r.a2 = beta + 2.0 * beta * beta + omega * beta * lambda_max;
    r.q = (r.a1 + std::sqrt(r.a1 * r.a1 + 4.0 * r.a2)) / 2.0;
    r.delta = r.q - r.a1;
    r.admissible = r.a1 + r.a2 < 1.0;
    return r;
}

double beta_upper_bound(double omega, double lambda_min, double lambda_max) {
    require_l2_inputs(omega, 0.0, lambda_min, lambda_max);
    const double wl = omega * lambda_min;
    const double wu = omega * lambda_max;
    const double lead = 4.0 - wl + wu;
    return (-4.0 + wl - wu + std::sqrt(lead * lead + 16.0 * omega * (2.0 - omega) * lambda_min)) /
           8.0;
}

L2Envelope l2_envelope(const L2Rate& rate, std::size_t k, double init_sq_dist,
                       double lambda_max) {
    if (!rate.admissible) throw Error(Errc::NotAdmissible, "a1 + a2 >= 1");
    L2Envelope e;
    e.l2_bound = std::pow(rate.q, static_cast<double>(k)) * (1.0 + rate.delta) * init_sq_dist;
    e.f_bound = lambda_max / 2.0 * e.l2_bound;
    return e;
}

bool cesaro_admissible(double omega, double beta) noexcept {
    return beta >= 0.0 && beta < 1.0 && omega > 0.0 && omega + 2.0 * beta < 2.0;
}

double cesaro_bound(double omega, double beta, std::size_t k, double init_sq_dist, double f0) {
    if (!cesaro_admissible(omega, beta)) {
        throw Error(Errc::OutOfRange, "need 0 <= beta < 1, omega > 0 and omega + 2 beta < 2");
    }
    if (k < 1) throw Error(Errc::OutOfRange, "Cesàro bound needs k >= 1");
    const double numerator = (1.0 - beta) * (1.0 - beta) * init_sq_dist + 2.0 * omega * beta * f0;
    const double denominator =
        2.0 * omega * (2.0 - 2.0 * beta - omega) * static_cast<double>(k);
    return numerator / denominator;
}

double q_lower_bound(double omega, double beta, double lambda_min, double lambda_max) {
    require_l2_inputs(omega, beta, lambda_min, lambda_max);
    return 1.0 + 4.0 * beta + 4.0 * beta * beta + omega * beta * (lambda_max - lambda_min) -
           omega * (2.0 - omega) * lambda_min;
}

std::string_view to_string(L1Choice choice) noexcept {
    switch (choice) {
    case L1Choice::Custom: return "custom";
    case L1Choice::UnitStepsize: return "unit_stepsize";
    case L1Choice::InverseLambdaMax: return "inv_lmax";
    }
    return "custom";
}

L1Choice parse_l1_choice(std::string_view text) {
    if (text == "unit_stepsize" || text == "unit" || text == "i") return L1Choice::UnitStepsize;
    if (text == "inv_lmax" || text == "ii") return L1Choice::InverseLambdaMax;
    if (text == "custom") return L1Choice::Custom;
    throw Error(Errc::InvalidArgument, "unknown L1 choice '" + std::string(text) + "'");
}

bool l1_admissible(double omega, double beta, double lambda_min, double lambda_max) {
    if (!(lambda_min > 0.0 && lambda_min <= lambda_max && lambda_max <= 1.0)) return false;
    if (!(omega > 0.0 && omega <= 1.0 / lambda_max)) return false;
    const double root = 1.0 - std::sqrt(omega * lambda_min);
    return root * root < beta && beta < 1.0;
}

L1Params validate_l1(double omega, double beta, double lambda_min, double lambda_max) {
    require_spectrum(lambda_min, lambda_max);
    if (!l1_admissible(omega, beta, lambda_min, lambda_max)) {
        throw Error(Errc::OutOfRange,
                    "accelerated rate needs 0 < omega <= 1/lambda_max and "
                    "(1 - sqrt(omega lambda_min))^2 < beta < 1");
    }
    return {L1Choice::Custom, omega, beta, beta};
}

L1Params l1_params(L1Choice choice, double lambda_min, double lambda_max) {
    require_spectrum(lambda_min, lambda_max);
    L1Params p;
    p.choice = choice;
    switch (choice) {
    case L1Choice::UnitStepsize: {
        const double root = 1.0 - std::sqrt(0.99 * lambda_min);
        p.omega = 1.0;
        p.beta = root * root;
        break;
    }
    case L1Choice::InverseLambdaMax: {
        const double root = 1.0 - std::sqrt(0.99 * lambda_min / lambda_max);
        p.omega = 1.0 / lambda_max;
        p.beta = root * root;
        break;
    }
    case L1Choice::Custom:
        throw Error(Errc::InvalidArgument, "use validate_l1 for custom parameters");
    }
    p.rate_factor = p.beta;
    if (!l1_admissible(p.omega, p.beta, lambda_min, lambda_max)) {
        throw Error(Errc::OutOfRange, "parameter choice violates the accelerated-rate hypotheses");
    }
    return p;
}

std::size_t iterations_to_reach(double factor, double scale, double target) {
    if (scale <= target) return 0;
    if (!(factor < 1.0)) return std::numeric_limits<std::size_t>::max();
    if (factor <= 0.0) return 1;
    const double k = std::ceil(std::log(target / scale) / std::log(factor));
    return static_cast<std::size_t>(std::max(k, 1.0));
}

}  // namespace shb
