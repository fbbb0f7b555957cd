#include "abandonq/distributions.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "abandonq/error.hpp"

namespace abandonq {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }
double std_normal_sf(double z) { return 0.5 * std::erfc(z * kInvSqrt2); }

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(Errc::InvalidParams, what);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

double sample_exponential(double rate, RngStream& rng) { return -std::log(rng.uniform()) / rate; }

// Bracketed inversion of a continuous CDF.
double invert_cdf(const DistSpec& dist, double p) {
    double hi = dist.mean();
    while (cdf(dist, hi) < p) hi *= 2.0;
    auto f = [&](double t) { return cdf(dist, t) - p; };
    boost::math::tools::eps_tolerance<double> tol(50);
    std::uintmax_t iters = 200;
    auto [a, b] = boost::math::tools::toms748_solve(f, 0.0, hi, -p, cdf(dist, hi) - p, tol, iters);
    return 0.5 * (a + b);
}

// int_0^t S(u) du for the lognormal: t S(t) + E[S; S <= t].
double lognormal_integrated_survival(const LognormalParams& p, double mean, double t) {
    if (t <= 0.0) return 0.0;
    const double z = (std::log(t) - p.mu_log) / p.sigma_log;
    return t * std_normal_sf(z) + mean * std_normal_cdf(z - p.sigma_log);
}

// Equilibrium survival mu int_t^inf S(u) du = P(S > t; size-biased) - t S(t) / m,
// evaluated directly so that deep-tail levels do not cancel.
double lognormal_equilibrium_survival(const LognormalParams& p, double mean, double t) {
    if (t <= 0.0) return 1.0;
    const double z = (std::log(t) - p.mu_log) / p.sigma_log;
    return std::max(0.0, std_normal_sf(z - p.sigma_log) - t * std_normal_sf(z) / mean);
}

std::shared_ptr<const InverseCdfTable> tabulate_lognormal_equilibrium(const DistSpec& base) {
    const auto& lp = base.as<LognormalParams>();
    const double mu = base.rate();
    const double m = base.mean();
    auto se = [&](double t) { return lognormal_equilibrium_survival(lp, m, t); };

    constexpr std::size_t kBody = 8192;
    constexpr double kTailTarget = 1e-9;
    constexpr double kTol = 1e-10;

    auto table = std::make_shared<InverseCdfTable>();
    table->body_step = 1.0 / static_cast<double>(kBody);
    table->body_knots = kBody;

    // Knots are held as survival levels; the stored probability is 1 - s.
    std::vector<double> levels;
    levels.reserve(kBody + 256);
    for (std::size_t k = 0; k < kBody; ++k) levels.push_back(1.0 - static_cast<double>(k) / kBody);
    // Geometric tail in the survival down to 1e-9.
    for (int j = 1;; ++j) {
        const double s = table->body_step * std::pow(10.0, -static_cast<double>(j) / 16.0);
        levels.push_back(s);
        if (s < kTailTarget) break;
    }

    double lo = 0.0;
    for (double s : levels) {
        double t = 0.0;
        if (s < 1.0 && se(lo) <= s) {
            // Flat step in the table: the previous knot already reaches s.
            t = lo;
        } else if (s < 1.0) {
            double hi = std::max(2.0 * lo, m);
            while (se(hi) > s) hi *= 2.0;
            auto g = [&](double x) { return se(x) - s; };
            boost::math::tools::eps_tolerance<double> tol(52);
            std::uintmax_t iters = 200;
            auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, tol, iters);
            t = 0.5 * (a + b);
            // One Newton step: d/dt of the equilibrium survival is -mu S(t).
            const double dens = mu * survival(base, t);
            if (dens > 0.0) {
                const double polished = t + g(t) / dens;
                if (polished > a && polished < b) t = polished;
            }
            if (!(std::abs(g(t)) <= kTol)) {
                throw Error(Errc::TabulationFailure,
                            "equilibrium inversion did not converge at survival " + std::to_string(s));
            }
        }
        table->probs.push_back(1.0 - s);
        table->times.push_back(t);
        lo = t;
    }
    return table;
}

double sample_table(const InverseCdfTable& table, double u) {
    std::size_t i;
    const double body_end = table.body_step * static_cast<double>(table.body_knots - 1);
    if (u < body_end) {
        i = static_cast<std::size_t>(u / table.body_step);
        if (i + 1 >= table.probs.size()) i = table.probs.size() - 2;
    } else {
        auto it = std::upper_bound(table.probs.begin(), table.probs.end(), u);
        if (it == table.probs.end()) return table.times.back();
        i = static_cast<std::size_t>(it - table.probs.begin()) - 1;
    }
    const double p0 = table.probs[i], p1 = table.probs[i + 1];
    const double t0 = table.times[i], t1 = table.times[i + 1];
    if (p1 <= p0) return t0;
    return t0 + (t1 - t0) * (u - p0) / (p1 - p0);
}

}  // namespace

std::string_view to_string(Family family) noexcept {
    switch (family) {
        case Family::Deterministic: return "Deterministic";
        case Family::Exponential: return "Exponential";
        case Family::Erlang2: return "Erlang2";
        case Family::Lognormal: return "Lognormal";
        case Family::Hyperexp2: return "Hyperexp2";
    }
    return "?";
}

Family family_from_string(std::string_view name) {
    if (name == "Deterministic" || name == "D") return Family::Deterministic;
    if (name == "Exponential" || name == "M" || name == "Exp") return Family::Exponential;
    if (name == "Erlang2" || name == "E2") return Family::Erlang2;
    if (name == "Lognormal" || name == "LN") return Family::Lognormal;
    if (name == "Hyperexp2" || name == "H2") return Family::Hyperexp2;
    throw Error(Errc::InvalidParams, "unknown distribution family '" + std::string(name) + "'");
}

bool operator==(const DistSpec& a, const DistSpec& b) {
    if (a.params_.index() != b.params_.index()) return false;
    return std::visit(
        Overloaded{
            [&](const DeterministicParams& p) { return p.value == b.as<DeterministicParams>().value; },
            [&](const ExponentialParams& p) { return p.rate == b.as<ExponentialParams>().rate; },
            [&](const Erlang2Params& p) { return p.stage_rate == b.as<Erlang2Params>().stage_rate; },
            [&](const LognormalParams& p) {
                const auto& q = b.as<LognormalParams>();
                return p.mu_log == q.mu_log && p.sigma_log == q.sigma_log;
            },
            [&](const Hyperexp2Params& p) {
                const auto& q = b.as<Hyperexp2Params>();
                return p.p1 == q.p1 && p.rate1 == q.rate1 && p.rate2 == q.rate2;
            },
        },
        a.params_);
}

DistSpec make_dist(const DistParams& params) {
    return std::visit(
        Overloaded{
            [](const DeterministicParams& p) {
                require(finite_positive(p.value), "Deterministic value must be > 0");
                return DistSpec(p, p.value, 0.0);
            },
            [](const ExponentialParams& p) {
                require(finite_positive(p.rate), "Exponential rate must be > 0");
                return DistSpec(p, 1.0 / p.rate, 1.0);
            },
            [](const Erlang2Params& p) {
                require(finite_positive(p.stage_rate), "Erlang2 stage rate must be > 0");
                return DistSpec(p, 2.0 / p.stage_rate, 0.5);
            },
            [](const LognormalParams& p) {
                require(std::isfinite(p.mu_log), "Lognormal mu_log must be finite");
                require(finite_positive(p.sigma_log), "Lognormal sigma_log must be > 0");
                const double s2 = p.sigma_log * p.sigma_log;
                return DistSpec(p, std::exp(p.mu_log + 0.5 * s2), std::expm1(s2));
            },
            [](const Hyperexp2Params& p) {
                require(p.p1 >= 0.0 && p.p1 <= 1.0, "Hyperexp2 p1 must lie in [0,1]");
                require(finite_positive(p.rate1) && finite_positive(p.rate2),
                        "Hyperexp2 rates must be > 0");
                const double p2 = 1.0 - p.p1;
                const double m1 = p.p1 / p.rate1 + p2 / p.rate2;
                const double m2 = 2.0 * (p.p1 / (p.rate1 * p.rate1) + p2 / (p.rate2 * p.rate2));
                return DistSpec(p, m1, m2 / (m1 * m1) - 1.0);
            },
        },
        params);
}

DistSpec make_dist(Family family, double mean, double scv) {
    require(finite_positive(mean), "mean must be > 0");
    require(std::isfinite(scv) && scv >= 0.0, "scv must be >= 0");
    auto fixed = [&](double expected) {
        require(std::abs(scv - expected) <= 1e-12,
                std::string(to_string(family)) + " has scv fixed at " + std::to_string(expected));
    };
    switch (family) {
        case Family::Deterministic:
            fixed(0.0);
            return make_dist(DeterministicParams{mean});
        case Family::Exponential:
            fixed(1.0);
            return make_dist(ExponentialParams{1.0 / mean});
        case Family::Erlang2:
            fixed(0.5);
            return make_dist(Erlang2Params{2.0 / mean});
        case Family::Lognormal: {
            require(scv > 0.0, "Lognormal scv must be > 0");
            const double s2 = std::log1p(scv);
            return make_dist(LognormalParams{std::log(mean) - 0.5 * s2, std::sqrt(s2)});
        }
        case Family::Hyperexp2: {
            require(scv >= 1.0, "balanced Hyperexp2 needs scv >= 1");
            const double p1 = 0.5 * (1.0 + std::sqrt((scv - 1.0) / (scv + 1.0)));
            return make_dist(Hyperexp2Params{p1, 2.0 * p1 / mean, 2.0 * (1.0 - p1) / mean});
        }
    }
    throw Error(Errc::InvalidParams, "unknown family");
}

DistSpec deterministic(double value) { return make_dist(DeterministicParams{value}); }
DistSpec exponential(double mean) { return make_dist(Family::Exponential, mean, 1.0); }
DistSpec erlang2(double mean) { return make_dist(Family::Erlang2, mean, 0.5); }
DistSpec lognormal(double mean, double scv) { return make_dist(Family::Lognormal, mean, scv); }
DistSpec hyperexp2(double p1, double mean1, double mean2) {
    require(finite_positive(mean1) && finite_positive(mean2), "Hyperexp2 means must be > 0");
    return make_dist(Hyperexp2Params{p1, 1.0 / mean1, 1.0 / mean2});
}

double raw_moment(const DistSpec& dist, int k) {
    if (k < 1 || k > 3) throw Error(Errc::InvalidParams, "raw_moment supports k = 1, 2, 3");
    static constexpr double kFactorial[] = {1.0, 1.0, 2.0, 6.0};
    return std::visit(
        Overloaded{
            [&](const DeterministicParams& p) { return std::pow(p.value, k); },
            [&](const ExponentialParams& p) { return kFactorial[k] / std::pow(p.rate, k); },
            [&](const Erlang2Params& p) {
                // (k+1)! / rate^k for two stages
                return kFactorial[k] * (k + 1) / std::pow(p.stage_rate, k);
            },
            [&](const LognormalParams& p) {
                return std::exp(k * p.mu_log + 0.5 * k * k * p.sigma_log * p.sigma_log);
            },
            [&](const Hyperexp2Params& p) {
                return kFactorial[k] *
                       (p.p1 / std::pow(p.rate1, k) + (1.0 - p.p1) / std::pow(p.rate2, k));
            },
        },
        dist.params());
}

double sample(const DistSpec& dist, RngStream& rng) {
    return std::visit(
        Overloaded{
            [](const DeterministicParams& p) { return p.value; },
            [&](const ExponentialParams& p) { return sample_exponential(p.rate, rng); },
            [&](const Erlang2Params& p) {
                const double u1 = rng.uniform();
                const double u2 = rng.uniform();
                return -std::log(u1 * u2) / p.stage_rate;
            },
            [&](const LognormalParams& p) { return std::exp(p.mu_log + p.sigma_log * rng.normal()); },
            [&](const Hyperexp2Params& p) {
                const double rate = rng.uniform() < p.p1 ? p.rate1 : p.rate2;
                return sample_exponential(rate, rng);
            },
        },
        dist.params());
}

double cdf(const DistSpec& dist, double t) {
    if (t <= 0.0) return 0.0;
    return 1.0 - survival(dist, t);
}

double survival(const DistSpec& dist, double t) {
    if (t <= 0.0) return 1.0;
    return std::visit(
        Overloaded{
            [&](const DeterministicParams& p) { return t < p.value ? 1.0 : 0.0; },
            [&](const ExponentialParams& p) { return std::exp(-p.rate * t); },
            [&](const Erlang2Params& p) {
                const double x = p.stage_rate * t;
                return std::exp(-x) * (1.0 + x);
            },
            [&](const LognormalParams& p) {
                return std_normal_sf((std::log(t) - p.mu_log) / p.sigma_log);
            },
            [&](const Hyperexp2Params& p) {
                return p.p1 * std::exp(-p.rate1 * t) + (1.0 - p.p1) * std::exp(-p.rate2 * t);
            },
        },
        dist.params());
}

double pdf(const DistSpec& dist, double t) {
    if (t < 0.0) return 0.0;
    return std::visit(
        Overloaded{
            [&](const DeterministicParams&) -> double {
                throw Error(Errc::UnsupportedFamily, "Deterministic has no density");
            },
            [&](const ExponentialParams& p) { return p.rate * std::exp(-p.rate * t); },
            [&](const Erlang2Params& p) {
                return p.stage_rate * p.stage_rate * t * std::exp(-p.stage_rate * t);
            },
            [&](const LognormalParams& p) {
                if (t == 0.0) return 0.0;
                const double z = (std::log(t) - p.mu_log) / p.sigma_log;
                return kInvSqrt2Pi * std::exp(-0.5 * z * z) / (t * p.sigma_log);
            },
            [&](const Hyperexp2Params& p) {
                return p.p1 * p.rate1 * std::exp(-p.rate1 * t) +
                       (1.0 - p.p1) * p.rate2 * std::exp(-p.rate2 * t);
            },
        },
        dist.params());
}

double quantile(const DistSpec& dist, double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(Errc::DomainError, "quantile needs p in (0,1)");
    switch (dist.family()) {
        case Family::Deterministic: return dist.mean();
        case Family::Exponential: return -std::log1p(-p) * dist.mean();
        case Family::Lognormal: {
            const auto& lp = dist.as<LognormalParams>();
            const double z = -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
            return std::exp(lp.mu_log + lp.sigma_log * z);
        }
        default: return invert_cdf(dist, p);
    }
}

double hazard(const DistSpec& dist, double t) {
    if (dist.family() == Family::Deterministic) {
        throw Error(Errc::UnsupportedFamily, "hazard undefined for Deterministic");
    }
    if (dist.family() == Family::Exponential) return dist.as<ExponentialParams>().rate;
    const double s = survival(dist, t);
    if (s < 1e-300) throw Error(Errc::DomainError, "survival underflow in hazard");
    return pdf(dist, t) / s;
}

EquilibriumSpec make_equilibrium(const DistSpec& base) {
    const double m1 = raw_moment(base, 1);
    const double m2 = raw_moment(base, 2);
    const double m3 = raw_moment(base, 3);
    const double mean_e = m2 / (2.0 * m1);
    const double var_e = m3 / (3.0 * m1) - mean_e * mean_e;
    if (base.family() == Family::Lognormal) {
        return EquilibriumSpec(base, mean_e, var_e, SamplerKind::TabulatedInverseCDF,
                               tabulate_lognormal_equilibrium(base));
    }
    return EquilibriumSpec(base, mean_e, var_e, SamplerKind::ClosedForm, nullptr);
}

double equilibrium_cdf(const EquilibriumSpec& eq, double t) {
    if (t <= 0.0) return 0.0;
    const DistSpec& base = eq.base();
    return std::visit(
        Overloaded{
            [&](const DeterministicParams& p) { return std::min(t / p.value, 1.0); },
            [&](const ExponentialParams& p) { return -std::expm1(-p.rate * t); },
            [&](const Erlang2Params& p) {
                const double x = p.stage_rate * t;
                return 1.0 - std::exp(-x) * (1.0 + 0.5 * x);
            },
            [&](const LognormalParams& p) {
                return base.rate() * lognormal_integrated_survival(p, base.mean(), t);
            },
            [&](const Hyperexp2Params& p) {
                const double q1 = base.rate() * p.p1 / p.rate1;
                return -q1 * std::expm1(-p.rate1 * t) - (1.0 - q1) * std::expm1(-p.rate2 * t);
            },
        },
        base.params());
}

double sample_equilibrium(const EquilibriumSpec& eq, RngStream& rng) {
    const DistSpec& base = eq.base();
    return std::visit(
        Overloaded{
            [&](const DeterministicParams& p) { return p.value * rng.uniform(); },
            [&](const ExponentialParams& p) { return sample_exponential(p.rate, rng); },
            [&](const Erlang2Params& p) {
                // Equal mixture of one and two stages.
                if (rng.uniform() < 0.5) return sample_exponential(p.stage_rate, rng);
                const double u1 = rng.uniform();
                const double u2 = rng.uniform();
                return -std::log(u1 * u2) / p.stage_rate;
            },
            [&](const LognormalParams&) { return sample_table(*eq.table(), rng.uniform()); },
            [&](const Hyperexp2Params& p) {
                const double q1 = base.rate() * p.p1 / p.rate1;
                const double rate = rng.uniform() < q1 ? p.rate1 : p.rate2;
                return sample_exponential(rate, rng);
            },
        },
        base.params());
}

}  // namespace abandonq
