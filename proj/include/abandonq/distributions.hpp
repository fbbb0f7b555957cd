#pragma once

#include <memory>
#include <string_view>
#include <variant>
#include <vector>

#include "abandonq/rng.hpp"

namespace abandonq {

enum class Family { Deterministic, Exponential, Erlang2, Lognormal, Hyperexp2 };

std::string_view to_string(Family family) noexcept;
Family family_from_string(std::string_view name);

// Family-native parameterizations.
struct DeterministicParams {
    double value;
};
struct ExponentialParams {
    double rate;
};
/// Two exponential stages, each with rate `stage_rate`; mean 2/stage_rate.
struct Erlang2Params {
    double stage_rate;
};
/// log S ~ Normal(mu_log, sigma_log^2).
struct LognormalParams {
    double mu_log;
    double sigma_log;
};
/// Branch 1 with probability p1 and rate rate1, otherwise branch 2.
struct Hyperexp2Params {
    double p1;
    double rate1;
    double rate2;
};

using DistParams = std::variant<DeterministicParams, ExponentialParams, Erlang2Params,
                                LognormalParams, Hyperexp2Params>;

/// A validated distribution with its first two moments cached.
/// Only constructible through make_dist().
class DistSpec {
public:
    Family family() const noexcept { return static_cast<Family>(params_.index()); }
    const DistParams& params() const noexcept { return params_; }
    double mean() const noexcept { return mean_; }
    double scv() const noexcept { return scv_; }
    double rate() const noexcept { return 1.0 / mean_; }

    template <class P>
    const P& as() const {
        return std::get<P>(params_);
    }

    friend bool operator==(const DistSpec& a, const DistSpec& b);

private:
    friend DistSpec make_dist(const DistParams& params);
    DistSpec(DistParams params, double mean, double scv)
        : params_(params), mean_(mean), scv_(scv) {}

    DistParams params_;
    double mean_;
    double scv_;
};

/// Family-native constructor. Throws Error{InvalidParams}.
DistSpec make_dist(const DistParams& params);

/// Moment-form constructor. Lognormal is moment-matched on the log scale;
/// Hyperexp2 uses balanced means (p1/rate1 = p2/rate2) and needs scv >= 1.
/// Deterministic, Exponential and Erlang2 have a fixed scv (0, 1, 0.5) and
/// reject any other value.
DistSpec make_dist(Family family, double mean, double scv);

DistSpec deterministic(double value);
DistSpec exponential(double mean);
DistSpec erlang2(double mean);
DistSpec lognormal(double mean, double scv);
DistSpec hyperexp2(double p1, double mean1, double mean2);

/// E[S^k] for k in {1, 2, 3}.
double raw_moment(const DistSpec& dist, int k);

double sample(const DistSpec& dist, RngStream& rng);
double cdf(const DistSpec& dist, double t);
double survival(const DistSpec& dist, double t);
double pdf(const DistSpec& dist, double t);
double quantile(const DistSpec& dist, double p);

/// f(t) / (1 - F(t)). Deterministic has no density: UnsupportedFamily.
/// DomainError when the survival drops below 1e-300.
double hazard(const DistSpec& dist, double t);

enum class SamplerKind { ClosedForm, TabulatedInverseCDF };

/// Knots of a tabulated inverse CDF, linearly interpolated.
struct InverseCdfTable {
    std::vector<double> probs;
    std::vector<double> times;
    double body_step = 0.0;      // spacing of the uniform body in probability
    std::size_t body_knots = 0;  // knots [0, body_knots) are uniformly spaced
};

/// Equilibrium (stationary residual-life) law F_e(t) = mu * int_0^t (1 - F(u)) du.
class EquilibriumSpec {
public:
    const DistSpec& base() const noexcept { return base_; }
    double mean_e() const noexcept { return mean_e_; }
    double var_e() const noexcept { return var_e_; }
    SamplerKind sampler_kind() const noexcept { return kind_; }
    const InverseCdfTable* table() const noexcept { return table_.get(); }

private:
    friend EquilibriumSpec make_equilibrium(const DistSpec& base);
    EquilibriumSpec(DistSpec base, double mean_e, double var_e, SamplerKind kind,
                    std::shared_ptr<const InverseCdfTable> table)
        : base_(base), mean_e_(mean_e), var_e_(var_e), kind_(kind), table_(std::move(table)) {}

    DistSpec base_;
    double mean_e_;
    double var_e_;
    SamplerKind kind_;
    std::shared_ptr<const InverseCdfTable> table_;
};

/// Throws Error{TabulationFailure} if the Lognormal table cannot be built.
EquilibriumSpec make_equilibrium(const DistSpec& base);

double equilibrium_cdf(const EquilibriumSpec& eq, double t);
double sample_equilibrium(const EquilibriumSpec& eq, RngStream& rng);

}  // namespace abandonq
