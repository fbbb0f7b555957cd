#include "abandonq/ctmc.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

#include "abandonq/error.hpp"
#include "abandonq/stats.hpp"

namespace abandonq {

double CTMCModel::scv() const {
    if (single_phase) return 1.0;
    const double m1 = p1 / rate1 + (1.0 - p1) / rate2;
    const double m2 = 2.0 * (p1 / (rate1 * rate1) + (1.0 - p1) / (rate2 * rate2));
    return m2 / (m1 * m1) - 1.0;
}

int CTMCModel::phases_at(long level) const {
    if (single_phase) return 1;
    return static_cast<int>(std::min<long>(level, n)) + 1;
}

long CTMCModel::state_count() const {
    if (single_phase) return truncation + 1;
    const long low = std::min<long>(truncation, n);
    long count = (low + 1) * (low + 2) / 2;
    if (truncation > n) count += (truncation - n) * (n + 1);
    return count;
}

long CTMCModel::index(long level, int k) const {
    if (single_phase) return level;
    if (level <= n) return level * (level + 1) / 2 + k;
    return static_cast<long>(n + 1) * (n + 2) / 2 + (level - n - 1) * (n + 1) + k;
}

long default_truncation(int n, double lambda, double mu, double gamma, double cS2) {
    const double rho = lambda / (n * mu);
    const double q = std::max(0.0, n * mu * (rho - 1.0) * gamma);
    const double var = n * gamma * mu * (rho + cS2 + std::abs(rho - 1.0)) / 2.0;
    return n + static_cast<long>(std::ceil(q + 12.0 * std::sqrt(var)));
}

CTMCModel make_erlang_a_model(int n, double lambda, double mu, double gamma, long truncation) {
    if (n < 1 || !(lambda > 0.0) || !(mu > 0.0) || !(gamma > 0.0)) {
        throw Error(Errc::InvalidParams, "Erlang-A model needs positive n, lambda, mu, gamma");
    }
    CTMCModel m;
    m.n = n;
    m.lambda = lambda;
    m.gamma = gamma;
    m.p1 = 1.0;
    m.rate1 = mu;
    m.rate2 = mu;
    m.single_phase = true;
    m.truncation = truncation > 0 ? truncation : default_truncation(n, lambda, mu, gamma, 1.0);
    return m;
}

CTMCModel make_h2_model(int n, double lambda, double gamma, const DistSpec& service, long truncation) {
    if (service.family() != Family::Hyperexp2) {
        throw Error(Errc::UnsupportedFamily, "CTMC service must be Hyperexp2");
    }
    if (n < 1 || !(lambda > 0.0) || !(gamma > 0.0)) {
        throw Error(Errc::InvalidParams, "H2 model needs positive n, lambda, gamma");
    }
    const auto& hp = service.as<Hyperexp2Params>();
    CTMCModel m;
    m.n = n;
    m.lambda = lambda;
    m.gamma = gamma;
    m.p1 = hp.p1;
    m.rate1 = hp.rate1;
    m.rate2 = hp.rate2;
    m.single_phase = false;
    m.truncation =
        truncation > 0 ? truncation : default_truncation(n, lambda, service.rate(), gamma, service.scv());
    return m;
}

namespace {

double gaussian_tail_estimate(const CTMCModel& model) {
    const double mu = model.mu();
    const double rho = model.lambda / (model.n * mu);
    const double q = std::max(0.0, model.n * mu * (rho - 1.0) * model.gamma);
    const double var = model.n * model.gamma * mu * (rho + model.scv() + std::abs(rho - 1.0)) / 2.0;
    return stats::normal_sf((model.truncation + 0.5 - model.n - q) / std::sqrt(var));
}

}  // namespace

Generator build_generator(const CTMCModel& model, bool check_truncation) {
    if (model.truncation < model.n) {
        throw Error(Errc::TruncationTooSmall, "truncation level must be >= n");
    }
    Generator gen;
    gen.tail_mass_estimate = gaussian_tail_estimate(model);
    if (check_truncation && gen.tail_mass_estimate > 1e-8) {
        throw Error(Errc::TruncationTooSmall, "estimated mass beyond the truncation level exceeds 1e-8");
    }
    const long size = model.state_count();
    const long L = model.truncation;
    const int n = model.n;
    const double p1 = model.p1;
    const double p2 = 1.0 - p1;
    gen.level.resize(static_cast<std::size_t>(size));
    gen.k1.resize(static_cast<std::size_t>(size));

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(size) * 5);
    std::vector<std::pair<long, double>> row;

    for (long x = 0; x <= L; ++x) {
        const int busy = static_cast<int>(std::min<long>(x, n));
        const long queue = std::max<long>(x - n, 0);
        const int k_lo = model.single_phase ? busy : 0;
        for (int k = k_lo; k <= busy; ++k) {
            const long from = model.index(x, k);
            gen.level[static_cast<std::size_t>(from)] = x;
            gen.k1[static_cast<std::size_t>(from)] = k;
            const int k2 = model.single_phase ? 0 : busy - k;
            row.clear();
            auto add = [&](long lvl, int kk, double rate) {
                if (rate <= 0.0) return;
                const long to = model.index(lvl, kk);
                for (auto& [col, r] : row) {
                    if (col == to) {
                        r += rate;
                        return;
                    }
                }
                row.emplace_back(to, rate);
            };
            if (x < L) {
                if (x < n) {
                    add(x + 1, k + 1, model.lambda * p1);
                    if (!model.single_phase) add(x + 1, k, model.lambda * p2);
                } else {
                    add(x + 1, k, model.lambda);
                }
            }
            const double c1 = k * model.rate1;
            const double c2 = k2 * model.rate2;
            if (queue == 0) {
                if (k > 0) add(x - 1, k - 1, c1);
                if (k2 > 0) add(x - 1, k, c2);
            } else {
                // the head-of-line customer starts service in a fresh phase
                add(x - 1, k, c1 * p1);
                if (k > 0 && !model.single_phase) add(x - 1, k - 1, c1 * p2);
                if (k < n) add(x - 1, k + 1, c2 * p1);
                add(x - 1, k, c2 * p2);
                add(x - 1, k, static_cast<double>(queue) / model.gamma);
            }
            double out = 0.0;
            for (const auto& [to, r] : row) {
                triplets.emplace_back(from, to, r);
                out += r;
            }
            triplets.emplace_back(from, from, -out);
        }
    }
    gen.dropped_arrival_rate = model.lambda;
    gen.Q.resize(size, size);
    gen.Q.setFromTriplets(triplets.begin(), triplets.end());
    gen.Q.makeCompressed();
    return gen;
}

double StationaryDist::mean() const {
    double m = 0.0;
    for (std::size_t x = 0; x < marginal.size(); ++x) m += static_cast<double>(x) * marginal[x];
    return m;
}

double StationaryDist::variance() const {
    const double m = mean();
    double v = 0.0;
    for (std::size_t x = 0; x < marginal.size(); ++x) {
        const double d = static_cast<double>(x) - m;
        v += d * d * marginal[x];
    }
    return v;
}

std::vector<double> stationary_vector(const Eigen::SparseMatrix<double, Eigen::RowMajor>& Q,
                                      double* residual_out) {
    const long size = Q.rows();
    if (size < 1 || Q.cols() != size) throw Error(Errc::InvalidParams, "generator must be square");
    // Solve Q^T pi = 0 with the equation of the last state replaced by sum(pi) = 1.
    const long ref = size - 1;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(Q.nonZeros() + size));
    for (long i = 0; i < size; ++i) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Q, i); it; ++it) {
            if (it.col() != ref) triplets.emplace_back(it.col(), i, it.value());
        }
        triplets.emplace_back(ref, i, 1.0);
    }
    Eigen::SparseMatrix<double> A(size, size);
    A.setFromTriplets(triplets.begin(), triplets.end());
    A.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) {
        throw Error(Errc::SingularSystem, "sparse LU failed: " + lu.lastErrorMessage());
    }
    Eigen::VectorXd b = Eigen::VectorXd::Zero(size);
    b(ref) = 1.0;
    Eigen::VectorXd pi = lu.solve(b);
    if (lu.info() != Eigen::Success || !pi.allFinite()) {
        throw Error(Errc::SingularSystem, "sparse LU solve failed");
    }

    auto residual_of = [&](const Eigen::VectorXd& v) {
        const Eigen::VectorXd r = Q.transpose() * v;
        return r.cwiseAbs().maxCoeff();
    };
    double residual = residual_of(pi);
    for (int refine = 0; refine < 5 && residual >= 1e-10; ++refine) {
        const Eigen::VectorXd r = b - A * pi;
        pi += lu.solve(r);
        residual = residual_of(pi);
    }
    if (!(residual < 1e-10)) {
        throw Error(Errc::NonConvergence, "stationary residual above 1e-10 after refinement");
    }
    std::vector<double> out(static_cast<std::size_t>(size));
    double total = 0.0;
    for (long i = 0; i < size; ++i) {
        const double v = std::max(pi(i), 0.0);
        out[static_cast<std::size_t>(i)] = v;
        total += v;
    }
    for (double& v : out) v /= total;
    if (residual_out) *residual_out = residual;
    return out;
}

StationaryDist solve_stationary(const Generator& gen, const CTMCModel& model) {
    const long size = gen.Q.rows();
    StationaryDist dist;
    dist.pi = stationary_vector(gen.Q, &dist.residual);
    dist.marginal.assign(static_cast<std::size_t>(model.truncation + 1), 0.0);
    for (long i = 0; i < size; ++i) {
        dist.marginal[static_cast<std::size_t>(gen.level[static_cast<std::size_t>(i)])] +=
            dist.pi[static_cast<std::size_t>(i)];
    }
    // Geometric bound on the omitted mass from the boundary level, using the
    // mean service rate of fully busy servers plus abandonment at level L.
    const double top = dist.marginal.back();
    const double death = model.n * model.mu() + (model.truncation - model.n) / model.gamma;
    const double ratio = model.lambda / death;
    dist.truncation_mass_bound = ratio < 1.0 ? top * ratio / (1.0 - ratio) : top;
    return dist;
}

namespace {

struct Rates {
    double completion = 0.0;
    double abandonment = 0.0;
    double accepted = 0.0;
};

Rates rates_under(const StationaryDist& dist, const Generator& gen, const CTMCModel& model) {
    Rates r;
    for (std::size_t i = 0; i < dist.pi.size(); ++i) {
        const long x = gen.level[i];
        const int busy = static_cast<int>(std::min<long>(x, model.n));
        const int k = gen.k1[i];
        const int k2 = model.single_phase ? 0 : busy - k;
        r.completion += dist.pi[i] * (k * model.rate1 + k2 * model.rate2);
        r.abandonment += dist.pi[i] * static_cast<double>(std::max<long>(x - model.n, 0)) / model.gamma;
        if (x < model.truncation) r.accepted += dist.pi[i] * model.lambda;
    }
    return r;
}

}  // namespace

double abandonment_fraction(const StationaryDist& dist, const Generator& gen, const CTMCModel& model) {
    return rates_under(dist, gen, model).abandonment / model.lambda;
}

double flow_imbalance(const StationaryDist& dist, const Generator& gen, const CTMCModel& model) {
    const Rates r = rates_under(dist, gen, model);
    return r.accepted - r.completion - r.abandonment;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    const std::size_t m = std::max(p.size(), q.size());
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double a = i < p.size() ? p[i] : 0.0;
        const double b = i < q.size() ? q[i] : 0.0;
        s += std::abs(a - b);
    }
    return 0.5 * s;
}

GaussianComparison compare_to_gaussian(const StationaryDist& dist, const GaussianApprox& approx) {
    GaussianComparison c;
    const std::size_t m = dist.marginal.size();
    c.gaussian_pmf.resize(m);
    double inside = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        c.gaussian_pmf[i] = state_pmf(approx, static_cast<long>(i));
        inside += c.gaussian_pmf[i];
    }
    // Gaussian mass that falls outside 0..L counts as disagreement.
    c.tv = total_variation(dist.marginal, c.gaussian_pmf) + 0.5 * std::max(0.0, 1.0 - inside);
    c.exact_mean = dist.mean();
    c.exact_var = dist.variance();
    c.approx_mean = approx.n + approx.q;
    c.approx_var = approx.sigma2_Q;
    c.mean_gap = c.exact_mean - c.approx_mean;
    c.var_gap = c.exact_var - c.approx_var;
    return c;
}

}  // namespace abandonq
