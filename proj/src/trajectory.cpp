#include "tfp/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tfp {

void Params::validate() const {
    if (n < 2) throw std::invalid_argument("Params: n must be at least 2");
    if (!(eps > 0.0 && eps < 0.125))
        throw std::invalid_argument("Params: eps must lie in (0, 1/8)");
    if (!(big_c > 0.0)) throw std::invalid_argument("Params: big_c must be positive");
    if (omega < 0) throw std::invalid_argument("Params: omega override must be positive");
    if (k_short != 0 && k_short < 3)
        throw std::invalid_argument("Params: k_short must be at least 3");
}

double Params::log_n() const { return std::log(static_cast<double>(n)); }
double Params::n32() const { return std::pow(static_cast<double>(n), 1.5); }

int Params::omega_value() const {
    if (omega > 0) return omega;
    const double ll = std::log(log_n());
    if (!(ll > 0.0)) return 1;  // ln ln n <= 0: the triple log is undefined or negative
    return std::max(1, static_cast<int>(std::floor(std::log(ll))));
}

int Params::k_short_value() const {
    if (k_short > 0) return k_short;
    return static_cast<int>(std::ceil(3.0 / eps));
}

double time_map(const Params& p, long long m) {
    return static_cast<double>(m) / p.n32();
}

double t_star(const Params& p) {
    return (1.0 / (2.0 * std::sqrt(2.0)) - p.eps) * std::sqrt(p.log_n());
}

long long m_star(const Params& p) {
    return static_cast<long long>(std::floor(t_star(p) * p.n32()));
}

double tilde(const Params& p, Tilde which, long long m) {
    if (m < 0) throw std::invalid_argument("tilde: m must be non-negative");
    const double t = time_map(p, m);
    const double n = static_cast<double>(p.n);
    switch (which) {
        case Tilde::Q: return std::exp(-4.0 * t * t) * n * (n - 1.0) / 2.0;
        case Tilde::X: return 2.0 * std::exp(-8.0 * t * t) * n;
        case Tilde::Y: return 4.0 * t * std::exp(-4.0 * t * t) * std::sqrt(n);
    }
    throw std::invalid_argument("tilde: unknown trajectory");
}

double envelope(const Params& p, Envelope which, double t, int sigma_len) {
    if (!(t >= 0.0)) throw std::invalid_argument("envelope: t must be non-negative");
    if (sigma_len < 0) throw std::invalid_argument("envelope: sigma length must be non-negative");
    const double logn = p.log_n();
    const double n14 = std::pow(static_cast<double>(p.n), -0.25);
    const double g_y = std::exp(2.0 * t * t) * n14 * std::pow(logn, 4.0);
    switch (which) {
        case Envelope::g_q: return std::exp(2.0 * t * t) * n14 * std::pow(logn, 3.0);
        case Envelope::g_y: return g_y;
        case Envelope::g_x: return p.big_c * g_y;
        case Envelope::g_sigma: return std::pow(p.eps, sigma_len) * g_y;
        case Envelope::f_y: return std::exp(p.big_c * t * t) * n14 * std::pow(logn, 2.5);
        case Envelope::f_x:
            return std::exp(-4.0 * t * t) * std::exp(p.big_c * t * t) * n14 * std::pow(logn, 2.5);
    }
    throw std::invalid_argument("envelope: unknown envelope");
}

double normalized_error(double value, double tilde_value, double env) {
    if (!(tilde_value > 0.0) || !(env > 0.0))
        throw std::invalid_argument("normalized_error: tilde and envelope must be positive");
    return (value - tilde_value) / (env * tilde_value);
}

std::pair<double, double> whirlpool(double eps, double ybar_star, double q_star) {
    if (!(eps > 0.0)) throw std::invalid_argument("whirlpool: eps must be positive");
    const double lambda = (-3.0 * ybar_star + 5.0 * q_star) / (8.0 * eps);
    const double mu = (4.0 * ybar_star - 4.0 * q_star) / (8.0 * eps);
    return {lambda, mu};
}

std::pair<double, double> whirlpool_inverse(double eps, double lambda, double mu) {
    if (!(eps > 0.0)) throw std::invalid_argument("whirlpool_inverse: eps must be positive");
    return {eps * (4.0 * lambda + 5.0 * mu), eps * (4.0 * lambda + 3.0 * mu)};
}

double lyapunov(double lambda, double mu) { return lambda * lambda + mu * mu; }

double martingale_bound(const MartingaleQuery& q) {
    if (!(q.alpha > 0.0 && q.beta > 0.0 && q.s > 0.0))
        throw std::invalid_argument("martingale_bound: alpha, beta, s must be positive");
    if (!(q.x >= 0.0)) throw std::invalid_argument("martingale_bound: x must be non-negative");
    if (q.x > q.beta * q.s)
        throw std::domain_error("martingale_bound: x exceeds beta*s, bound not valid");
    return std::exp(-(q.x * q.x) / (4.0 * q.alpha * q.beta * q.s));
}

bool lambda_slow_check(const std::vector<std::pair<double, double>>& samples, double lam) {
    if (samples.empty()) throw std::invalid_argument("lambda_slow_check: empty sample list");
    if (!(lam >= 1.0)) throw std::invalid_argument("lambda_slow_check: lam must be at least 1");
    for (std::size_t i = 0; i + 1 < samples.size(); ++i)
        if (samples[i + 1].first < samples[i].first)
            throw std::invalid_argument("lambda_slow_check: samples must be sorted by t");
    for (const auto& [t, v] : samples)
        if (!(v > 0.0)) throw std::invalid_argument("lambda_slow_check: values must be positive");

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double x = samples[i].first;
        if (!(x > 0.0)) continue;  // a window needs a positive anchor
        const double end = x + 1.0 / x;
        double lo_v = samples[i].second, hi_v = samples[i].second;
        for (std::size_t j = i; j < samples.size() && samples[j].first <= end; ++j) {
            lo_v = std::min(lo_v, samples[j].second);
            hi_v = std::max(hi_v, samples[j].second);
        }
        if (hi_v > lam * lo_v) return false;
    }
    return true;
}

std::vector<CrossingEvent> crossing_events(
    const std::vector<std::pair<long long, double>>& series) {
    for (std::size_t i = 0; i + 1 < series.size(); ++i)
        if (series[i + 1].first < series[i].first)
            throw std::invalid_argument("crossing_events: series must be ordered by m");
    std::vector<CrossingEvent> events;
    bool plus_armed = false, minus_armed = false;
    long long plus_r = 0, minus_r = 0;
    for (const auto& [m, a] : series) {
        if (a > 1.0) {
            if (plus_armed) {
                events.push_back({plus_r, m - plus_r, +1});
                plus_armed = false;
            }
        } else if (a < 0.5) {
            plus_armed = true;  // most recent sample below the Line of Peril
            plus_r = m;
        }
        if (a < -1.0) {
            if (minus_armed) {
                events.push_back({minus_r, m - minus_r, -1});
                minus_armed = false;
            }
        } else if (a > -0.5) {
            minus_armed = true;
            minus_r = m;
        }
    }
    return events;
}

RunRecord make_record(const Params& p, long long m, long long q, double ybar, double xbar,
                      double var_y, double cov_xy, int max_deg, long long sample_size) {
    RunRecord r;
    r.m = m;
    r.t = time_map(p, m);
    r.q = q;
    r.q_tilde = tilde(p, Tilde::Q, m);
    r.y_tilde = tilde(p, Tilde::Y, m);
    r.x_tilde = tilde(p, Tilde::X, m);
    r.ybar = ybar;
    r.xbar = xbar;
    r.var_y = var_y;
    r.cov_xy = cov_xy;
    r.max_deg = max_deg;
    r.sample_size = sample_size;
    const double gq = envelope(p, Envelope::g_q, r.t);
    auto star = [&](double value, double tilde_value) {
        const double denom = gq * tilde_value;
        return denom > 0.0 ? (value - tilde_value) / denom : 0.0;
    };
    r.q_star = star(static_cast<double>(q), r.q_tilde);
    r.ybar_star = star(ybar, r.y_tilde);
    r.xbar_star = star(xbar, r.x_tilde);
    const auto [lambda, mu] = whirlpool(p.eps, r.ybar_star, r.q_star);
    r.lambda = lambda;
    r.mu = mu;
    r.lyapunov = lyapunov(lambda, mu);
    return r;
}

} // namespace tfp
