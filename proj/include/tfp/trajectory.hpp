#ifndef TFP_TRAJECTORY_HPP
#define TFP_TRAJECTORY_HPP

#include <cstdint>
#include <utility>
#include <vector>

namespace tfp {

/**
 * Analysis parameters shared across modules: the error margin eps, the large
 * constant big_c, the slow-growing cutoff omega, and the walk-length constant
 * k_short.  Natural logarithms throughout.
 */
struct Params {
    int n = 0;
    double eps = 0.1;
    double big_c = 20.0;
    int omega = 0;    // 0 = derive the default below
    int k_short = 0;  // 0 = derive ceil(3/eps)

    void validate() const;        // throws std::invalid_argument
    double log_n() const;         // natural log
    double n32() const;           // n^{3/2}
    int omega_value() const;      // max(1, floor(ln ln ln n)) unless overridden
    int k_short_value() const;    // ceil(3/eps) unless overridden
};

double time_map(const Params& p, long long m);  // t = m * n^{-3/2}
double t_star(const Params& p);                 // (1/(2*sqrt(2)) - eps) * sqrt(log n)
long long m_star(const Params& p);              // floor(t_star * n^{3/2})

enum class Tilde { Q, X, Y };
/** Idealized trajectory value at step m. */
double tilde(const Params& p, Tilde which, long long m);

enum class Envelope { g_q, g_x, g_y, g_sigma, f_y, f_x };
/** Error envelope at time t; sigma_len only matters for g_sigma. */
double envelope(const Params& p, Envelope which, double t, int sigma_len = 0);

/** (value - tilde) / (env * tilde); throws on a non-positive denominator. */
double normalized_error(double value, double tilde_value, double env);

/** Change of basis from normalized errors to whirlpool coordinates, and back. */
std::pair<double, double> whirlpool(double eps, double ybar_star, double q_star);
std::pair<double, double> whirlpool_inverse(double eps, double lambda, double mu);
double lyapunov(double lambda, double mu);

struct MartingaleQuery {
    double alpha = 0;  // worst-case step bound
    double beta = 0;   // expected step bound
    double s = 0;      // horizon
    double x = 0;      // deviation, valid for 0 <= x <= beta*s
};
/** exp(-x^2 / (4*alpha*beta*s)); domain error outside the valid deviation range. */
double martingale_bound(const MartingaleQuery& q);

/**
 * Discrete slow-variation check: for every sample anchor t_i > 0, the
 * max/min ratio over samples in [t_i, t_i + 1/t_i] must be <= lam.
 */
bool lambda_slow_check(const std::vector<std::pair<double, double>>& samples, double lam);

struct CrossingEvent {
    long long r = 0;  // m of the last sample strictly inside the safe band before the excursion
    long long s = 0;  // death step minus r
    int sign = 0;     // +1 for upward excursions, -1 for downward
};
/**
 * Scan a sampled normalized-error series for completed excursions: events
 * where |a*| crosses 1 after last crossing the 1/2 line at step r+1.
 */
std::vector<CrossingEvent> crossing_events(
    const std::vector<std::pair<long long, double>>& series);

/** One sampled row of a run; the CSV schema mirrors these fields. */
struct RunRecord {
    long long m = 0;
    double t = 0;
    long long q = 0;
    double q_tilde = 0, q_star = 0;
    double ybar = 0, y_tilde = 0, ybar_star = 0;
    double xbar = 0, x_tilde = 0, xbar_star = 0;
    double lambda = 0, mu = 0, lyapunov = 0;
    int max_deg = 0;
    double var_y = 0, cov_xy = 0;
    long long sample_size = 0;
};

/**
 * Assemble a RunRecord from measured values.  All three starred errors are
 * normalized by the g_q envelope (the whirlpool convention), so lambda and mu
 * are exact linear images of (ybar_star, q_star).  At m = 0 the Y/X tildes
 * vanish; starred fields are reported as 0 there.
 */
RunRecord make_record(const Params& p, long long m, long long q, double ybar, double xbar,
                      double var_y, double cov_xy, int max_deg, long long sample_size);

} // namespace tfp

#endif
