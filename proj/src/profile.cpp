#include "hyperdyn/profile.hpp"

#include "hyperdyn/common.hpp"

#include <algorithm>
#include <cmath>

namespace hyperdyn {

double smootherstep(double x)
{
    if (x <= 0)
        return 0;
    if (x >= 1)
        return 1;
    return x * x * x * (x * (6 * x - 15) + 10);
}

double smootherstep_d(double x)
{
    if (x <= 0 || x >= 1)
        return 0;
    return 30 * x * x * (x - 1) * (x - 1);
}

double smootherstep_dd(double x)
{
    if (x <= 0 || x >= 1)
        return 0;
    return 60 * x * (x - 1) * (2 * x - 1);
}

namespace {
// Antiderivative of smootherstep, zero at 0.
double smootherstep_int(double x)
{
    if (x <= 0)
        return 0;
    if (x >= 1)
        return 0.5 + (x - 1);
    return x * x * x * x * (x * (x - 3) + 2.5);
}
} // namespace

BifurcationProfile::BifurcationProfile(const Params& p) : p_(p)
{
    if (!(p.lambda > 0 && p.lambda < 1) || !(p.mu > 1) || !(p.d > 0 && p.d < 1) || !(p.cstar > 0)
        || !(p.w > p.cstar))
        throw Error("BadBifurcation", "profile needs 0 < lambda < 1 < mu, 0 < d < 1, 0 < cstar < w");
    double budget = p.lambda * p.w - p.cstar;
    if (budget <= 0)
        throw Error("BadBifurcation", "support too short: lambda * w <= cstar");
    m_ = p.plateau > 0 ? p.plateau : 0.4 * budget / (p.w - p.cstar);
    double denom = 0.5 * (p.d + p.lambda) - m_;
    tau_ = (budget - (p.w - p.cstar) * m_) / denom;
    if (!(denom > 0) || !(tau_ > 0) || p.w - p.cstar - 2 * tau_ < 0)
        throw Error("BadBifurcation", "no room for the plateau between cstar and w");

    // Keep the first knot value p = 2 - (c_a mu + (cstar - c_a) d) / cstar
    // at least 0.5 so g' stays clearly positive for large mu.
    double ca = p.cstar * std::min(0.5, (2 - 0.5 - p.d) / (p.mu - p.d));
    double pk = 2 - (ca * p.mu + (p.cstar - ca) * p.d) / p.cstar;
    if (!(pk > 0))
        throw Error("BadBifurcation", "negative derivative knot");

    knots_ = {{0, p.mu}, {ca, pk}, {p.cstar, p.d}, {p.cstar + tau_, m_}, {p.w - tau_, m_}, {p.w, p.lambda}};
    integral_.assign(knots_.size(), 0.0);
    for (std::size_t i = 1; i < knots_.size(); ++i)
        integral_[i] = integral_[i - 1] + (knots_[i].t - knots_[i - 1].t) * 0.5 * (knots_[i].v + knots_[i - 1].v);
}

double BifurcationProfile::dg(double t) const
{
    double a = std::fabs(t);
    if (a >= p_.w)
        return p_.lambda;
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (a < knots_[i].t) {
            const Knot &l = knots_[i - 1], &r = knots_[i];
            double x = (a - l.t) / (r.t - l.t);
            return l.v + (r.v - l.v) * smootherstep(x);
        }
    return p_.lambda;
}

double BifurcationProfile::ddg(double t) const
{
    double a = std::fabs(t);
    if (a >= p_.w)
        return 0;
    double sign = t < 0 ? -1.0 : 1.0;
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (a < knots_[i].t) {
            const Knot &l = knots_[i - 1], &r = knots_[i];
            double len = r.t - l.t;
            return sign * (r.v - l.v) * smootherstep_d((a - l.t) / len) / len;
        }
    return 0;
}

double BifurcationProfile::k(double t) const
{
    double a = std::fabs(t);
    if (a >= p_.w)
        return 0;
    double sign = t < 0 ? -1.0 : 1.0;
    for (std::size_t i = 1; i < knots_.size(); ++i)
        if (a < knots_[i].t) {
            const Knot &l = knots_[i - 1], &r = knots_[i];
            double len = r.t - l.t;
            double x = (a - l.t) / len;
            double gi = integral_[i - 1] + len * (l.v * x + (r.v - l.v) * smootherstep_int(x));
            return sign * (gi - p_.lambda * a);
        }
    return 0;
}

double BifurcationProfile::g_inverse(double y) const
{
    // g is increasing with g(t) = lambda t outside [-w, w].
    if (std::fabs(y) >= p_.lambda * p_.w)
        return y / p_.lambda;
    double lo = -p_.w, hi = p_.w;
    double t = std::clamp(y / p_.lambda, lo, hi);
    for (int it = 0; it < 200; ++it) {
        double r = g(t) - y;
        if (r > 0)
            hi = t;
        else
            lo = t;
        double nt = t - r / dg(t);
        if (!(nt > lo && nt < hi))
            nt = 0.5 * (lo + hi);
        bool done = std::fabs(nt - t) <= 1e-16 * p_.w;
        t = nt;
        if (done || hi - lo <= 1e-16 * p_.w)
            break;
    }
    return t;
}

double BifurcationProfile::min_derivative() const
{
    double m = p_.lambda;
    for (auto& kn : knots_)
        m = std::min(m, kn.v);
    return m;
}

} // namespace hyperdyn
