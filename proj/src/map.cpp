#include "hyperdyn/map.hpp"

#include <cmath>

namespace hyperdyn {

Vec iterate(const TorusMap& f, Vec x, int n)
{
    for (int i = 0; i < n; ++i)
        x = f.forward(x);
    for (int i = 0; i < -n; ++i)
        x = f.inverse(x);
    return x;
}

BumpMap::BumpMap(ToralAutomorphism base, Vec p, int direction, BifurcationProfile profile, double radius)
    : a_(std::move(base)), p_(std::move(p)), j_(direction), prof_(std::move(profile)), r_(radius)
{
    int n = a_.dim();
    if (p_.size() != n || j_ < 0 || j_ >= n || !(r_ > 0))
        throw Error("BadInput", "bump map: bad center, direction or radius");
    if (torus_distance(a_.apply_torus(torus_reduce(p_)), torus_reduce(p_)) > 1e-12)
        throw Error("BadInput", "bump center is not a fixed point of the base map");
    if (std::fabs(prof_.params().lambda - a_.eigenvalues()[j_]) > 1e-12)
        throw Error("BadInput", "profile slope differs from the eigenvalue of the bump direction");
    if (support_radius() >= 0.5)
        throw Error("BadInput", "bump support does not fit in a fundamental domain");
    e_ = a_.eigenvector(j_);
}

Vec BumpMap::displacement(const Vec& p, const Vec& d) const
{
    return a_.apply(d) + (bump(p + d) - bump(p)) * e_;
}

Vec BumpMap::eigen_defect(const Vec& x) const
{
    Vec e = Vec::Zero(a_.dim());
    e[j_] = bump(x);
    return e;
}

double BumpMap::support_radius() const { return std::hypot(prof_.params().w, r_); }

double BumpMap::leaf_coord(const Vec& x) const { return wrap_displacement(x - p_).dot(e_); }

double BumpMap::radial(const Vec& x) const
{
    Vec d = wrap_displacement(x - p_);
    return (d - d.dot(e_) * e_).norm();
}

double BumpMap::cutoff(double r) const { return 1.0 - smootherstep((r - 0.5 * r_) / (0.5 * r_)); }
double BumpMap::cutoff_d(double r) const { return -smootherstep_d((r - 0.5 * r_) / (0.5 * r_)) / (0.5 * r_); }

double BumpMap::bump(const Vec& x) const
{
    Vec d = wrap_displacement(x - p_);
    double t = d.dot(e_);
    if (std::fabs(t) >= prof_.params().w)
        return 0.0;
    double r = (d - t * e_).norm();
    if (r >= r_)
        return 0.0;
    return prof_.k(t) * cutoff(r);
}

Vec BumpMap::bump_gradient(const Vec& x) const
{
    Vec d = wrap_displacement(x - p_);
    double t = d.dot(e_);
    Vec g = Vec::Zero(dim());
    if (std::fabs(t) >= prof_.params().w)
        return g;
    Vec w = d - t * e_;
    double r = w.norm();
    if (r >= r_)
        return g;
    g = prof_.dk(t) * cutoff(r) * e_;
    if (r > 0)
        g += prof_.k(t) * cutoff_d(r) / r * w;
    return g;
}

Vec BumpMap::forward(const Vec& x) const
{
    double b = bump(x);
    if (b == 0.0)
        return a_.apply(x);
    return a_.apply(x) + b * e_;
}

Vec BumpMap::inverse(const Vec& y) const
{
    // G^-1(y) = A^-1 y - s e with s solving a monotone equation along the
    // line through A^-1 y parallel to e (A^-1 e = e / lambda).
    Vec x0 = a_.apply_inverse(y);
    Vec d = wrap_displacement(x0 - p_);
    double t0 = d.dot(e_);
    double r = (d - t0 * e_).norm();
    if (r >= r_)
        return x0;
    double lam = prof_.params().lambda, w = prof_.params().w;
    if (std::fabs(t0) >= w)
        return x0;
    double psi = cutoff(r);
    // lambda t + psi k(t) = lambda t0, increasing in t.
    double lo = -w, hi = w, t = t0;
    for (int it = 0; it < 200; ++it) {
        double f = lam * t + psi * prof_.k(t) - lam * t0;
        if (f > 0)
            hi = t;
        else
            lo = t;
        double df = lam + psi * prof_.dk(t);
        double nt = t - f / df;
        if (!(nt > lo && nt < hi))
            nt = 0.5 * (lo + hi);
        bool done = std::fabs(nt - t) <= 1e-16 * w;
        t = nt;
        if (done || hi - lo <= 1e-16 * w)
            break;
    }
    return x0 - (t0 - t) * e_;
}

Mat BumpMap::jacobian(const Vec& x) const
{
    Mat j = a_.matrix().cast<double>();
    Vec g = bump_gradient(x);
    if (!g.isZero())
        j += e_ * g.transpose();
    return j;
}

} // namespace hyperdyn
