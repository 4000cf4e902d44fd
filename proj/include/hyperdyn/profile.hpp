#pragma once

#include <vector>

namespace hyperdyn {

// Quintic smootherstep on [0,1], clamped outside. C2 with vanishing first
// and second derivatives at both ends.
double smootherstep(double x);
double smootherstep_d(double x);
double smootherstep_dd(double x);

// Odd one-dimensional map g(t) = lambda t + k(t) whose derivative is an even
// C2 spline through the knots
//   0: mu,  c_a: p,  cstar: d,  cstar+tau: m,  w-tau: m,  w: lambda
// with smootherstep transitions. p and tau are solved so that g(+-cstar) =
// +-cstar exactly and k vanishes for |t| >= w. g is strictly increasing.
class BifurcationProfile {
public:
    struct Params {
        double lambda = 0.5; // derivative far from the origin, in (0,1)
        double mu = 1.2;     // derivative at the origin, > 1
        double cstar = 0.03; // outer fixed points at +-cstar
        double d = 0.5;      // derivative at +-cstar, in (0,1)
        double w = 0.09;     // half-length of the support of k
        double plateau = 0.0; // derivative on the low plateau; 0 picks a default
    };

    // Throws BadBifurcation when the knots cannot be placed.
    explicit BifurcationProfile(const Params& p);

    const Params& params() const { return p_; }
    double g(double t) const { return p_.lambda * t + k(t); }
    double k(double t) const;
    double dg(double t) const; // g'
    double dk(double t) const { return dg(t) - p_.lambda; }
    double ddg(double t) const; // g''
    // Inverse of g by safeguarded Newton.
    double g_inverse(double y) const;

    double tau() const { return tau_; }
    double plateau() const { return m_; }
    double min_derivative() const;

private:
    struct Knot {
        double t, v;
    };
    Params p_;
    double tau_ = 0, m_ = 0;
    std::vector<Knot> knots_;
    std::vector<double> integral_; // integral of g' from 0 to each knot
};

} // namespace hyperdyn
