#pragma once

#include "hyperdyn/profile.hpp"
#include "hyperdyn/torus.hpp"

#include <string>

namespace hyperdyn {

// A torus diffeomorphism given by its action on lifts. forward/inverse take
// and return points of R^n; reducing mod 1 is the caller's business.
class TorusMap {
public:
    virtual ~TorusMap() = default;
    virtual int dim() const = 0;
    virtual Vec forward(const Vec& x) const = 0;
    virtual Vec inverse(const Vec& x) const = 0;
    virtual Mat jacobian(const Vec& x) const = 0;
    // F(p + d) - F(p), evaluated without forming F(p + d) where possible so
    // that small displacements keep their relative accuracy.
    virtual Vec displacement(const Vec& p, const Vec& d) const { return forward(p + d) - forward(p); }
    // F(x) - A x in eigencoordinates of the base. Maps that move points along
    // a single eigendirection return exact zeros in the other components.
    virtual Vec eigen_defect(const Vec& x) const { return base().to_eigen(forward(x) - base().apply(x)); }
    // The hyperbolic linear map this one is homotopic to.
    virtual const ToralAutomorphism& base() const = 0;
    virtual std::string id() const = 0;
};

class LinearMap final : public TorusMap {
public:
    explicit LinearMap(ToralAutomorphism a) : a_(std::move(a)) {}
    int dim() const override { return a_.dim(); }
    Vec forward(const Vec& x) const override { return a_.apply(x); }
    Vec inverse(const Vec& x) const override { return a_.apply_inverse(x); }
    Mat jacobian(const Vec&) const override { return a_.matrix().cast<double>(); }
    Vec displacement(const Vec&, const Vec& d) const override { return a_.apply(d); }
    Vec eigen_defect(const Vec&) const override { return Vec::Zero(a_.dim()); }
    const ToralAutomorphism& base() const override { return a_; }
    std::string id() const override { return "linear"; }

private:
    ToralAutomorphism a_;
};

// Linear map plus a bump that pushes points along one eigendirection e:
//   G(x) = A x + e * k(t) * psi(r),
// where, with d the displacement from p to the nearest translate of x,
// t = d.e and r = |d - t e|. k comes from a BifurcationProfile whose far
// slope equals the eigenvalue of e, psi is 1 for r <= R/2 and 0 for r >= R
// (C2 smootherstep). Lines parallel to e are mapped to lines parallel to e.
// Outside the cylinder |t| < w, r < R the result is exactly A x.
class BumpMap final : public TorusMap {
public:
    // p must be a fixed point of A on the torus. Throws BadInput.
    BumpMap(ToralAutomorphism base, Vec p, int direction, BifurcationProfile profile, double radius);

    int dim() const override { return a_.dim(); }
    Vec forward(const Vec& x) const override;
    Vec inverse(const Vec& y) const override;
    Mat jacobian(const Vec& x) const override;
    Vec displacement(const Vec& p, const Vec& d) const override;
    Vec eigen_defect(const Vec& x) const override;
    const ToralAutomorphism& base() const override { return a_; }
    std::string id() const override { return id_; }
    void set_id(std::string s) { id_ = std::move(s); }

    const Vec& center() const { return p_; }
    int direction() const { return j_; }
    const Vec& axis() const { return e_; }
    const BifurcationProfile& profile() const { return prof_; }
    double radius() const { return r_; }
    double half_length() const { return prof_.params().w; }
    // Radius of the smallest ball around p containing the support.
    double support_radius() const;

    double leaf_coord(const Vec& x) const;
    double radial(const Vec& x) const;
    double cutoff(double r) const;
    double cutoff_d(double r) const;
    // k(t) psi(r) and its gradient.
    double bump(const Vec& x) const;
    Vec bump_gradient(const Vec& x) const;

private:
    ToralAutomorphism a_;
    Vec p_, e_;
    int j_;
    BifurcationProfile prof_;
    double r_;
    std::string id_ = "bump";
};

// n-fold iterate on lifts; negative n uses the inverse.
Vec iterate(const TorusMap& f, Vec x, int n);

} // namespace hyperdyn
