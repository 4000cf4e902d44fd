#pragma once

#include "hyperdyn/common.hpp"

#include <array>
#include <vector>

namespace hyperdyn {

// Coefficients of the monic characteristic polynomial, highest degree first
// after the implicit leading 1: x^n + c[0] x^(n-1) + ... + c[n-1].
std::vector<long long> characteristic_polynomial(const IMat& m);

// Real roots of a monic integer polynomial of degree 2 or 3, ascending,
// isolated between critical points and bisected to full double precision.
std::vector<double> isolate_real_roots(const std::vector<long long>& coeffs);

// Discriminant of the monic polynomial, exact.
long long discriminant(const std::vector<long long>& coeffs);

class ToralAutomorphism {
public:
    // Throws NotUnimodular, NotHyperbolic, WrongClass.
    static ToralAutomorphism classify(const IMat& m, bool require_t3 = false);

    int dim() const { return static_cast<int>(m_.rows()); }
    const IMat& matrix() const { return m_; }
    const IMat& inverse_matrix() const { return minv_; }
    long long det() const { return det_; }
    const std::vector<long long>& charpoly() const { return poly_; }

    // Ascending. For the three-dimensional class: lambda_s < lambda_c < 1 < lambda_u.
    const std::vector<double>& eigenvalues() const { return lambda_; }
    // Columns are unit eigenvectors in eigenvalue order.
    const Mat& eigenbasis() const { return basis_; }
    const Mat& eigenbasis_inverse() const { return basis_inv_; }
    Vec eigenvector(int i) const { return basis_.col(i); }

    // Real, positive, simple spectrum with exactly one eigenvalue > 1, n = 3.
    bool t3_class() const { return t3_; }
    // lambda_u > 3, the expansion needed for the bifurcation construction.
    bool strong_unstable() const { return t3_ && lambda_.back() > 3.0; }
    int unstable_dim() const { return n_unstable_; }

    double lambda_s() const { return lambda_.front(); }
    double lambda_c() const { return lambda_[1]; }
    double lambda_u() const { return lambda_.back(); }

    Vec apply(const Vec& x) const;
    Vec apply_inverse(const Vec& x) const;
    Vec apply_torus(const Vec& x) const;
    Vec apply_inverse_torus(const Vec& x) const;

    Vec to_eigen(const Vec& x) const { return basis_inv_ * x; }
    Vec from_eigen(const Vec& e) const { return basis_ * e; }

    // Component of v along the unstable directions (projection onto E^u
    // along the contracting directions) and its complement.
    Vec unstable_part(const Vec& v) const;
    Vec contracting_part(const Vec& v) const { return v - unstable_part(v); }
    // Unstable eigencoordinate (codimension-one unstable case).
    double unstable_coord(const Vec& v) const { return basis_inv_.row(dim() - 1).dot(v); }

    // z with z - x in the contracting subspace and z - y in E^u.
    Vec bracket(const Vec& x, const Vec& y) const;

    ToralAutomorphism power(int k) const;
    // Sup norm of eigencoordinates.
    double eigen_norm(const Vec& v) const { return to_eigen(v).cwiseAbs().maxCoeff(); }
    // Operator norm (Euclidean) of the projection onto E^u along the
    // contracting subspace.
    double unstable_projector_norm() const;

private:
    IMat m_, minv_;
    long long det_ = 0;
    std::vector<long long> poly_;
    std::vector<double> lambda_;
    Mat basis_, basis_inv_;
    bool t3_ = false;
    int n_unstable_ = 0;
};

IMat integer_matrix(std::initializer_list<std::initializer_list<long long>> rows);
IMat default_matrix();

// Torus helpers. Cells are half-open, so reduction maps into [0,1).
Vec torus_reduce(const Vec& x);
// Displacement to the nearest integer translate, components in [-1/2, 1/2).
Vec wrap_displacement(const Vec& d);
double torus_distance(const Vec& x, const Vec& y);

} // namespace hyperdyn
