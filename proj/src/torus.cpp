#include "hyperdyn/torus.hpp"

#include <algorithm>
#include <cmath>

namespace hyperdyn {

namespace {

long long det_int(const IMat& m)
{
    if (m.rows() == 2)
        return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1))
        - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
        + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

IMat adjugate(const IMat& m)
{
    int n = static_cast<int>(m.rows());
    IMat adj(n, n);
    if (n == 2) {
        adj << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
        return adj;
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            int r0 = (j + 1) % 3, r1 = (j + 2) % 3, c0 = (i + 1) % 3, c1 = (i + 2) % 3;
            adj(i, j) = m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0);
        }
    return adj;
}

long double peval(const std::vector<long long>& c, long double x)
{
    long double r = 1.0L;
    for (long long a : c)
        r = r * x + static_cast<long double>(a);
    return r;
}

long long peval_int(const std::vector<long long>& c, long long x)
{
    long long r = 1;
    for (long long a : c)
        r = r * x + a;
    return r;
}

// Root of a polynomial that is monotone on [lo, hi] with a sign change.
double bisect_root(const std::vector<long long>& c, double lo, double hi)
{
    long double flo = peval(c, lo);
    for (int it = 0; it < 2000; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        long double fm = peval(c, mid);
        if (fm == 0.0L)
            return mid;
        if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    long double a = std::fabs(peval(c, lo)), b = std::fabs(peval(c, hi));
    return a <= b ? lo : hi;
}

Vec normalize_sign(Vec v)
{
    v.normalize();
    for (int i = 0; i < v.size(); ++i) {
        if (std::fabs(v[i]) > 1e-14) {
            if (v[i] < 0)
                v = -v;
            break;
        }
    }
    return v;
}

Vec null_vector(const IMat& m, double lambda)
{
    int n = static_cast<int>(m.rows());
    Mat b = m.cast<double>() - lambda * Mat::Identity(n, n);
    Vec best;
    double best_norm = -1.0;
    if (n == 2) {
        Vec c1 = vec2(-b(0, 1), b(0, 0)), c2 = vec2(-b(1, 1), b(1, 0));
        best = c1.norm() >= c2.norm() ? c1 : c2;
        return normalize_sign(best);
    }
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            Eigen::Vector3d ri = b.row(i).transpose(), rj = b.row(j).transpose();
            Eigen::Vector3d c = ri.cross(rj);
            if (c.norm() > best_norm) {
                best_norm = c.norm();
                best = c;
            }
        }
    // One step of inverse iteration cleans up cancellation in the cross product.
    Mat shifted = b + 1e-9 * Mat::Identity(3, 3);
    Vec refined = shifted.fullPivLu().solve(Vec(best.normalized()));
    if (refined.allFinite() && refined.norm() > 0)
        best = refined;
    return normalize_sign(best);
}

} // namespace

std::vector<long long> characteristic_polynomial(const IMat& m)
{
    if (m.rows() == 2)
        return {-(m(0, 0) + m(1, 1)), det_int(m)};
    long long tr = m(0, 0) + m(1, 1) + m(2, 2);
    long long minors = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0) + m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)
        + m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
    return {-tr, minors, -det_int(m)};
}

long long discriminant(const std::vector<long long>& c)
{
    if (c.size() == 2)
        return c[0] * c[0] - 4 * c[1];
    long long a = c[0], b = c[1], d = c[2];
    return 18 * a * b * d - 4 * a * a * a * d + a * a * b * b - 4 * b * b * b - 27 * d * d;
}

std::vector<double> isolate_real_roots(const std::vector<long long>& c)
{
    double bound = 1.0;
    for (long long a : c)
        bound = std::max(bound, 1.0 + std::fabs(static_cast<double>(a)));
    std::vector<double> knots;
    if (c.size() == 2) {
        knots.push_back(-0.5 * static_cast<double>(c[0]));
    } else if (c.size() == 3) {
        // p' = 3x^2 + 2a x + b
        double a = static_cast<double>(c[0]), b = static_cast<double>(c[1]);
        double disc = 4 * a * a - 12 * b;
        if (disc > 0) {
            double s = std::sqrt(disc);
            knots.push_back((-2 * a - s) / 6);
            knots.push_back((-2 * a + s) / 6);
        }
    } else {
        throw Error("BadInput", "only degrees 2 and 3 are supported");
    }
    std::vector<double> edges{-bound};
    edges.insert(edges.end(), knots.begin(), knots.end());
    edges.push_back(bound);
    std::vector<double> roots;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        long double fa = peval(c, edges[i]), fb = peval(c, edges[i + 1]);
        if (fa == 0.0L) {
            if (roots.empty() || roots.back() != edges[i])
                roots.push_back(edges[i]);
            continue;
        }
        if ((fa < 0) != (fb < 0) && fb != 0.0L)
            roots.push_back(bisect_root(c, edges[i], edges[i + 1]));
    }
    std::sort(roots.begin(), roots.end());
    return roots;
}

ToralAutomorphism ToralAutomorphism::classify(const IMat& m, bool require_t3)
{
    if (m.rows() != m.cols() || (m.rows() != 2 && m.rows() != 3))
        throw Error("BadInput", "matrix must be 2x2 or 3x3");
    ToralAutomorphism a;
    a.m_ = m;
    a.det_ = det_int(m);
    if (std::llabs(a.det_) != 1)
        throw Error("NotUnimodular", "determinant " + std::to_string(a.det_));
    a.minv_ = adjugate(m) * a.det_;
    a.poly_ = characteristic_polynomial(m);
    int n = static_cast<int>(m.rows());

    // An eigenvalue +-1 is an exact integer check; integer roots of a monic
    // polynomial with constant term +-1 can only be +-1.
    if (peval_int(a.poly_, 1) == 0 || peval_int(a.poly_, -1) == 0)
        throw Error("NotHyperbolic", "eigenvalue of modulus one");
    long long disc = discriminant(a.poly_);
    std::vector<double> roots = isolate_real_roots(a.poly_);
    if (disc < 0) {
        // Complex pair. For n = 2 its modulus is sqrt(det) = 1.
        if (n == 2)
            throw Error("NotHyperbolic", "complex eigenvalues on the unit circle");
        double r = roots.at(0);
        double modulus = std::sqrt(1.0 / std::fabs(r));
        if (std::fabs(modulus - 1.0) < 1e-10 || std::fabs(std::fabs(r) - 1.0) < 1e-10)
            throw Error("NotHyperbolic", "complex pair on the unit circle");
        throw Error("WrongClass", "complex eigenvalue pair");
    }
    if (static_cast<int>(roots.size()) != n)
        throw Error("NotHyperbolic", "repeated eigenvalue");
    for (double r : roots)
        if (std::fabs(std::fabs(r) - 1.0) < 1e-10)
            throw Error("NotHyperbolic", "eigenvalue within 1e-10 of modulus one");

    a.lambda_ = roots;
    a.basis_ = Mat(n, n);
    for (int i = 0; i < n; ++i)
        a.basis_.col(i) = null_vector(m, roots[i]);
    a.basis_inv_ = a.basis_.inverse();

    // Order directions by modulus so contracting ones come first.
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return std::fabs(roots[i]) < std::fabs(roots[j]); });
    {
        std::vector<double> l(n);
        Mat b(n, n);
        for (int i = 0; i < n; ++i) {
            l[i] = roots[order[i]];
            b.col(i) = a.basis_.col(order[i]);
        }
        a.lambda_ = l;
        a.basis_ = b;
        a.basis_inv_ = b.inverse();
    }
    for (double r : a.lambda_)
        if (std::fabs(r) > 1.0)
            ++a.n_unstable_;

    bool positive = std::all_of(a.lambda_.begin(), a.lambda_.end(), [](double r) { return r > 0; });
    a.t3_ = n == 3 && positive && a.n_unstable_ == 1;
    if (require_t3 && !a.t3_)
        throw Error("WrongClass", "needs real positive simple spectrum with one unstable eigenvalue");
    return a;
}

Vec ToralAutomorphism::apply(const Vec& x) const { return m_.cast<double>() * x; }
Vec ToralAutomorphism::apply_inverse(const Vec& x) const { return minv_.cast<double>() * x; }
Vec ToralAutomorphism::apply_torus(const Vec& x) const { return torus_reduce(apply(x)); }
Vec ToralAutomorphism::apply_inverse_torus(const Vec& x) const { return torus_reduce(apply_inverse(x)); }

Vec ToralAutomorphism::unstable_part(const Vec& v) const
{
    Vec e = to_eigen(v);
    Vec out = Vec::Zero(dim());
    for (int i = dim() - n_unstable_; i < dim(); ++i)
        out += e[i] * basis_.col(i);
    return out;
}

Vec ToralAutomorphism::bracket(const Vec& x, const Vec& y) const
{
    Vec ex = to_eigen(x), ey = to_eigen(y), ez = ey;
    for (int i = dim() - n_unstable_; i < dim(); ++i)
        ez[i] = ex[i];
    return from_eigen(ez);
}

ToralAutomorphism ToralAutomorphism::power(int k) const
{
    IMat p = IMat::Identity(dim(), dim());
    const IMat& b = k >= 0 ? m_ : minv_;
    for (int i = 0; i < std::abs(k); ++i)
        p = p * b;
    return classify(p);
}

double ToralAutomorphism::unstable_projector_norm() const
{
    int n = dim();
    Mat d = Mat::Zero(n, n);
    for (int i = n - n_unstable_; i < n; ++i)
        d(i, i) = 1.0;
    Mat p = basis_ * d * basis_inv_;
    Eigen::JacobiSVD<Mat> svd(p);
    return svd.singularValues()[0];
}

IMat integer_matrix(std::initializer_list<std::initializer_list<long long>> rows)
{
    IMat m(rows.size(), rows.begin()->size());
    int i = 0;
    for (auto& r : rows) {
        int j = 0;
        for (long long v : r)
            m(i, j++) = v;
        ++i;
    }
    return m;
}

IMat default_matrix() { return integer_matrix({{0, 0, 1}, {1, 0, -5}, {0, 1, 6}}); }

Vec torus_reduce(const Vec& x)
{
    Vec r = x;
    for (int i = 0; i < r.size(); ++i) {
        r[i] -= std::floor(r[i]);
        if (r[i] >= 1.0)
            r[i] = 0.0;
    }
    return r;
}

Vec wrap_displacement(const Vec& d)
{
    Vec r = d;
    for (int i = 0; i < r.size(); ++i)
        r[i] -= std::floor(r[i] + 0.5);
    return r;
}

double torus_distance(const Vec& x, const Vec& y) { return wrap_displacement(y - x).norm(); }

} // namespace hyperdyn
