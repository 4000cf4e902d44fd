#include "hyperdyn/shadowing.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace hyperdyn {

namespace {

Vec jump(const TorusMap& f, const Vec& x, const Vec& next) { return wrap_displacement(next - f.forward(x)); }

double orbit_residual(const TorusMap& f, const std::vector<Vec>& y, bool periodic)
{
    const auto& a = f.base();
    double r = 0.0;
    std::size_t n = y.size();
    for (std::size_t i = 0; i + 1 < n; ++i)
        r = std::max(r, a.eigen_norm(jump(f, y[i], y[i + 1])));
    if (periodic)
        r = std::max(r, a.eigen_norm(jump(f, y[n - 1], y[0])));
    return r;
}

void fill_beta(const ToralAutomorphism& a, const PseudoOrbit& po, ShadowResult& res)
{
    res.beta = res.beta_euclidean = 0.0;
    for (std::size_t i = 0; i < po.points.size(); ++i) {
        Vec d = res.orbit[i] - po.points[i];
        res.beta = std::max(res.beta, a.eigen_norm(d));
        res.beta_euclidean = std::max(res.beta_euclidean, d.norm());
    }
}

} // namespace

PseudoOrbit make_pseudo_orbit(const TorusMap& f, std::vector<Vec> points, bool closed)
{
    PseudoOrbit po;
    po.points = std::move(points);
    po.closed = closed;
    po.map_id = f.id();
    if (po.points.empty())
        return po;
    po.alpha = orbit_residual(f, po.points, closed);
    return po;
}

double shadowing_constant(const ToralAutomorphism& a)
{
    double k = 0.0;
    for (double l : a.eigenvalues()) {
        double m = std::fabs(l);
        k = std::max(k, m < 1 ? 1.0 / (1.0 - m) : 1.0 / (m - 1.0));
    }
    return k;
}

ShadowResult shadow_linear(const ToralAutomorphism& a, const PseudoOrbit& po, Boundary boundary)
{
    if (po.points.empty())
        throw Error("EmptyOrbit", "pseudo-orbit has no points");
    int dim = a.dim();
    std::size_t n = po.points.size();
    bool periodic = boundary == Boundary::Periodic;
    LinearMap f(a);

    // Jumps in eigencoordinates: x_{k+1} = A x_k + d_k, and for periodic
    // input also the closing jump at index n-1.
    std::size_t njumps = periodic ? n : n - 1;
    std::vector<Vec> d(njumps);
    for (std::size_t k = 0; k < njumps; ++k)
        d[k] = a.to_eigen(jump(f, po.points[k], po.points[(k + 1) % n]));

    // Correction c with c_{k+1} = lambda c_k - d_k componentwise.
    std::vector<Vec> c(n, Vec::Zero(dim));
    for (int i = 0; i < dim; ++i) {
        double l = a.eigenvalues()[i];
        if (std::fabs(l) < 1.0) {
            double c0 = 0.0;
            if (periodic) {
                double v = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    v = l * v - d[k][i];
                c0 = v / (1.0 - std::pow(l, static_cast<double>(n)));
            }
            c[0][i] = c0;
            for (std::size_t k = 0; k + 1 < n; ++k)
                c[k + 1][i] = l * c[k][i] - d[k][i];
        } else {
            // Backward: c_k = (c_{k+1} + d_k) / lambda.
            double cn = 0.0;
            if (periodic) {
                double w = 0.0;
                for (std::size_t k = n; k-- > 0;)
                    w = (w + d[k][i]) / l;
                // w is c_0 given c_n = 0; the cycle adds lambda^-n c_0.
                double c0 = w / (1.0 - std::pow(l, -static_cast<double>(n)));
                cn = c0; // c_n is c_0 on the cycle
                double v = cn;
                c[n - 1][i] = (v + d[n - 1][i]) / l;
                for (std::size_t k = n - 1; k-- > 0;)
                    c[k][i] = (c[k + 1][i] + d[k][i]) / l;
                continue;
            }
            c[n - 1][i] = cn;
            for (std::size_t k = n - 1; k-- > 0;)
                c[k][i] = (c[k + 1][i] + d[k][i]) / l;
        }
    }

    ShadowResult res;
    res.orbit.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        res.orbit[k] = po.points[k] + a.from_eigen(c[k]);
    res.residual = orbit_residual(f, res.orbit, periodic);
    res.k_bound = shadowing_constant(a);
    fill_beta(a, po, res);
    return res;
}

ShadowResult shadow_nonlinear(const TorusMap& f, const PseudoOrbit& po, double tol, Boundary boundary, int max_iterations)
{
    if (po.points.empty())
        throw Error("EmptyOrbit", "pseudo-orbit has no points");
    const auto& a = f.base();
    int dim = f.dim();
    std::size_t n = po.points.size();
    bool periodic = boundary == Boundary::Periodic;
    std::size_t nblocks = periodic ? n : n - 1;

    // Boundary rows: left eigenvectors of Df at the endpoints.
    std::vector<Eigen::RowVectorXd> bc_start, bc_end;
    if (!periodic) {
        auto split = [&](const Vec& x, bool want_stable) {
            Mat j = f.jacobian(x);
            Eigen::EigenSolver<Eigen::MatrixXd> es(j);
            Eigen::MatrixXd v = es.eigenvectors().real();
            Eigen::MatrixXd vinv = v.inverse();
            std::vector<Eigen::RowVectorXd> rows;
            for (int i = 0; i < dim; ++i) {
                bool stable = std::abs(es.eigenvalues()[i]) < 1.0;
                if (stable == want_stable)
                    rows.push_back(vinv.row(i));
            }
            return rows;
        };
        bc_start = split(po.points.front(), true);
        bc_end = split(po.points.back(), false);
    }
    std::size_t nrows = nblocks * dim + bc_start.size() + bc_end.size();
    std::size_t ncols = n * dim;

    std::vector<Vec> y = po.points;
    auto residual_vector = [&](const std::vector<Vec>& z) {
        Eigen::VectorXd r(nrows);
        for (std::size_t k = 0; k < nblocks; ++k)
            r.segment(k * dim, dim) = -jump(f, z[k], z[(k + 1) % n]);
        std::size_t row = nblocks * dim;
        for (auto& w : bc_start)
            r[row++] = w.dot(Eigen::VectorXd(z.front() - po.points.front()));
        for (auto& w : bc_end)
            r[row++] = w.dot(Eigen::VectorXd(z.back() - po.points.back()));
        return r;
    };
    auto measure = [&](const std::vector<Vec>& z, const Eigen::VectorXd& r) {
        double m = orbit_residual(f, z, periodic);
        for (std::size_t i = nblocks * dim; i < nrows; ++i)
            m = std::max(m, std::fabs(r[i]));
        return m;
    };

    Eigen::VectorXd r = residual_vector(y);
    double res = measure(y, r);
    int it = 0;
    while (res >= tol) {
        if (it >= max_iterations)
            throw Error("NoConvergence", "iterations " + std::to_string(it) + ", residual " + std::to_string(res));
        ++it;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(nblocks * dim * (dim + 1) + (bc_start.size() + bc_end.size()) * dim);
        for (std::size_t k = 0; k < nblocks; ++k) {
            Mat j = f.jacobian(y[k]);
            std::size_t next = (k + 1) % n;
            for (int p = 0; p < dim; ++p) {
                for (int q = 0; q < dim; ++q)
                    trip.emplace_back(k * dim + p, k * dim + q, j(p, q));
                trip.emplace_back(k * dim + p, next * dim + p, -1.0);
            }
        }
        std::size_t row = nblocks * dim;
        for (auto& w : bc_start) {
            for (int q = 0; q < dim; ++q)
                trip.emplace_back(row, q, w[q]);
            ++row;
        }
        for (auto& w : bc_end) {
            for (int q = 0; q < dim; ++q)
                trip.emplace_back(row, (n - 1) * dim + q, w[q]);
            ++row;
        }
        Eigen::SparseMatrix<double> jm(nrows, ncols);
        jm.setFromTriplets(trip.begin(), trip.end());
        // r holds the equation values F(y_k) - y_{k+1} and boundary rows.
        Eigen::VectorXd rhs = -r;

        Eigen::VectorXd delta;
        if (nrows <= ncols) {
            Eigen::SparseMatrix<double> jjt = jm * jm.transpose();
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(jjt);
            if (solver.info() != Eigen::Success)
                throw Error("NoConvergence", "singular linearization");
            delta = jm.transpose() * solver.solve(rhs);
        } else {
            Eigen::SparseMatrix<double> jtj = jm.transpose() * jm;
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(jtj);
            if (solver.info() != Eigen::Success)
                throw Error("NoConvergence", "singular linearization");
            delta = solver.solve(jm.transpose() * rhs);
        }

        double step = 1.0;
        bool accepted = false;
        for (int h = 0; h < 40; ++h) {
            std::vector<Vec> trial = y;
            for (std::size_t k = 0; k < n; ++k)
                trial[k] += step * delta.segment(k * dim, dim);
            Eigen::VectorXd rt = residual_vector(trial);
            double mt = measure(trial, rt);
            if (mt < res || mt < tol) {
                y = std::move(trial);
                r = rt;
                res = mt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted)
            throw Error("NoConvergence", "iterations " + std::to_string(it) + ", residual " + std::to_string(res));
    }

    ShadowResult out;
    out.orbit = std::move(y);
    out.residual = orbit_residual(f, out.orbit, periodic);
    out.iterations = it;
    out.k_bound = shadowing_constant(a);
    fill_beta(a, po, out);
    return out;
}

double expansivity_gap(const TorusMap& f, const Vec& x, const Vec& y, int horizon)
{
    double gap = (x - y).norm();
    Vec px = x, py = y, qx = x, qy = y;
    for (int n = 1; n <= horizon; ++n) {
        px = f.forward(px);
        py = f.forward(py);
        qx = f.inverse(qx);
        qy = f.inverse(qy);
        gap = std::max({gap, (px - py).norm(), (qx - qy).norm()});
    }
    return gap;
}

double expansivity_gap_eigen(const TorusMap& f, const Vec& anchor, const Vec& dx, const Vec& dy, int horizon)
{
    if (torus_distance(f.forward(anchor), anchor) > 1e-9)
        throw Error("BadInput", "expansivity_gap_eigen: anchor is not a fixed point");
    const ToralAutomorphism& a = f.base();
    const auto& lam = a.eigenvalues();
    const Vec k0 = f.eigen_defect(anchor);
    auto fwd = [&](Vec& w) {
        Vec k = f.eigen_defect(anchor + a.from_eigen(w)) - k0;
        for (int i = 0; i < w.size(); ++i)
            w[i] = lam[i] * w[i] + k[i];
    };
    auto bwd = [&](Vec& w) {
        Vec k = f.eigen_defect(f.inverse(anchor + a.from_eigen(w))) - k0;
        for (int i = 0; i < w.size(); ++i)
            w[i] = (w[i] - k[i]) / lam[i];
    };
    double gap = a.from_eigen(dy - dx).norm();
    for (auto step : {+1, -1}) {
        Vec u = dx, v = dy;
        for (int n = 1; n <= horizon; ++n) {
            if (step > 0) {
                fwd(u);
                fwd(v);
            } else {
                bwd(u);
                bwd(v);
            }
            gap = std::max(gap, a.from_eigen(v - u).norm());
        }
    }
    return gap;
}

std::vector<Vec> random_pseudo_orbit(const ToralAutomorphism& a, std::size_t n, double alpha, std::uint64_t seed)
{
    std::mt19937_64 rng(mix_seed(seed, 0));
    std::uniform_real_distribution<double> u(0.0, 1.0), j(-alpha, alpha);
    int dim = a.dim();
    std::vector<Vec> pts;
    pts.reserve(n);
    Vec x(dim);
    for (int i = 0; i < dim; ++i)
        x[i] = u(rng);
    pts.push_back(x);
    while (pts.size() < n) {
        Vec e(dim);
        for (int i = 0; i < dim; ++i)
            e[i] = j(rng);
        pts.push_back(torus_reduce(a.apply(pts.back()) + a.from_eigen(e)));
    }
    return pts;
}

std::vector<Vec> noisy_periodic_orbit(
    const ToralAutomorphism& a, int period, int repeats, double noise, std::uint64_t seed)
{
    int dim = a.dim();
    IMat ap = IMat::Identity(dim, dim);
    for (int i = 0; i < period; ++i)
        ap = ap * a.matrix();
    Mat m = (ap - IMat::Identity(dim, dim)).cast<double>();
    auto lu = m.fullPivLu();
    // Points of the orbit are (A^P - I)^{-1} A^n k for an integer k; the
    // integer vector A^n k is exact.
    IVec k = IVec::Ones(dim);
    k[0] = 1;
    if (dim > 1)
        k[1] = 2;
    std::vector<Vec> cycle;
    for (int n = 0; n < period; ++n) {
        cycle.push_back(torus_reduce(lu.solve(Vec(k.cast<double>()))));
        k = a.matrix() * k;
    }
    std::mt19937_64 rng(mix_seed(seed, 1));
    std::uniform_real_distribution<double> j(-noise, noise);
    std::vector<Vec> pts;
    for (int r = 0; r < repeats; ++r)
        for (int n = 0; n < period; ++n) {
            Vec e(dim);
            for (int i = 0; i < dim; ++i)
                e[i] = j(rng);
            pts.push_back(cycle[n] + a.from_eigen(e));
        }
    return pts;
}

std::vector<Vec> read_points_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("IoError", "cannot open " + path);
    std::vector<Vec> pts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || !(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-' || line[0] == '.'))
            continue;
        std::stringstream ss(line);
        std::vector<double> v;
        std::string tok;
        while (std::getline(ss, tok, ','))
            v.push_back(std::stod(tok));
        Vec p(static_cast<int>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i)
            p[i] = v[i];
        pts.push_back(p);
    }
    return pts;
}

void write_points_csv(const std::string& path, const std::vector<Vec>& pts)
{
    std::ofstream out(path);
    if (!out)
        throw Error("IoError", "cannot write " + path);
    int dim = pts.empty() ? 3 : static_cast<int>(pts[0].size());
    const char* names[] = {"x", "y", "z"};
    for (int i = 0; i < dim; ++i)
        out << (i ? "," : "") << names[i];
    out << "\n";
    out.precision(17);
    for (auto& p : pts) {
        for (int i = 0; i < dim; ++i)
            out << (i ? "," : "") << p[i];
        out << "\n";
    }
}

} // namespace hyperdyn
