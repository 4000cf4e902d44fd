#include "hyperdyn/grid.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>

namespace hyperdyn {

namespace {
std::atomic<std::size_t> g_max_cells{std::size_t(1) << 27};

void put_u32(std::ofstream& out, std::uint32_t v)
{
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& in)
{
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw Error("IoError", "truncated grid file");
    return b[0] | (b[1] << 8) | (b[2] << 16) | (std::uint32_t(b[3]) << 24);
}

void put_varint(std::ofstream& out, std::uint64_t v)
{
    do {
        unsigned char c = v & 0x7f;
        v >>= 7;
        if (v)
            c |= 0x80;
        out.put(static_cast<char>(c));
    } while (v);
}

std::uint64_t get_varint(std::ifstream& in)
{
    std::uint64_t v = 0;
    int shift = 0;
    while (true) {
        int c = in.get();
        if (c == EOF)
            throw Error("IoError", "truncated run length");
        v |= std::uint64_t(c & 0x7f) << shift;
        if (!(c & 0x80))
            break;
        shift += 7;
    }
    return v;
}
} // namespace

std::size_t GridSet::max_cells() { return g_max_cells.load(); }
void GridSet::set_max_cells(std::size_t cells) { g_max_cells = cells; }

GridSet::GridSet(int dim, int n) : dim_(dim), n_(n)
{
    if (dim < 1 || dim > 3 || n < 1)
        throw Error("BadInput", "grid dimension must be 1..3 and N >= 1");
    long double cells = std::pow(static_cast<long double>(n), dim);
    if (cells > static_cast<long double>(max_cells()))
        throw Error("ResolutionOverflow", "N^dim = " + std::to_string(static_cast<double>(cells)));
    size_ = static_cast<std::size_t>(cells);
    bits_.assign((size_ + 63) / 64, 0);
}

GridSet GridSet::full(int dim, int n)
{
    GridSet s(dim, n);
    for (auto& w : s.bits_)
        w = ~std::uint64_t(0);
    if (s.size_ % 64)
        s.bits_.back() = (std::uint64_t(1) << (s.size_ % 64)) - 1;
    return s;
}

std::size_t GridSet::index_of(const Vec& x) const
{
    std::array<long long, 3> c{0, 0, 0};
    for (int d = 0; d < dim_; ++d)
        c[d] = static_cast<long long>(std::floor(x[d] * n_));
    return index(c);
}

std::size_t GridSet::index(std::array<long long, 3> c) const
{
    std::size_t idx = 0, mul = 1;
    for (int d = 0; d < dim_; ++d) {
        long long v = c[d] % n_;
        if (v < 0)
            v += n_;
        idx += static_cast<std::size_t>(v) * mul;
        mul *= static_cast<std::size_t>(n_);
    }
    return idx;
}

std::array<long long, 3> GridSet::coords(std::size_t i) const
{
    std::array<long long, 3> c{0, 0, 0};
    for (int d = 0; d < dim_; ++d) {
        c[d] = static_cast<long long>(i % n_);
        i /= n_;
    }
    return c;
}

Vec GridSet::center(std::size_t i) const
{
    auto c = coords(i);
    Vec x(dim_);
    for (int d = 0; d < dim_; ++d)
        x[d] = (static_cast<double>(c[d]) + 0.5) / n_;
    return x;
}

std::size_t GridSet::shifted(std::size_t i, const std::array<long long, 3>& d) const
{
    auto c = coords(i);
    for (int k = 0; k < dim_; ++k)
        c[k] += d[k];
    return index(c);
}

std::size_t GridSet::count() const
{
    std::size_t c = 0;
    for (auto w : bits_)
        c += static_cast<std::size_t>(std::popcount(w));
    return c;
}

std::vector<std::size_t> GridSet::members() const
{
    std::vector<std::size_t> out;
    for (std::size_t w = 0; w < bits_.size(); ++w) {
        std::uint64_t b = bits_[w];
        while (b) {
            int t = std::countr_zero(b);
            out.push_back(w * 64 + static_cast<std::size_t>(t));
            b &= b - 1;
        }
    }
    return out;
}

void GridSet::check_same(const GridSet& o) const
{
    if (o.dim_ != dim_ || o.n_ != n_)
        throw Error("BadInput", "grid sets have different shapes");
}

GridSet& GridSet::operator|=(const GridSet& o)
{
    check_same(o);
    for (std::size_t i = 0; i < bits_.size(); ++i)
        bits_[i] |= o.bits_[i];
    return *this;
}

GridSet& GridSet::operator&=(const GridSet& o)
{
    check_same(o);
    for (std::size_t i = 0; i < bits_.size(); ++i)
        bits_[i] &= o.bits_[i];
    return *this;
}

GridSet GridSet::minus(const GridSet& o) const
{
    check_same(o);
    GridSet r = *this;
    for (std::size_t i = 0; i < bits_.size(); ++i)
        r.bits_[i] &= ~o.bits_[i];
    return r;
}

bool GridSet::operator==(const GridSet& o) const { return dim_ == o.dim_ && n_ == o.n_ && bits_ == o.bits_; }

bool GridSet::subset_of(const GridSet& o) const
{
    check_same(o);
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i] & ~o.bits_[i])
            return false;
    return true;
}

GridSet GridSet::dilate(int r) const
{
    GridSet out = *this;
    std::vector<std::array<long long, 3>> offs;
    int rz = dim_ >= 3 ? r : 0, ry = dim_ >= 2 ? r : 0;
    for (long long a = -r; a <= r; ++a)
        for (long long b = -ry; b <= ry; ++b)
            for (long long c = -rz; c <= rz; ++c)
                offs.push_back({a, b, c});
    for (std::size_t i : members())
        for (auto& d : offs)
            out.set(shifted(i, d));
    return out;
}

GridSet GridSet::coarsen() const
{
    if (n_ % 2)
        throw Error("BadInput", "coarsening needs even N");
    GridSet out(dim_, n_ / 2);
    for (std::size_t i : members()) {
        auto c = coords(i);
        for (int d = 0; d < dim_; ++d)
            c[d] /= 2;
        out.set(out.index(c));
    }
    return out;
}

void mark_segment(GridSet& s, const Vec& a, const Vec& b)
{
    // Supercover traversal: step through every cell boundary crossed.
    int dim = s.dim();
    double n = s.resolution();
    std::array<long long, 3> cell{0, 0, 0};
    std::array<double, 3> tmax{INFINITY, INFINITY, INFINITY}, tdelta{INFINITY, INFINITY, INFINITY};
    std::array<int, 3> step{0, 0, 0};
    Vec d = b - a;
    for (int k = 0; k < dim; ++k) {
        double p = a[k] * n;
        cell[k] = static_cast<long long>(std::floor(p));
        double dk = d[k] * n;
        if (dk > 0) {
            step[k] = 1;
            tdelta[k] = 1.0 / dk;
            tmax[k] = (static_cast<double>(cell[k] + 1) - p) / dk;
        } else if (dk < 0) {
            step[k] = -1;
            tdelta[k] = -1.0 / dk;
            tmax[k] = (p - static_cast<double>(cell[k])) / -dk;
        }
    }
    std::array<long long, 3> last{0, 0, 0};
    for (int k = 0; k < dim; ++k)
        last[k] = static_cast<long long>(std::floor(b[k] * n));
    s.set(s.index(cell));
    for (int guard = 0; guard < 1 << 24; ++guard) {
        if (cell == last)
            break;
        int k = 0;
        for (int j = 1; j < dim; ++j)
            if (tmax[j] < tmax[k])
                k = j;
        if (tmax[k] > 1.0)
            break;
        cell[k] += step[k];
        tmax[k] += tdelta[k];
        s.set(s.index(cell));
    }
    s.set(s.index(last));
}

void write_hgs(const std::string& path, const GridSet& s)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("IoError", "cannot write " + path);
    out.write("HGS1", 4);
    put_u32(out, static_cast<std::uint32_t>(s.dim()));
    put_u32(out, static_cast<std::uint32_t>(s.resolution()));
    put_u32(out, static_cast<std::uint32_t>(s.count()));
    bool cur = false;
    std::uint64_t run = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        bool b = s.test(i);
        if (b != cur) {
            put_varint(out, run);
            run = 0;
            cur = b;
        }
        ++run;
    }
    put_varint(out, run);
}

GridSet read_hgs(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("IoError", "cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "HGS1")
        throw Error("IoError", "not an HGS1 file");
    int dim = static_cast<int>(get_u32(in));
    int n = static_cast<int>(get_u32(in));
    std::uint32_t pop = get_u32(in);
    GridSet s(dim, n);
    std::size_t pos = 0;
    bool cur = false;
    while (pos < s.size()) {
        std::uint64_t run = get_varint(in);
        if (pos + run > s.size())
            throw Error("IoError", "run overflows grid");
        if (cur)
            for (std::uint64_t k = 0; k < run; ++k)
                s.set(pos + k);
        pos += run;
        cur = !cur;
    }
    if (s.count() != pop)
        throw Error("IoError", "popcount mismatch");
    return s;
}

void write_pgm(const std::string& path, const GridSet& s, int slice)
{
    if (s.dim() < 2)
        throw Error("BadInput", "PGM export needs dim >= 2");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("IoError", "cannot write " + path);
    int n = s.resolution();
    out << "P5\n" << n << " " << n << "\n255\n";
    // Top row of the image is the largest y.
    for (int y = n - 1; y >= 0; --y)
        for (int x = 0; x < n; ++x) {
            unsigned char v = s.test(s.index({x, y, slice})) ? 255 : 0;
            out.put(static_cast<char>(v));
        }
}

} // namespace hyperdyn
