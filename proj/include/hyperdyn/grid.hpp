#pragma once

#include "hyperdyn/common.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace hyperdyn {

// Bitset over the uniform N^dim partition of the torus into half-open cells
// [k/N, (k+1)/N). Linear index: i0 + N*(i1 + N*i2).
class GridSet {
public:
    GridSet() = default;
    // Throws ResolutionOverflow when N^dim exceeds max_cells().
    GridSet(int dim, int n);

    static GridSet full(int dim, int n);
    static std::size_t max_cells();
    static void set_max_cells(std::size_t cells);

    int dim() const { return dim_; }
    int resolution() const { return n_; }
    std::size_t size() const { return size_; }
    double cell_width() const { return 1.0 / n_; }

    bool test(std::size_t i) const { return (bits_[i >> 6] >> (i & 63)) & 1u; }
    void set(std::size_t i) { bits_[i >> 6] |= (std::uint64_t(1) << (i & 63)); }
    void reset(std::size_t i) { bits_[i >> 6] &= ~(std::uint64_t(1) << (i & 63)); }
    // Returns true when the bit was newly set.
    bool insert(std::size_t i)
    {
        std::uint64_t m = std::uint64_t(1) << (i & 63);
        bool fresh = !(bits_[i >> 6] & m);
        bits_[i >> 6] |= m;
        return fresh;
    }

    std::size_t index_of(const Vec& x) const;
    std::size_t index(std::array<long long, 3> c) const; // wraps coordinates
    std::array<long long, 3> coords(std::size_t i) const;
    Vec center(std::size_t i) const;
    // Cell index offset by integer steps, wrapping around the torus.
    std::size_t shifted(std::size_t i, const std::array<long long, 3>& d) const;

    std::size_t count() const;
    double coverage() const { return static_cast<double>(count()) / static_cast<double>(size_); }
    std::vector<std::size_t> members() const;
    bool empty() const { return count() == 0; }

    GridSet& operator|=(const GridSet& o);
    GridSet& operator&=(const GridSet& o);
    GridSet minus(const GridSet& o) const;
    bool operator==(const GridSet& o) const;
    bool subset_of(const GridSet& o) const;
    // Cells within sup-distance r (in cells) of a member.
    GridSet dilate(int r = 1) const;
    // Cell of the half-resolution grid is marked when any child is.
    GridSet coarsen() const;

    const std::vector<std::uint64_t>& words() const { return bits_; }
    std::string meta;

private:
    void check_same(const GridSet& o) const;
    int dim_ = 0;
    int n_ = 0;
    std::size_t size_ = 0;
    std::vector<std::uint64_t> bits_;
};

// Marks every cell crossed by the straight lifted segment a -> b.
void mark_segment(GridSet& s, const Vec& a, const Vec& b);

// Binary format: 16-byte header {"HGS1", dim, N, popcount} (uint32 LE), then
// LEB128 run lengths alternating unmarked/marked, starting with unmarked.
void write_hgs(const std::string& path, const GridSet& s);
GridSet read_hgs(const std::string& path);

// 2D set, or the slice z = k of a 3D set, as a binary PGM (P5, maxval 255).
void write_pgm(const std::string& path, const GridSet& s, int slice = 0);

} // namespace hyperdyn
