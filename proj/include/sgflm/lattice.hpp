#pragma once

#include <span>
#include <string>
#include <vector>

namespace sgflm {

enum class Neighborhood { four_nearest, eight_nearest };

std::string to_string(Neighborhood kind);
Neighborhood parse_neighborhood(const std::string& name);

struct LatticeSpec {
    int rows = 20;
    int cols = 20;
    bool wrap = true;
    Neighborhood kind = Neighborhood::four_nearest;

    bool operator==(const LatticeSpec&) const = default;
};

/// Regular grid of sites with a symmetric, irreflexive neighborhood map.
/// Sites are numbered row-major: index = row * cols + col.
class Lattice {
public:
    explicit Lattice(const LatticeSpec& spec);

    const LatticeSpec& spec() const { return spec_; }
    int rows() const { return spec_.rows; }
    int cols() const { return spec_.cols; }
    int size() const { return spec_.rows * spec_.cols; }
    int site(int row, int col) const { return row * spec_.cols + col; }

    std::span<const int> neighbors(int i) const;

private:
    LatticeSpec spec_;
    std::vector<int> offsets_;   // CSR layout, size() + 1 entries
    std::vector<int> adjacency_;
};

Lattice build_lattice(int rows, int cols, bool wrap, Neighborhood kind);

/// Sum of values over the neighbors of site i.
double neighbor_sum(const Lattice& lattice, std::span<const double> values, int i);

} // namespace sgflm
