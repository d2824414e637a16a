#include "sgflm/lattice.hpp"

#include <algorithm>
#include <stdexcept>

namespace sgflm {

std::string to_string(Neighborhood kind)
{
    return kind == Neighborhood::four_nearest ? "four_nearest" : "eight_nearest";
}

Neighborhood parse_neighborhood(const std::string& name)
{
    if (name == "four_nearest" || name == "4")
        return Neighborhood::four_nearest;
    if (name == "eight_nearest" || name == "8")
        return Neighborhood::eight_nearest;
    throw std::invalid_argument("unknown neighborhood kind '" + name + "'");
}

Lattice::Lattice(const LatticeSpec& spec) : spec_(spec)
{
    if (spec.rows <= 0 || spec.cols <= 0)
        throw std::invalid_argument("lattice dimensions must be positive");
    if (spec.wrap && (spec.rows < 3 || spec.cols < 3))
        throw std::invalid_argument("a torus needs at least 3 rows and 3 columns");

    static constexpr int four[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    static constexpr int eight[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                        {0, 1},   {1, -1}, {1, 0},  {1, 1}};
    const std::span<const int[2]> steps = spec.kind == Neighborhood::four_nearest
        ? std::span<const int[2]>(four)
        : std::span<const int[2]>(eight);

    offsets_.reserve(size() + 1);
    offsets_.push_back(0);
    std::vector<int> nb;
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            nb.clear();
            for (const auto& s : steps) {
                int rr = r + s[0];
                int cc = c + s[1];
                if (spec.wrap) {
                    rr = (rr + spec.rows) % spec.rows;
                    cc = (cc + spec.cols) % spec.cols;
                } else if (rr < 0 || rr >= spec.rows || cc < 0 || cc >= spec.cols) {
                    continue;
                }
                nb.push_back(site(rr, cc));
            }
            std::sort(nb.begin(), nb.end());
            adjacency_.insert(adjacency_.end(), nb.begin(), nb.end());
            offsets_.push_back(static_cast<int>(adjacency_.size()));
        }
    }
}

std::span<const int> Lattice::neighbors(int i) const
{
    if (i < 0 || i >= size())
        throw std::out_of_range("site index out of range");
    return std::span<const int>(adjacency_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

Lattice build_lattice(int rows, int cols, bool wrap, Neighborhood kind)
{
    return Lattice(LatticeSpec{rows, cols, wrap, kind});
}

double neighbor_sum(const Lattice& lattice, std::span<const double> values, int i)
{
    if (values.size() != static_cast<std::size_t>(lattice.size()))
        throw std::invalid_argument("neighbor_sum: value vector does not match lattice size");
    double s = 0.0;
    for (int j : lattice.neighbors(i))
        s += values[j];
    return s;
}

} // namespace sgflm
