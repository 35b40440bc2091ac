#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <memory>
#include <vector>

#include "mpks/errors.hpp"

namespace mpks {

// Uniform periodic grid on a box [-L/2, L/2)^d with the matching frequency
// lattice xi = 2*pi*m/L, m in {-n/2, ..., n/2-1}. Frequencies are stored in
// FFT order: index i maps to m = i for i < n/2 and m = i - n otherwise, so
// the single Nyquist mode sits at index n/2 with m = -n/2.
class SpectralGrid {
  public:
    SpectralGrid(int dim, int n_per_axis, double box_length)
        : dim_(dim), n_(n_per_axis), box_length_(box_length) {
        if (dim < 1 || dim > 3) throw ConfigError("grid: dim must be 1, 2 or 3");
        if (n_per_axis < 8 || n_per_axis % 2 != 0)
            throw ConfigError("grid: n_per_axis must be even and >= 8");
        if (!(box_length > 0.0)) throw ConfigError("grid: box_length must be positive");
        spacing_ = box_length_ / n_;
        size_ = 1;
        for (int a = 0; a < dim_; ++a) size_ *= static_cast<std::size_t>(n_);
        freqs_.resize(n_);
        coords_.resize(n_);
        const double dxi = 2.0 * M_PI / box_length_;
        for (int i = 0; i < n_; ++i) {
            const int m = (i < n_ / 2) ? i : i - n_;
            freqs_[i] = dxi * m;
            coords_[i] = -0.5 * box_length_ + spacing_ * i;
        }
    }

    int dim() const { return dim_; }
    int n_per_axis() const { return n_; }
    double box_length() const { return box_length_; }
    double spacing() const { return spacing_; }
    std::size_t size() const { return size_; }

    // Wavenumber of storage index i on any axis (all axes share one lattice).
    double freq(int i) const { return freqs_[i]; }
    const std::vector<double>& freqs() const { return freqs_; }

    // Physical coordinate of sample index i on any axis, measured from the
    // box center (coordinates span [-L/2, L/2)).
    double coord(int i) const { return coords_[i]; }

    double max_freq() const { return M_PI * n_ / box_length_; }

    // Row-major decomposition of a flat index into per-axis indices.
    std::array<int, 3> unflatten(std::size_t flat) const {
        std::array<int, 3> idx{0, 0, 0};
        for (int a = dim_ - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(flat % n_);
            flat /= n_;
        }
        return idx;
    }

    std::size_t flatten(const std::array<int, 3>& idx) const {
        std::size_t flat = 0;
        for (int a = 0; a < dim_; ++a) flat = flat * n_ + static_cast<std::size_t>(idx[a]);
        return flat;
    }

    bool same_layout(const SpectralGrid& other) const {
        return dim_ == other.dim_ && n_ == other.n_ && box_length_ == other.box_length_;
    }

  private:
    int dim_;
    int n_;
    double box_length_;
    double spacing_;
    std::size_t size_;
    std::vector<double> freqs_;
    std::vector<double> coords_;
};

using GridPtr = std::shared_ptr<const SpectralGrid>;

inline GridPtr make_grid(int dim, int n_per_axis, double box_length) {
    return std::make_shared<const SpectralGrid>(dim, n_per_axis, box_length);
}

// Largest time for which whole-space decay laws are trusted on the periodic
// box: diffusive spreading must satisfy 4*sqrt(t) <= L/4.
inline double validity_horizon(const SpectralGrid& g) {
    const double s = g.box_length() / 16.0;
    return s * s;
}

}  // namespace mpks
