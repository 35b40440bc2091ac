#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "mpks/field.hpp"

namespace mpks {

// Isotropic Gaussian bump with total mass `mass` and per-axis standard
// deviation `sigma`, centered at `center` (box-centered coordinates).
inline Field make_gaussian(GridPtr grid, double mass, double sigma,
                           std::array<double, 3> center = {0.0, 0.0, 0.0}) {
    if (!(mass > 0.0) || !(sigma > 0.0)) throw ConfigError("gaussian: mass and sigma must be positive");
    const SpectralGrid& g = *grid;
    const int d = g.dim();
    const double amp = mass * std::pow(2.0 * M_PI * sigma * sigma, -0.5 * d);
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto idx = g.unflatten(i);
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
            const double dx = g.coord(idx[a]) - center[a];
            r2 += dx * dx;
        }
        v[i] = amp * std::exp(-r2 * inv2s2);
    }
    return Field::from_real(std::move(grid), std::move(v));
}

// Two equal Gaussians of combined mass `mass` at +/- offset along axis 0.
inline Field make_two_bump(GridPtr grid, double mass, double sigma, double separation) {
    std::array<double, 3> c1{+0.5 * separation, 0.0, 0.0};
    std::array<double, 3> c2{-0.5 * separation, 0.0, 0.0};
    Field a = make_gaussian(grid, 0.5 * mass, sigma, c1);
    Field b = make_gaussian(grid, 0.5 * mass, sigma, c2);
    return add(a, b);
}

// Radial Gaussian ridge exp(-(r - r0)^2 / 2w^2), rescaled so the discrete
// integral equals `mass` exactly.
inline Field make_annulus(GridPtr grid, double mass, double radius, double width) {
    if (!(mass > 0.0) || !(radius > 0.0) || !(width > 0.0))
        throw ConfigError("annulus: mass, radius, width must be positive");
    const SpectralGrid& g = *grid;
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto idx = g.unflatten(i);
        double r2 = 0.0;
        for (int a = 0; a < g.dim(); ++a) r2 += g.coord(idx[a]) * g.coord(idx[a]);
        const double dr = std::sqrt(r2) - radius;
        v[i] = std::exp(-dr * dr / (2.0 * width * width));
    }
    Field f = Field::from_real(std::move(grid), std::move(v));
    const double m0 = f.integral();
    if (!(m0 > 0.0)) throw ConfigError("annulus: degenerate profile");
    return scale(f, mass / m0);
}

// Indicator of the disk/ball of given radius, mass-normalized discretely.
inline Field make_disk(GridPtr grid, double mass, double radius) {
    const SpectralGrid& g = *grid;
    std::vector<double> v(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        auto idx = g.unflatten(i);
        double r2 = 0.0;
        for (int a = 0; a < g.dim(); ++a) r2 += g.coord(idx[a]) * g.coord(idx[a]);
        if (r2 <= radius * radius) v[i] = 1.0;
    }
    Field f = Field::from_real(std::move(grid), std::move(v));
    const double m0 = f.integral();
    if (!(m0 > 0.0)) throw ConfigError("disk: radius below grid resolution");
    return scale(f, mass / m0);
}

}  // namespace mpks
