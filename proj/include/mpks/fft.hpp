#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <vector>

#include "mpks/grid.hpp"

namespace mpks::fft {

// Complex-to-complex FFTW plans, one pair per (dim, n), shared process-wide.
// Plans are created with FFTW_UNALIGNED so they can be executed on any
// std::vector buffer through the thread-safe new-array interface.
class PlanCache {
  public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int dim, int n, int sign) {
        const std::tuple<int, int, int> key{dim, n, sign};
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;

        std::size_t total = 1;
        std::vector<int> dims(dim, n);
        for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n);
        std::vector<std::complex<double>> a(total), b(total);
        fftw_plan plan = fftw_plan_dft(dim, dims.data(),
                                       reinterpret_cast<fftw_complex*>(a.data()),
                                       reinterpret_cast<fftw_complex*>(b.data()), sign,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
        return plan;
    }

  private:
    PlanCache() = default;
    std::mutex mutex_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

inline void execute(fftw_plan plan, const std::complex<double>* in, std::complex<double>* out) {
    // FFTW does not modify the input of an out-of-place c2c transform.
    fftw_execute_dft(plan,
                     reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

// Samples live on [-L/2, L/2) while the DFT counts indices from the first
// sample; the two conventions differ by (-1)^{sum_a m_a} per mode. With n
// even the parity of m equals the parity of the storage index, so flipping
// the odd-parity modes turns DFT output into physical coefficients
// c(xi) = N^{-d} sum_j f(x_j) exp(-i xi . x_j) and vice versa.
inline void flip_odd_parity(const SpectralGrid& g, std::vector<std::complex<double>>& a) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto idx = g.unflatten(i);
        int s = 0;
        for (int ax = 0; ax < g.dim(); ++ax) s += idx[ax];
        if (s & 1) a[i] = -a[i];
    }
}

// Forward transform of real samples into physical coefficients: c(0) is the
// box mean of f, i.e. (1/L^d) * integral(f), and generally
// c(xi) = N^{-d} sum_j f(x_j) exp(-i xi . x_j) with x measured from the box
// center.
inline void forward(const SpectralGrid& g, const std::vector<double>& in,
                    std::vector<std::complex<double>>& out) {
    const std::size_t total = g.size();
    std::vector<std::complex<double>> buf(total);
    for (std::size_t i = 0; i < total; ++i) buf[i] = in[i];
    out.resize(total);
    fftw_plan plan = PlanCache::instance().get(g.dim(), g.n_per_axis(), FFTW_FORWARD);
    execute(plan, buf.data(), out.data());
    const double scale = 1.0 / static_cast<double>(total);
    for (auto& c : out) c *= scale;
    flip_odd_parity(g, out);
}

// Inverse of `forward`: f(x_j) = sum_m c_m exp(+i xi_m . x_j).
inline void inverse(const SpectralGrid& g, const std::vector<std::complex<double>>& in,
                    std::vector<std::complex<double>>& out) {
    std::vector<std::complex<double>> buf(in);
    flip_odd_parity(g, buf);
    out.resize(g.size());
    fftw_plan plan = PlanCache::instance().get(g.dim(), g.n_per_axis(), FFTW_BACKWARD);
    execute(plan, buf.data(), out.data());
}

}  // namespace mpks::fft
